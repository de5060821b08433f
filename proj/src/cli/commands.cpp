#include "preforge/cli/commands.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "preforge/catalog.hpp"
#include "preforge/cli/bundle.hpp"
#include "preforge/cli/spec_file.hpp"
#include "preforge/error.hpp"

namespace preforge::cli {

namespace {

constexpr int kExitNotFound = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Parse:
    case ErrorKind::UnboundParameter:
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidPermutation:
    case ErrorKind::InvalidDimension:
    case ErrorKind::Shape:
    case ErrorKind::Normalization:
    case ErrorKind::InvalidSetting:
    case ErrorKind::AssumptionViolation:
      return kExitUsage;
    case ErrorKind::NumericalConvergence:
    case ErrorKind::NoUniqueSteadyState:
    case ErrorKind::SynthesisFailure:
      return kExitNumeric;
    default:
      return kExitNotFound;
  }
}

struct Common {
  std::string spec;
  std::vector<std::string> params;
  std::string out;
};

struct Loaded {
  SpecFile spec;
  std::map<std::string, double> values;
  MasterEquation me;
  BlochModel bm;
};

Loaded load(const Common& c) {
  Loaded l;
  l.spec = load_spec(c.spec);
  l.values = bind_parameters(l.spec, c.params);
  l.me = build_master_equation(l.spec, l.values);
  l.bm = vectorize(l.me);
  return l;
}

void add_common(CLI::App* app, Common& c, bool need_spec = true) {
  auto* s = app->add_option("spec", c.spec, "ME spec file or catalog name");
  if (need_spec) s->required();
  app->add_option("--param,-p", c.params, "Parameter binding name=value (repeatable)");
  app->add_option("--out,-o", c.out, "Write output here instead of stdout");
}

json base_bundle(const std::string& command, const std::vector<std::string>& args, const Loaded& l) {
  json params = json::object();
  for (const auto& [k, v] : l.values) params[k] = v;
  return {{"schema_version", kBundleSchemaVersion},
          {"tool", {{"name", "pre-forge"}, {"version", kToolVersion}}},
          {"command", command},
          {"config", {{"argv", args}, {"spec", l.spec.source}, {"spec_name", l.spec.name}, {"parameters", params}}},
          {"warnings", l.me.warnings()}};
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write " + path);
  f << text;
}

void emit(const json& j, const std::string& path, std::ostream& out) { emit(j.dump(2) + "\n", path, out); }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void print_matrix(std::ostream& err, const std::string& name, const RMatrix& m) {
  err << name << " =\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    err << "  ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) err << std::setw(14) << fmt(m(r, c));
    err << "\n";
  }
}

// ---------------------------------------------------------------- search

struct SearchOpts {
  int k = 2;
  std::string graph = "auto";
  std::string subspace = "none";
  std::string wigner = "none";
  int seeds = 512;
  double tol = 1e-10;
  std::uint64_t rng = 1;
  int max_iter = 200;
  double dedup_eps = 1e-6;
  int pin_grid = 100;
  bool serial = false;
};

void add_search_options(CLI::App* app, SearchOpts& o) {
  app->add_option("--k", o.k, "Ensemble size K")->check(CLI::Range(2, 64));
  app->add_option("--graph", o.graph, "Transition graph: cyclic | full | auto")
      ->check(CLI::IsMember({"cyclic", "full", "auto"}));
  app->add_option("--subspace", o.subspace, "none | auto | <index> | axes:i,j,...");
  app->add_option("--wigner-reduce", o.wigner, "auto | none")->check(CLI::IsMember({"auto", "none"}));
  app->add_option("--seeds", o.seeds, "Multistart count")->check(CLI::PositiveNumber);
  app->add_option("--tol", o.tol, "Residual tolerance")->check(CLI::PositiveNumber);
  app->add_option("--rng", o.rng, "Solver rng seed");
  app->add_option("--max-iter", o.max_iter, "Iterations per start")->check(CLI::PositiveNumber);
  app->add_option("--dedup-eps", o.dedup_eps, "Ensemble distance treated as equal");
  app->add_option("--pin-grid", o.pin_grid, "Grid size for pinned parameters");
  app->add_flag("--serial", o.serial, "Disable the OpenMP multistart");
}

SolverConfig solver_config(const SearchOpts& o) {
  SolverConfig c;
  c.tol = o.tol;
  c.seeds = o.seeds;
  c.max_iter = o.max_iter;
  c.rng_seed = o.rng;
  c.dedup_eps = o.dedup_eps;
  c.pin_grid = o.pin_grid;
  c.execution = o.serial ? Execution::Serial : Execution::Parallel;
  return c;
}

TransitionGraph graph_for(const SearchOpts& o) {
  if (o.graph == "full") return TransitionGraph::full(o.k);
  return TransitionGraph::cyclic(o.k);
}

std::vector<int> parse_axes(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "bad axis list '" + s + "'");
    }
  }
  return out;
}

bool is_index(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::vector<InvariantSubspace> all_subspaces(const BlochModel& bm) {
  return find_invariant_subspaces(bm, 1, bm.coherence_dim() - 1);
}

// One explicit subspace from "<index>" or "axes:i,j".
InvariantSubspace pick_subspace(const BlochModel& bm, const std::string& sel) {
  if (sel.rfind("axes:", 0) == 0) {
    std::vector<int> axes = parse_axes(sel.substr(5));
    RMatrix span = RMatrix::Zero(bm.coherence_dim(), static_cast<Eigen::Index>(axes.size()));
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (axes[i] < 0 || axes[i] >= bm.coherence_dim())
        throw Error(ErrorKind::InvalidConfig, "axis " + std::to_string(axes[i]) + " out of range");
      span(axes[i], static_cast<Eigen::Index>(i)) = 1.0;
    }
    return make_subspace(bm, span, sel);
  }
  if (is_index(sel)) {
    auto subs = all_subspaces(bm);
    const auto i = std::stoul(sel);
    if (i >= subs.size())
      throw Error(ErrorKind::InvalidConfig,
                  "subspace index " + sel + " out of range (" + std::to_string(subs.size()) + " found)");
    return subs[i];
  }
  throw Error(ErrorKind::InvalidConfig, "--subspace expects none, auto, an index or axes:i,j,...");
}

std::vector<RMatrix> family_maps(const BlochModel& bm, const InvariantSubspace* sub) {
  if (!sub) return {};
  return rotation_images(bm, sub->basis_i0);
}

struct Outcome {
  SolutionSet set;
  json structures = json::array();
  std::vector<std::string> notes;
};

bool within_graph(const Ensemble& e, const TransitionGraph& g) {
  for (int j = 0; j < e.size(); ++j)
    for (int k = 0; k < e.size(); ++k)
      if (j != k && e.kappa(j, k) > 0.0 && !g.contains(j, k)) return false;
  return true;
}

std::vector<std::vector<int>> candidate_perms(int k) {
  std::vector<int> p(k);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  if (k <= 5) {
    do out.push_back(p);
    while (std::next_permutation(p.begin(), p.end()));
  } else {
    out.push_back(p);
    std::vector<int> shift(k);
    for (int i = 0; i < k; ++i) shift[i] = (i + 1) % k;
    out.push_back(shift);
  }
  return out;
}

json status_counts(const SolutionSet& s) {
  std::map<std::string, int> m;
  for (const auto& d : s.diagnostics) m[d.status]++;
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

Outcome run_search(const BlochModel& bm, const SearchOpts& o, std::ostream& err) {
  Outcome out;
  const SolverConfig cfg = solver_config(o);
  const double scale = norm2(bm.l0);

  const bool real_sub = o.subspace != "none";
  const int min_k = heuristic_min_k(bm.dim(), real_sub);
  if (o.k < min_k) {
    std::string w = "K=" + std::to_string(o.k) + " is below heuristic_min_k(D=" + std::to_string(bm.dim()) +
                    (real_sub ? ", redit" : ", qudit") + ")=" + std::to_string(min_k) + "; searching anyway";
    err << "warning: " << w << "\n";
    out.notes.push_back(w);
  }

  std::vector<WignerSymmetry> syms;
  if (o.wigner == "auto") syms = find_wigner_symmetries(bm);

  // A continuous symmetry reduces the problem to the linear rate equations.
  if (std::any_of(syms.begin(), syms.end(), [](const WignerSymmetry& w) { return w.generator.has_value(); })) {
    SolutionSet fam = solve_wigner_family(bm, o.k);
    SolutionSet kept;
    const TransitionGraph g = graph_for(o);
    for (std::size_t i = 0; i < fam.ensembles.size(); ++i) {
      if (o.graph != "auto" && !within_graph(fam.ensembles[i], g)) continue;
      kept.ensembles.push_back(fam.ensembles[i]);
      kept.family_tags.push_back(i < fam.family_tags.size() ? fam.family_tags[i] : "");
    }
    kept.notes = fam.notes;
    if (kept.ensembles.empty() && !fam.ensembles.empty())
      kept.notes.push_back("family solutions exist but none fits the " + o.graph + " graph");
    out.structures.push_back({{"structure", "wigner-family"}, {"found", kept.ensembles.size()}});
    out.set = std::move(kept);
    return out;
  }

  struct Choice {
    std::optional<InvariantSubspace> sub;
  };
  std::vector<std::vector<Choice>> tiers;  // searched in order, stop at first success
  if (o.subspace == "none") {
    tiers.push_back({Choice{}});
  } else if (o.subspace == "auto") {
    auto subs = all_subspaces(bm);
    std::map<int, std::vector<Choice>> by_n;
    for (auto& s : subs) by_n[s.n()].push_back(Choice{s});
    for (auto& [n, v] : by_n) tiers.push_back(v);
    tiers.push_back({Choice{}});
  } else {
    tiers.push_back({Choice{pick_subspace(bm, o.subspace)}});
  }

  const TransitionGraph g = graph_for(o);
  for (const auto& tier : tiers) {
    std::vector<Ensemble> found;
    std::vector<RMatrix> family;
    for (const auto& choice : tier) {
      const InvariantSubspace* sub = choice.sub ? &*choice.sub : nullptr;
      std::vector<RMatrix> fam = family_maps(bm, sub);

      struct Task {
        ConstraintSystem cs;
        json desc;
      };
      std::vector<Task> tasks;
      if (syms.empty()) {
        tasks.push_back({sub ? build_subspace_reduced(bm, *sub, o.k, g) : build_full(bm, o.k, g),
                         {{"structure", sub ? "subspace" : "full"}}});
      } else {
        for (const auto& w : syms) {
          if (sub && !check_joint(*sub, w, bm).subspace_compatible()) continue;
          for (const auto& perm : candidate_perms(o.k)) {
            try {
              ConstraintSystem cs = sub ? build_joint(bm, *sub, w, perm, o.k, g)
                                        : build_wigner_reduced(bm, w, perm, o.k, g);
              tasks.push_back({std::move(cs), {{"structure", sub ? "joint" : "wigner"}, {"symmetry", w.tag}, {"perm", perm}}});
            } catch (const Error&) {
            }
          }
        }
      }
      for (auto& t : tasks) {
        if (sub) t.desc["subspace"] = sub->label;
        t.desc["n_params"] = t.cs.n_params();
        t.desc["n_constraints"] = t.cs.n_constraints();
        if (!t.cs.consistent()) {
          t.desc["found"] = 0;
          t.desc["note"] = t.cs.note();
          out.structures.push_back(t.desc);
          continue;
        }
        SolverConfig c = cfg;
        c.family = fam;
        SolutionSet s = solve_numeric(t.cs, c);
        t.desc["found"] = s.ensembles.size();
        t.desc["starts"] = status_counts(s);
        out.structures.push_back(t.desc);
        for (auto& e : s.ensembles) found.push_back(std::move(e));
        for (auto& n : s.notes) out.notes.push_back(std::move(n));
      }
      family.insert(family.end(), fam.begin(), fam.end());
    }
    if (!found.empty()) {
      out.set.ensembles = dedup(found, o.dedup_eps, scale, family);
      canonical_sort(out.set.ensembles);
      out.set.family_tags.assign(out.set.ensembles.size(), "");
      return out;
    }
  }
  return out;
}

json search_config(const SearchOpts& o) {
  return {{"k", o.k},          {"graph", o.graph},     {"subspace", o.subspace},   {"wigner_reduce", o.wigner},
          {"seeds", o.seeds},  {"tol", o.tol},         {"rng_seed", o.rng},        {"max_iter", o.max_iter},
          {"dedup_eps", o.dedup_eps}, {"pin_grid", o.pin_grid}};
}

json solutions_json(const Outcome& oc, const BlochModel& bm) {
  json ens = json::array();
  for (std::size_t i = 0; i < oc.set.ensembles.size(); ++i) {
    json e = ensemble_json(oc.set.ensembles[i], bm.basis);
    e["verification"] = verification_json(verify(bm, oc.set.ensembles[i]));
    if (i < oc.set.family_tags.size() && !oc.set.family_tags[i].empty()) e["family_tag"] = oc.set.family_tags[i];
    ens.push_back(e);
  }
  json notes = oc.notes;
  for (const auto& n : oc.set.notes) notes.push_back(n);
  return {{"count", oc.set.ensembles.size()}, {"ensembles", ens}, {"structures", oc.structures}, {"notes", notes}};
}

// ---------------------------------------------------------------- plotdata

// +1 / -1 for the sense of the dominant cycle about the axis normal to the
// members' plane, 0 when undefined.
int cycling_direction(const Ensemble& e) {
  const int k = e.size();
  if (k < 3 || e.states[0].size() != 3) return 0;
  std::vector<int> order{0};
  std::vector<bool> seen(k, false);
  seen[0] = true;
  for (int step = 1; step < k; ++step) {
    int cur = order.back(), best = -1;
    for (int j = 0; j < k; ++j)
      if (!seen[j] && (best < 0 || e.kappa(j, cur) > e.kappa(best, cur))) best = j;
    if (e.kappa(best, cur) <= 0.0) return 0;
    seen[best] = true;
    order.push_back(best);
  }
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& x : e.states) c += x;
  c /= k;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  for (int i = 0; i < k; ++i) {
    Eigen::Vector3d a = e.states[order[i]] - c, b = e.states[order[(i + 1) % k]] - c;
    n += a.cross(b);
  }
  Eigen::Index axis = 0;
  n.cwiseAbs().maxCoeff(&axis);
  if (std::abs(n(axis)) < 1e-12) return 0;
  return n(axis) > 0 ? 1 : -1;
}

std::string plot_csv(const std::string& fig, const std::vector<Ensemble>& ens, const RVector& x_ss,
                     const std::vector<int>& indices) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "figure,ensemble,kind,member,from,to,weight,direction";
  for (Eigen::Index i = 0; i < x_ss.size(); ++i) s << ",x" << (i + 1);
  s << "\n";
  auto coords = [&](const RVector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) s << "," << v(i);
    s << "\n";
  };
  for (std::size_t n = 0; n < ens.size(); ++n) {
    const Ensemble& e = ens[n];
    const int id = indices[n];
    const int dir = cycling_direction(e);
    for (int k = 0; k < e.size(); ++k) {
      s << fig << "," << id << ",member," << k << ",,," << e.occupations(k) << "," << dir;
      coords(e.states[k]);
    }
    for (int k = 0; k < e.size(); ++k)
      for (int j = 0; j < e.size(); ++j)
        if (j != k && e.kappa(j, k) > 0.0) {
          s << fig << "," << id << ",transition,," << k << "," << j << "," << e.kappa(j, k) << "," << dir;
          coords(e.states[j] - e.states[k]);
        }
    s << fig << "," << id << ",steady_state,,,,1," << dir;
    coords(x_ss);
  }
  return s.str();
}

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"fig1a", "fig1b", "fig1c", "fig2", "fig3", "fig4a", "fig4b"};
  return ids;
}

// Default data when no bundle is given.
std::pair<std::vector<Ensemble>, RVector> figure_default(const std::string& fig) {
  if (fig.rfind("fig1", 0) == 0 || fig == "fig2") {
    BlochModel bm = vectorize(catalog::resonance_fluorescence(0.18, 1.0));
    if (fig == "fig2") {
      SolverConfig cfg;
      return {solve_numeric(build_full(bm, 3, TransitionGraph::cyclic(3)), cfg).ensembles, bm.x_ss};
    }
    SolutionSet s = analytic_k2(bm);
    const std::size_t i = static_cast<std::size_t>(fig[4] - 'a');
    std::vector<Ensemble> one;
    if (i < s.ensembles.size()) one.push_back(s.ensembles[i]);
    return {one, bm.x_ss};
  }
  BlochModel bm = vectorize(catalog::absorption_emission(0.05, 1.0));
  if (fig == "fig3") {
    RMatrix span = RMatrix::Zero(3, 2);
    span(0, 0) = 1.0;
    span(2, 1) = 1.0;
    InvariantSubspace sub = make_subspace(bm, span, "v=0");
    SolverConfig cfg;
    cfg.family = rotation_images(bm, span);
    return {solve_numeric(build_subspace_reduced(bm, sub, 3, TransitionGraph::cyclic(3)), cfg).ensembles, bm.x_ss};
  }
  const int k = fig == "fig4a" ? 3 : 4;
  return {solve_wigner_family(bm, k).ensembles, bm.x_ss};
}

// ---------------------------------------------------------------- run

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (const char* t = std::getenv("PRE_FORGE_THREADS")) {
    const int n = std::atoi(t);
    if (n > 0) omp_set_num_threads(n);
  }
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    // malformed ensemble, scheme or bundle input
    err << "error [invalid input]: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

namespace {

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pre-forge: physically realizable ensembles of Markovian open quantum systems", "pre-forge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  SearchOpts so;

  auto* analyze = app.add_subcommand("analyze", "Coherence-vector model, spectrum, subspaces and symmetries");
  add_common(analyze, common);

  auto* search = app.add_subcommand("search", "Find PREs of size K");
  add_common(search, common);
  add_search_options(search, so);

  std::string ens_path;
  int ens_index = 0;
  double verify_tol = 1e-8;
  auto* verify_cmd = app.add_subcommand("verify", "Check an ensemble against the PRE conditions");
  add_common(verify_cmd, common);
  verify_cmd->add_option("--ensemble,-e", ens_path, "Ensemble JSON or bundle")->required();
  verify_cmd->add_option("--index", ens_index, "Ensemble index inside a bundle");
  verify_cmd->add_option("--tol", verify_tol, "Residual tolerance");

  int detectors = 0;
  SynthesisOptions syn;
  int syn_rng = 3;
  auto* scheme = app.add_subcommand("scheme", "Synthesize an adaptive measurement scheme");
  add_common(scheme, common);
  scheme->add_option("--ensemble,-e", ens_path, "Ensemble JSON or bundle")->required();
  scheme->add_option("--index", ens_index, "Ensemble index inside a bundle");
  scheme->add_option("--detectors,-m", detectors, "Detector count M (default L)");
  scheme->add_option("--starts", syn.starts, "Optimizer starts per member");
  scheme->add_option("--rng", syn_rng, "Synthesis rng seed");

  std::string scheme_path, events_path;
  TrajectoryConfig tc;
  tc.n_jumps = 100000;
  int n_traj = 0;
  auto* simulate_cmd = app.add_subcommand("simulate", "Quantum-jump simulation of a scheme");
  add_common(simulate_cmd, common);
  simulate_cmd->add_option("--ensemble,-e", ens_path, "Ensemble JSON or bundle")->required();
  simulate_cmd->add_option("--index", ens_index, "Ensemble index inside a bundle");
  simulate_cmd->add_option("--scheme", scheme_path, "Scheme JSON or bundle (synthesized when absent)");
  simulate_cmd->add_option("--jumps", tc.n_jumps, "Inter-member jumps after burn-in");
  simulate_cmd->add_option("--dt", tc.dt, "Time step (0 = automatic)");
  simulate_cmd->add_option("--rng", tc.rng_seed, "Trajectory rng seed");
  simulate_cmd->add_option("--burn-in", tc.burn_in, "Jumps discarded before statistics");
  simulate_cmd->add_option("--events", events_path, "Write the jump log as CSV");
  simulate_cmd->add_option("--trajectories", n_traj, "Also check the unconditional average with N trajectories");

  std::string scan_param;
  double scan_from = 0, scan_to = 0, scan_step = 0;
  auto* scan = app.add_subcommand("scan", "PRE count over a parameter grid (CSV)");
  add_common(scan, common);
  add_search_options(scan, so);
  scan->add_option("--scan", scan_param, "Parameter to vary")->required();
  scan->add_option("--from", scan_from, "Grid start")->required();
  scan->add_option("--to", scan_to, "Grid end")->required();
  scan->add_option("--step", scan_step, "Grid step")->required()->check(CLI::PositiveNumber);

  std::string figure, bundle_path;
  auto* plot = app.add_subcommand("plotdata", "Per-figure CSV for external plotting");
  plot->add_option("--figure,-f", figure, "fig1a fig1b fig1c fig2 fig3 fig4a fig4b")->required();
  plot->add_option("--bundle,-b", bundle_path, "Take ensembles from this bundle");
  plot->add_option("--out,-o", common.out, "Write CSV here instead of stdout");

  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a bundle");
  rerun->add_option("bundle", bundle_path, "Bundle JSON")->required();
  rerun->add_option("--out,-o", common.out, "Write output here instead of stdout");

  std::string cat_name;
  auto* cat = app.add_subcommand("catalog", "List or print the built-in ME specs");
  cat->add_option("name", cat_name, "Entry to print");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? 0 : kExitUsage;
  }

  if (*cat) {
    if (cat_name.empty()) {
      for (const auto& n : catalog_names()) out << n << "\n";
    } else {
      out << load_spec(cat_name).document.dump(2) << "\n";
    }
    return 0;
  }

  if (*rerun) {
    json b = read_json_file(bundle_path);
    if (!b.contains("config") || !b["config"].contains("argv"))
      throw Error(ErrorKind::InvalidConfig, bundle_path + " carries no config.argv");
    std::vector<std::string> again = b["config"]["argv"].get<std::vector<std::string>>();
    if (!common.out.empty()) {
      again.push_back("--out");
      again.push_back(common.out);
    }
    return dispatch(again, out, err);
  }

  if (*plot) {
    if (std::find(figure_ids().begin(), figure_ids().end(), figure) == figure_ids().end())
      throw Error(ErrorKind::InvalidConfig, "unknown figure id '" + figure + "'");
    std::vector<Ensemble> ens;
    std::vector<int> idx;
    RVector x_ss;
    if (!bundle_path.empty()) {
      json b = read_json_file(bundle_path);
      x_ss = real_vector(b.at("model").at("x_ss"));
      const OperatorBasis basis = build_basis(b.at("model").at("dim").get<int>());
      const json list = b.contains("solutions") ? b["solutions"]["ensembles"] : json::array();
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (figure.rfind("fig1", 0) == 0 && static_cast<int>(i) != figure[4] - 'a') continue;
        ens.push_back(ensemble_from_json(list[i], basis));
        idx.push_back(static_cast<int>(i));
      }
    } else {
      auto [e, x] = figure_default(figure);
      ens = std::move(e);
      x_ss = x;
      idx.resize(ens.size());
      std::iota(idx.begin(), idx.end(), figure.rfind("fig1", 0) == 0 ? figure[4] - 'a' : 0);
    }
    emit(plot_csv(figure, ens, x_ss, idx), common.out, out);
    return 0;
  }

  // Everything below needs a model. Keep the recorded argv free of --out so
  // rerun can redirect.
  std::vector<std::string> recorded;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if ((args[i] == "--out" || args[i] == "-o") && i + 1 < args.size()) {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    recorded.push_back(args[i]);
  }

  if (*scan) {
    if (so.subspace == "auto" || so.wigner == "auto")
      throw Error(ErrorKind::InvalidConfig, "scan needs one fixed structure: use --subspace none|<index>|axes:... and --wigner-reduce none");
    Loaded base = load(common);
    if (!base.values.count(scan_param))
      throw Error(ErrorKind::InvalidConfig, "spec declares no parameter '" + scan_param + "'");
    std::vector<double> grid;
    const long n = std::lround(std::floor((scan_to - scan_from) / scan_step + 1e-9));
    for (long i = 0; i <= n; ++i) grid.push_back(scan_from + static_cast<double>(i) * scan_step);
    auto factory = [&](double v) {
      auto values = base.values;
      values[scan_param] = v;
      BlochModel bm = vectorize(build_master_equation(base.spec, values));
      const TransitionGraph g = graph_for(so);
      if (so.subspace == "none") return ScanSystem{build_full(bm, so.k, g), {}};
      InvariantSubspace sub = pick_subspace(bm, so.subspace);
      return ScanSystem{build_subspace_reduced(bm, sub, so.k, g), rotation_images(bm, sub.basis_i0)};
    };
    ScanResult r = scan_existence(factory, grid, solver_config(so));
    std::ostringstream s;
    s << std::setprecision(12);
    s << "kind,parameter,value,count,note\n";
    for (const auto& row : r.rows) s << "point," << scan_param << "," << row.value << "," << row.count << "," << row.note << "\n";
    for (double t : r.thresholds) s << "threshold," << scan_param << "," << t << ",,count changes\n";
    emit(s.str(), common.out, out);
    return 0;
  }

  Loaded l = load(common);
  for (const auto& w : l.me.warnings()) err << "warning: " << w << "\n";

  if (*analyze) {
    json b = base_bundle("analyze", recorded, l);
    Spectrum sp = eig_full(l.bm.l0);
    b["model"] = model_json(l.bm, sp);
    json subs = json::array();
    for (const auto& s : all_subspaces(l.bm)) subs.push_back(subspace_json(s));
    b["subspaces"] = subs;
    json syms = json::array();
    for (const auto& w : find_wigner_symmetries(l.bm)) syms.push_back(symmetry_json(w, certify_wigner(l.bm, w.t0)));
    b["symmetries"] = syms;
    b["heuristic_min_k"] = {{"qudit", heuristic_min_k(l.bm.dim(), false)},
                            {"redit", heuristic_min_k(l.bm.dim(), true)}};
    print_matrix(err, "L0", l.bm.l0);
    print_matrix(err, "b", l.bm.b);
    print_matrix(err, "x_ss", l.bm.x_ss);
    err << "eigenvalues:";
    for (const auto& c : sp.clusters)
      err << " " << fmt(c.value.real()) << (c.value.imag() >= 0 ? "+" : "") << fmt(c.value.imag()) << "i"
          << (c.algebraic > 1 ? " (x" + std::to_string(c.algebraic) + ")" : "") << (c.defective() ? " (defective)" : "");
    err << "\nL0 " << (sp.defective() ? "is" : "is not") << " defective\n";
    emit(b, common.out, out);
    return 0;
  }

  if (*search) {
    json b = base_bundle("search", recorded, l);
    b["config"]["search"] = search_config(so);
    Outcome oc = run_search(l.bm, so, err);
    b["model"] = model_json(l.bm, eig_full(l.bm.l0));
    b["solutions"] = solutions_json(oc, l.bm);
    err << "search: " << oc.set.ensembles.size() << " PRE(s) for K=" << so.k << "\n";
    emit(b, common.out, out);
    return oc.set.ensembles.empty() ? kExitNotFound : 0;
  }

  const Ensemble ens = ensemble_from_json(select_ensemble(read_json_file(ens_path), ens_index), l.bm.basis);

  if (*verify_cmd) {
    json b = base_bundle("verify", recorded, l);
    VerificationReport r = verify(l.bm, ens, verify_tol);
    b["model"] = model_json(l.bm, eig_full(l.bm.l0));
    b["ensemble"] = ensemble_json(ens, l.bm.basis);
    b["verification"] = verification_json(r);
    err << "verify: " << (r.pass ? "PASS" : "FAIL") << " max_residual=" << fmt(r.max_residual)
        << " purity_defect=" << fmt(r.max_purity_defect) << " min_rate=" << fmt(r.min_rate)
        << " connected=" << (r.connected ? "yes" : "no") << "\n";
    emit(b, common.out, out);
    return r.pass ? 0 : kExitNotFound;
  }

  if (*scheme) {
    json b = base_bundle("scheme", recorded, l);
    syn.rng_seed = static_cast<std::uint64_t>(syn_rng);
    const int m = detectors > 0 ? detectors : l.me.num_lindblads();
    b["config"]["scheme"] = {{"detectors", m}, {"starts", syn.starts}, {"rng_seed", syn.rng_seed}};
    AdaptiveScheme s = synthesize(l.me, ens, m, syn);
    SchemeReport r = check_scheme(l.me, ens, s);
    b["model"] = model_json(l.bm, eig_full(l.bm.l0));
    b["ensemble"] = ensemble_json(ens, l.bm.basis);
    b["scheme"] = scheme_json(s);
    b["scheme_report"] = scheme_report_json(r);
    for (int k = 0; k < s.size(); ++k) {
      err << "member " << k << ": beta =";
      for (Eigen::Index i = 0; i < s.settings[k].beta.size(); ++i) {
        const cplx v = s.settings[k].beta(i);
        err << " " << fmt(v.real()) << (v.imag() >= 0 ? "+" : "") << fmt(v.imag()) << "i";
      }
      err << "\n";
    }
    err << "scheme: " << (r.pass ? "PASS" : "FAIL") << "\n";
    emit(b, common.out, out);
    return r.pass ? 0 : kExitNotFound;
  }

  if (*simulate_cmd) {
    json b = base_bundle("simulate", recorded, l);
    AdaptiveScheme s;
    if (!scheme_path.empty()) {
      s = scheme_from_json(select_scheme(read_json_file(scheme_path)));
    } else {
      syn.execution = Execution::Serial;
      s = synthesize(l.me, ens, l.me.num_lindblads(), syn);
    }
    tc.log_events = !events_path.empty();
    b["config"]["simulate"] = {{"jumps", tc.n_jumps}, {"dt", tc.dt}, {"rng_seed", tc.rng_seed},
                               {"burn_in", tc.burn_in}, {"trajectories", n_traj}};
    TrajectoryStats st = simulate(l.me, s, ens, tc);
    b["ensemble"] = ensemble_json(ens, l.bm.basis);
    b["scheme"] = scheme_json(s);
    b["trajectory"] = trajectory_json(st);
    if (tc.log_events) {
      std::ostringstream csv;
      csv << std::setprecision(12) << "time,channel,from,to\n";
      for (const auto& e : st.events) csv << e.t << "," << e.channel << "," << e.from << "," << e.to << "\n";
      emit(csv.str(), events_path, out);
    }
    bool ok = true;
    if (n_traj > 0) {
      UnconditionalConfig uc;
      uc.n_trajectories = n_traj;
      uc.rng_seed = tc.rng_seed;
      UnconditionalReport ur = unconditional_check(l.me, s, uc);
      b["unconditional"] = unconditional_json(ur);
      ok = ur.pass;
      err << "unconditional: max trace distance " << fmt(ur.max_distance) << (ur.pass ? " PASS" : " FAIL") << "\n";
    }
    err << "simulate: " << st.n_jumps << " jumps, occupancy";
    for (Eigen::Index i = 0; i < st.occupancy.size(); ++i) err << " " << fmt(st.occupancy(i));
    err << " (expected";
    for (Eigen::Index i = 0; i < ens.occupations.size(); ++i) err << " " << fmt(ens.occupations(i));
    err << "), max drift " << fmt(st.max_state_drift) << "\n";
    emit(b, common.out, out);
    return ok ? 0 : kExitNotFound;
  }

  return kExitUsage;
}

}  // namespace

}  // namespace preforge::cli
