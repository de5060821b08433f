#include "preforge/cli/bundle.hpp"

#include <fstream>

#include "preforge/error.hpp"

namespace preforge::cli {

json to_json(const RVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const RMatrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(RVector(m.row(r).transpose())));
  return a;
}

json to_json(const CVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v(i).real(), v(i).imag()});
  return a;
}

json to_json(const CMatrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(CVector(m.row(r).transpose())));
  return a;
}

RVector real_vector(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "expected a numeric array");
  RVector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

RMatrix real_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Parse, "expected a matrix as a list of rows");
  RMatrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw Error(ErrorKind::Parse, "ragged matrix row " + std::to_string(r));
    m.row(r) = real_vector(j[r]).transpose();
  }
  return m;
}

CVector complex_vector(const json& j) {
  if (!j.is_array()) throw Error(ErrorKind::Parse, "expected an array of [re, im]");
  CVector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_number())
      v(i) = j[i].get<double>();
    else if (j[i].is_array() && j[i].size() == 2)
      v(i) = cplx(j[i][0].get<double>(), j[i][1].get<double>());
    else
      throw Error(ErrorKind::Parse, "entry " + std::to_string(i) + " is not [re, im]");
  }
  return v;
}

CMatrix complex_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Parse, "expected a complex matrix");
  CMatrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    CVector row = complex_vector(j[r]);
    if (row.size() != m.cols()) throw Error(ErrorKind::Parse, "ragged matrix row " + std::to_string(r));
    m.row(r) = row.transpose();
  }
  return m;
}

json model_json(const BlochModel& bm, const Spectrum& spec) {
  json clusters = json::array();
  for (const auto& c : spec.clusters) {
    json vecs = json::array();
    for (const auto& v : c.eigenvectors) vecs.push_back(to_json(v));
    json chains = json::array();
    for (const auto& ch : c.chains) {
      json cj = json::array();
      for (const auto& v : ch) cj.push_back(to_json(v));
      chains.push_back(cj);
    }
    clusters.push_back({{"value", {c.value.real(), c.value.imag()}},
                        {"algebraic", c.algebraic},
                        {"geometric", c.geometric},
                        {"defective", c.defective()},
                        {"eigenvectors", vecs},
                        {"chains", chains}});
  }
  json eig = json::array();
  for (const auto& e : spec.eigenvalues) eig.push_back({e.real(), e.imag()});
  return {{"dim", bm.dim()},
          {"l0", to_json(bm.l0)},
          {"b", to_json(bm.b)},
          {"x_ss", to_json(bm.x_ss)},
          {"rho_ss", to_json(bm.rho_ss())},
          {"eigenvalues", eig},
          {"defective", spec.defective()},
          {"clusters", clusters}};
}

json subspace_json(const InvariantSubspace& s) {
  json j = {{"label", s.label},
            {"n", s.n()},
            {"basis", to_json(s.basis_i0)},
            {"certificate", s.certificate},
            {"witness", to_json(s.witness)},
            {"family", s.family}};
  if (s.family) {
    j["family_generator"] = to_json(s.family_generator);
    j["family_note"] = s.family_note;
  }
  return j;
}

json symmetry_json(const WignerSymmetry& w, const WignerCertificate& c) {
  json j = {{"tag", w.tag},
            {"kind", to_string(w.kind)},
            {"t0", to_json(w.t0)},
            {"certificate",
             {{"orthogonality", c.orthogonality},
              {"commutator", c.commutator},
              {"b_defect", c.b_defect},
              {"xss_defect", c.xss_defect},
              {"min_state_eig", c.min_state_eig},
              {"ok", c.ok}}}};
  if (w.generator) {
    j["generator"] = to_json(*w.generator);
    j["angle"] = w.angle;
  }
  return j;
}

json ensemble_json(const Ensemble& e, const OperatorBasis& basis) {
  json states = json::array();
  for (const auto& x : e.states) states.push_back(to_json(x));
  json kets = json::array();
  for (const auto& v : state_vectors(e, basis)) kets.push_back(to_json(v));
  return {{"k", e.size()},
          {"states", states},
          {"state_vectors", kets},
          {"kappa", to_json(e.kappa)},
          {"occupations", to_json(e.occupations)}};
}

json verification_json(const VerificationReport& r) {
  json members = json::array();
  for (const auto& m : r.members)
    members.push_back({{"residual", m.residual},
                       {"bloch_residual", m.bloch_residual},
                       {"purity_defect", m.purity_defect},
                       {"min_eigenvalue", m.min_eigenvalue}});
  return {{"pass", r.pass},
          {"tol", r.tol},
          {"max_residual", r.max_residual},
          {"max_bloch_residual", r.max_bloch_residual},
          {"max_purity_defect", r.max_purity_defect},
          {"min_eigenvalue", r.min_eigenvalue},
          {"min_rate", r.min_rate},
          {"average_defect", r.average_defect},
          {"connected", r.connected},
          {"occupations", to_json(r.occupations)},
          {"members", members}};
}

json scheme_json(const AdaptiveScheme& s) {
  json members = json::array();
  for (int k = 0; k < s.size(); ++k)
    members.push_back({{"beta", to_json(s.settings[k].beta)},
                       {"s", to_json(s.settings[k].s)},
                       {"routing", s.jump_map[k]}});
  return {{"members", members}};
}

json scheme_report_json(const SchemeReport& r) {
  return {{"pass", r.pass},
          {"eigen_residual", r.eigen_residual},
          {"direction_residual", r.direction_residual},
          {"rate_residual", r.rate_residual},
          {"invariance", r.invariance},
          {"max_beta_sq", r.max_beta_sq},
          {"wlo_bound", r.wlo_bound},
          {"self_loop_rates", r.self_loop_rates}};
}

json trajectory_json(const TrajectoryStats& s) {
  return {{"occupancy", to_json(s.occupancy)},
          {"jump_counts", to_json(s.jump_counts)},
          {"self_loops", to_json(s.self_loops)},
          {"max_state_drift", s.max_state_drift},
          {"n_jumps", s.n_jumps},
          {"time", s.time},
          {"dt", s.dt}};
}

json unconditional_json(const UnconditionalReport& r) {
  return {{"times", r.times},
          {"distances", r.distances},
          {"max_distance", r.max_distance},
          {"n_trajectories", r.n_trajectories},
          {"tolerance", r.tolerance},
          {"pass", r.pass}};
}

Ensemble ensemble_from_json(const json& j, const OperatorBasis& basis) {
  if (!j.is_object() || !j.contains("kappa")) throw Error(ErrorKind::Parse, "ensemble needs 'kappa'");
  std::vector<RVector> states;
  if (j.contains("states")) {
    for (const auto& s : j["states"]) states.push_back(real_vector(s));
  } else if (j.contains("state_vectors")) {
    for (const auto& s : j["state_vectors"]) states.push_back(state_to_bloch(complex_vector(s), basis));
  } else {
    throw Error(ErrorKind::Parse, "ensemble needs 'states' or 'state_vectors'");
  }
  RMatrix kappa = real_matrix(j["kappa"]);
  const int k = static_cast<int>(states.size());
  if (kappa.rows() != k || kappa.cols() != k)
    throw Error(ErrorKind::Shape, "kappa must be " + std::to_string(k) + "x" + std::to_string(k));
  for (const auto& s : states)
    if (s.size() != basis.traceless_count())
      throw Error(ErrorKind::Shape, "state has " + std::to_string(s.size()) + " coordinates, expected " +
                                        std::to_string(basis.traceless_count()));
  return make_ensemble(std::move(states), std::move(kappa), 0.0);
}

AdaptiveScheme scheme_from_json(const json& j) {
  if (!j.contains("members")) throw Error(ErrorKind::Parse, "scheme needs 'members'");
  AdaptiveScheme s;
  for (const auto& m : j["members"]) {
    UnravellingSetting u;
    u.beta = complex_vector(m.at("beta"));
    u.s = complex_matrix(m.at("s"));
    s.settings.push_back(u);
    s.jump_map.push_back(m.at("routing").get<std::vector<int>>());
  }
  return s;
}

json select_ensemble(const json& doc, int index) {
  const json* list = nullptr;
  if (doc.is_array())
    list = &doc;
  else if (doc.contains("solutions") && doc["solutions"].contains("ensembles"))
    list = &doc["solutions"]["ensembles"];
  else if (doc.contains("ensemble"))
    return doc["ensemble"];
  else
    return doc;
  if (index < 0 || index >= static_cast<int>(list->size()))
    throw Error(ErrorKind::InvalidConfig, "ensemble index " + std::to_string(index) + " out of range (" +
                                              std::to_string(list->size()) + " available)");
  return (*list)[index];
}

json select_scheme(const json& doc) {
  if (doc.contains("scheme")) return doc["scheme"];
  return doc;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

}  // namespace preforge::cli
