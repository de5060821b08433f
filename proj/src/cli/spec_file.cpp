#include "preforge/cli/spec_file.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "catalog_data.hpp"
#include "preforge/cli/expression.hpp"
#include "preforge/error.hpp"

namespace preforge::cli {

using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& source, const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::Parse, source + ": field '" + field + "': " + msg);
}

const std::map<std::string, const char*>& builtins() {
  static const std::map<std::string, const char*> m = {
      {"resonance_fluorescence", embedded::kResonanceFluorescence},
      {"absorption_emission", embedded::kAbsorptionEmission}};
  return m;
}

void check_matrix_shape(const json& m, int dim, const std::string& source, const std::string& field) {
  if (!m.is_array() || static_cast<int>(m.size()) != dim)
    field_error(source, field, "expected " + std::to_string(dim) + " rows");
  for (int r = 0; r < dim; ++r) {
    const json& row = m[r];
    const std::string rf = field + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      field_error(source, rf, "expected " + std::to_string(dim) + " entries");
    for (int c = 0; c < dim; ++c) {
      const json& e = row[c];
      const std::string ef = rf + "[" + std::to_string(c) + "]";
      const bool scalar = e.is_number() || e.is_string();
      const bool pair = e.is_array() && e.size() == 2 && (e[0].is_number() || e[0].is_string()) &&
                        (e[1].is_number() || e[1].is_string());
      if (!scalar && !pair) field_error(source, ef, "expected [re, im] with numbers or expressions");
    }
  }
}

double scalar(const json& v, const std::map<std::string, double>& values, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  try {
    return evaluate(v.get<std::string>(), values);
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
}

CMatrix bind_matrix(const json& m, int dim, const std::map<std::string, double>& values, const std::string& where) {
  CMatrix out(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) {
      const json& e = m[r][c];
      const std::string ef = where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
      if (e.is_array())
        out(r, c) = cplx(scalar(e[0], values, ef), scalar(e[1], values, ef));
      else
        out(r, c) = scalar(e, values, ef);
    }
  }
  return out;
}

}  // namespace

SpecFile parse_spec(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, source + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Parse, source + ": top level must be an object");

  SpecFile spec;
  spec.source = source;
  if (doc.contains("schema_version") && doc["schema_version"] != 1)
    field_error(source, "schema_version", "unsupported version " + doc["schema_version"].dump());
  if (!doc.contains("dim") || !doc["dim"].is_number_integer() || doc["dim"].get<int>() < 2)
    field_error(source, "dim", "expected an integer >= 2");
  spec.dim = doc["dim"].get<int>();

  if (doc.contains("metadata")) {
    const json& md = doc["metadata"];
    if (!md.is_object()) field_error(source, "metadata", "expected an object");
    spec.name = md.value("name", "");
    spec.description = md.value("description", "");
  }
  if (spec.name.empty()) spec.name = std::filesystem::path(source).stem().string();

  if (doc.contains("parameters")) {
    const json& ps = doc["parameters"];
    if (!ps.is_object()) field_error(source, "parameters", "expected an object");
    for (auto it = ps.begin(); it != ps.end(); ++it) {
      if (it.value().is_null())
        spec.parameters[it.key()] = std::nullopt;
      else if (it.value().is_number())
        spec.parameters[it.key()] = it.value().get<double>();
      else
        field_error(source, "parameters." + it.key(), "expected a number or null");
    }
  }

  if (!doc.contains("hamiltonian")) field_error(source, "hamiltonian", "missing");
  check_matrix_shape(doc["hamiltonian"], spec.dim, source, "hamiltonian");
  if (!doc.contains("lindblads") || !doc["lindblads"].is_array())
    field_error(source, "lindblads", "expected a list of matrices");
  for (std::size_t l = 0; l < doc["lindblads"].size(); ++l)
    check_matrix_shape(doc["lindblads"][l], spec.dim, source, "lindblads[" + std::to_string(l) + "]");

  spec.document = std::move(doc);
  return spec;
}

std::vector<std::string> catalog_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : builtins()) out.push_back(name);
  return out;
}

SpecFile load_spec(const std::string& path_or_name) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path_or_name)) {
    std::ifstream in(path_or_name);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str(), path_or_name);
  }
  std::string key = fs::path(path_or_name).filename().string();
  if (key.size() > 5 && key.substr(key.size() - 5) == ".json") key.resize(key.size() - 5);
  auto it = builtins().find(key);
  if (it == builtins().end())
    throw Error(ErrorKind::InvalidConfig,
                "spec '" + path_or_name + "' is neither a readable file nor a catalog entry");
  return parse_spec(it->second, key);
}

std::map<std::string, double> bind_parameters(const SpecFile& spec, const std::vector<std::string>& assignments) {
  std::map<std::string, std::optional<double>> vals = spec.parameters;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Error(ErrorKind::InvalidConfig, "--param expects name=value, got '" + a + "'");
    const std::string name = a.substr(0, eq);
    if (!vals.count(name))
      throw Error(ErrorKind::InvalidConfig, "spec " + spec.source + " declares no parameter '" + name + "'");
    std::map<std::string, double> none;
    vals[name] = evaluate(a.substr(eq + 1), none);
  }
  std::map<std::string, double> out;
  for (const auto& [name, v] : vals) {
    if (!v) throw Error(ErrorKind::UnboundParameter, "unbound parameter '" + name + "' (pass --param " + name + "=<value>)");
    out[name] = *v;
  }
  return out;
}

MasterEquation build_master_equation(const SpecFile& spec, const std::map<std::string, double>& values) {
  const json& doc = spec.document;
  CMatrix h = bind_matrix(doc["hamiltonian"], spec.dim, values, "hamiltonian");
  std::vector<CMatrix> ls;
  for (std::size_t l = 0; l < doc["lindblads"].size(); ++l)
    ls.push_back(bind_matrix(doc["lindblads"][l], spec.dim, values, "lindblads[" + std::to_string(l) + "]"));
  return MasterEquation(std::move(h), std::move(ls));
}

}  // namespace preforge::cli
