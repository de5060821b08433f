#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "preforge/model.hpp"

namespace preforge::cli {

// Parsed master-equation spec. Matrix entries stay symbolic until bind().
struct SpecFile {
  std::string source;  // path or catalog name
  std::string name;
  std::string description;
  int dim = 0;
  std::map<std::string, std::optional<double>> parameters;  // nullopt = must be supplied
  nlohmann::json document;
};

SpecFile parse_spec(const std::string& text, const std::string& source);

// Accepts a path, or a catalog name with or without ".json".
SpecFile load_spec(const std::string& path_or_name);

std::vector<std::string> catalog_names();

// "name=value" assignments override declared defaults. Unknown names are a
// usage error; names left without a value raise unbound-parameter.
std::map<std::string, double> bind_parameters(const SpecFile& spec,
                                              const std::vector<std::string>& assignments);

MasterEquation build_master_equation(const SpecFile& spec, const std::map<std::string, double>& values);

}  // namespace preforge::cli
