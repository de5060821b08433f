#pragma once

#include <string>
#include <vector>

#include "preforge/model.hpp"

namespace preforge::catalog {

// Driven two-level emitter: H = (Omega/2) sigma_x, c = i sqrt(gamma) |1><0|.
MasterEquation resonance_fluorescence(double omega, double gamma = 1.0);

// Thermal qubit: c_- = sqrt(gamma_minus) |1><0|, c_+ = sqrt(gamma_plus) |0><1|.
MasterEquation absorption_emission(double gamma_plus, double gamma_minus = 1.0);

std::vector<std::string> names();

}  // namespace preforge::catalog
