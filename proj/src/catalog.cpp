#include "preforge/catalog.hpp"

#include <cmath>

namespace preforge::catalog {

namespace {

CMatrix lowering() {
  CMatrix s = CMatrix::Zero(2, 2);
  s(1, 0) = 1.0;
  return s;
}

}  // namespace

MasterEquation resonance_fluorescence(double omega, double gamma) {
  CMatrix sx = CMatrix::Zero(2, 2);
  sx(0, 1) = 1.0;
  sx(1, 0) = 1.0;
  return MasterEquation(0.5 * omega * sx, {kI * std::sqrt(gamma) * lowering()});
}

MasterEquation absorption_emission(double gamma_plus, double gamma_minus) {
  return MasterEquation(CMatrix::Zero(2, 2),
                        {std::sqrt(gamma_minus) * lowering(), std::sqrt(gamma_plus) * lowering().adjoint()});
}

std::vector<std::string> names() { return {"resonance_fluorescence", "absorption_emission"}; }

}  // namespace preforge::catalog
