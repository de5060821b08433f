#pragma once

#include <random>

namespace preforge {

template <class Rng>
CVector random_state(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CVector psi(dim);
  for (int i = 0; i < dim; ++i) psi(i) = cplx(n(rng), n(rng));
  return psi / psi.norm();
}

template <class Rng>
CMatrix random_density(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = cplx(n(rng), n(rng));
  CMatrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

}  // namespace preforge
