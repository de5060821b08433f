#pragma once

#include <cstdint>
#include <functional>

#include "preforge/types.hpp"

namespace preforge {

// Fills r (and J when non-null) at p.
using ResidualFn = std::function<void(const RVector& p, RVector& r, RMatrix* jac)>;

struct LmOptions {
  int max_iter = 200;        // residual evaluations
  double tol = 1e-10;        // stop once max |r_i| <= tol
  double step_tol = 1e-15;   // relative step tolerance
  double max_param = 1e6;    // abort if parameters blow up
};

struct LmResult {
  RVector params;
  double max_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Levenberg-Marquardt via Eigen's MINPACK port; converged means max |r_i| <= tol.
LmResult levenberg_marquardt(const ResidualFn& f, RVector p0, const LmOptions& opt);

// Central-difference Jacobian wrapper around a residual-only function.
ResidualFn with_numeric_jacobian(std::function<RVector(const RVector&)> f, double h = 1e-7);

// splitmix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace preforge
