#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pft/autodiff.hpp"

namespace pft::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;  // flat index into the checked entries
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Scalar-valued function of one input, built on the supplied tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Central-difference check of d f / d x over every entry of x:
//   max_i |analytic_i - cd_i| / max(|analytic_i|, |cd_i|, 1e-8)
// Throws NumericalError if f is non-finite anywhere it is evaluated.
GradCheckResult grad_check_detailed(const ScalarFn& f, const Tensor& x, double eps = 1e-5);
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// Same check against parameters bound with Tape::param. `loss` must rebuild
// its graph from the current parameter values on every call. When
// `entries_per_tensor` is nonzero, that many entries per tensor are drawn
// (seeded) instead of checking all of them.
GradCheckResult grad_check_params(const std::function<Var(Tape&)>& loss, std::span<Tensor* const> params,
                                  double eps = 1e-5, std::size_t entries_per_tensor = 0,
                                  std::uint64_t seed = 0);

double relative_error(double analytic, double numeric);

}  // namespace pft::ad
