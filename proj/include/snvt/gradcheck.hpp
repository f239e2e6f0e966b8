#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "snvt/autodiff.hpp"
#include "snvt/params.hpp"

namespace snvt {

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0;
};

struct GradCheckReport {
  double tolerance = 0;
  double epsilon = 0;
  bool pass = false;  // true iff every parameter's max relative error <= tolerance
  double max_rel_error = 0;
  std::vector<ParamCheck> params;
};

// Compares analytic gradients against central finite differences
// (L(p+eps) - L(p-eps)) / (2 eps) on a subsample of each tensor's scalars
// (all of them when the tensor is small). Relative error is
// |a - n| / max(|a|, |n|, 1e-8).
//
// `loss` re-evaluates the objective at the current parameter values; it is
// evaluated twice up front and a DeterminismError is thrown if the two
// values differ. `analytic` runs one backward pass and returns gradients
// keyed by parameter name.
GradCheckReport gradcheck(const std::vector<ParamRef>& params,
                          const std::function<double()>& loss,
                          const std::function<autodiff::GradMap()>& analytic, double eps,
                          double tol, std::uint64_t seed, std::size_t samples_per_tensor = 16);

}  // namespace snvt
