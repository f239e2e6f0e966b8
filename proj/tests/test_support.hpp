#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "snvt/rng.hpp"
#include "snvt/tensor.hpp"

namespace snvt::testing {

// Thrown by property helpers; carries a human-readable description of the
// first violated case.
struct PropertyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void prop_require(bool condition, const std::string& message) {
  if (!condition) throw PropertyFailure(message);
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Lcg64& rng, double lo = -2.0,
                            double hi = 2.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<real_t>(rng.uniform(lo, hi));
  return t;
}

// Central finite difference of f with respect to one scalar slot.
inline double fd_derivative(const std::function<double()>& f, real_t& scalar, double eps) {
  const real_t saved = scalar;
  scalar = saved + static_cast<real_t>(eps);
  const double plus = f();
  scalar = saved - static_cast<real_t>(eps);
  const double minus = f();
  scalar = saved;
  return (plus - minus) / (2.0 * eps);
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace snvt::testing
