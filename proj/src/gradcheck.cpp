#include "snvt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "snvt/error.hpp"
#include "snvt/rng.hpp"

namespace snvt {

GradCheckReport gradcheck(const std::vector<ParamRef>& params,
                          const std::function<double()>& loss,
                          const std::function<autodiff::GradMap()>& analytic, double eps,
                          double tol, std::uint64_t seed, std::size_t samples_per_tensor) {
  if (eps <= 0) throw ContractError("gradcheck: eps must be > 0");
  if (tol <= 0) throw ContractError("gradcheck: tol must be > 0");
  if (samples_per_tensor == 0) throw ContractError("gradcheck: need at least one sample per tensor");

  const double first = loss();
  const double second = loss();
  if (first != second) {
    throw DeterminismError("gradcheck: loss is not deterministic (" + std::to_string(first) +
                           " vs " + std::to_string(second) + ")");
  }

  autodiff::GradMap grads = analytic();

  GradCheckReport report;
  report.tolerance = tol;
  report.epsilon = eps;

  Lcg64 rng(seed);
  for (const auto& param : params) {
    auto grad_it = grads.find(param.name);
    if (grad_it == grads.end()) {
      throw ContractError("gradcheck: analytic gradients carry no entry for '" + param.name + "'");
    }
    const Tensor& grad = grad_it->second;
    Tensor& tensor = *param.tensor;
    const std::size_t n = tensor.size();

    // Deterministic stride-based subsample: a seeded offset, then every
    // (n / k)-th scalar. Small tensors are checked in full.
    std::vector<std::size_t> indices;
    if (n <= samples_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) indices.push_back(i);
    } else {
      const std::size_t stride = n / samples_per_tensor;
      const std::size_t offset = rng.below(stride);
      for (std::size_t i = 0; i < samples_per_tensor; ++i) indices.push_back(offset + i * stride);
    }

    ParamCheck check;
    check.name = param.name;
    for (std::size_t idx : indices) {
      const real_t saved = tensor[idx];
      tensor[idx] = saved + static_cast<real_t>(eps);
      const double plus = loss();
      tensor[idx] = saved - static_cast<real_t>(eps);
      const double minus = loss();
      tensor[idx] = saved;
      const double numeric = (plus - minus) / (2 * eps);
      const double analytic_value = grad[idx];
      const double rel = std::abs(analytic_value - numeric) /
                         std::max({std::abs(analytic_value), std::abs(numeric), 1e-8});
      check.max_rel_error = std::max(check.max_rel_error, rel);
      ++check.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace snvt
