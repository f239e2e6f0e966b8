#include "snvt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snvt/error.hpp"

namespace snvt {

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), real_t{0}) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<real_t> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, real_t value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::row(std::vector<real_t> values) {
  std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<real_t>> rows) {
  std::size_t m = rows.size();
  std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<real_t> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("ragged matrix initializer");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1;
  return t;
}

std::size_t Tensor::rows() const {
  require_rank2(*this, "rows");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require_rank2(*this, "cols");
  return shape_[1];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](real_t v) { return std::isfinite(v); });
}

real_t Tensor::scalar_value() const {
  if (!is_scalar()) {
    throw ContractError("expected a scalar tensor, got " + shape_str(shape_));
  }
  return data_[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  const real_t* pa = a.data().data();
  const real_t* pb = b.data().data();
  real_t* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const real_t av = pa[i * k + l];
      if (av == real_t{0}) continue;
      const real_t* brow = pb + l * n;
      real_t* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("add: shape mismatch, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("sub: shape mismatch, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor scale(const Tensor& a, real_t factor) {
  Tensor out = a;
  for (auto& v : out.data()) v *= factor;
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_row_bias");
  const std::size_t n = x.cols();
  if (bias.size() != n) {
    throw DimensionError("add_row_bias: bias length " + shape_str(bias.shape()) +
                         " does not match row width " + shape_str(x.shape()));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += bias[j];
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (auto& v : out.data())
    if (v < real_t{0}) v = 0;
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  Tensor out = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    real_t* row = out.data().data() + i * n;
    real_t hi = row[0];
    for (std::size_t j = 1; j < n; ++j) hi = std::max(hi, row[j]);
    real_t total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - hi);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t from, std::size_t width) {
  require_rank2(x, "slice_cols");
  if (from + width > x.cols() || width == 0) {
    throw DimensionError("slice_cols: range [" + std::to_string(from) + ", " +
                         std::to_string(from + width) + ") out of " + shape_str(x.shape()));
  }
  Tensor out({x.rows(), width});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out.at(i, j) = x.at(i, from + j);
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t m = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row counts disagree, " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    total += p.cols();
  }
  Tensor out({m, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
    off += p.cols();
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  require_rank2(x, "mean_rows");
  Tensor out({1, x.cols()});
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(0, j) += x.at(i, j);
  const real_t inv = real_t{1} / static_cast<real_t>(x.rows());
  for (auto& v : out.data()) v *= inv;
  return out;
}

real_t sum(const Tensor& x) {
  real_t total = 0;
  for (real_t v : x.data()) total += v;
  return total;
}

real_t sum_squares(const Tensor& x) {
  real_t total = 0;
  for (real_t v : x.data()) total += v * v;
  return total;
}

real_t max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff: shape mismatch, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  real_t worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace snvt
