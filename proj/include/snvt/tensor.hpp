#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace snvt {

#ifdef SNVT_REAL32
using real_t = float;
#else
using real_t = double;
#endif

std::string shape_str(const std::vector<std::size_t>& shape);

// Dense real tensor, row-major. Plain value type: copyable, comparable,
// no view semantics. Shape is fixed at construction.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<real_t> data);

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, real_t value);
  static Tensor scalar(real_t value) { return Tensor({1}, {value}); }
  // 1 x n row vector
  static Tensor row(std::vector<real_t> values);
  // m x n matrix from nested initializer lists
  static Tensor matrix(std::initializer_list<std::initializer_list<real_t>> rows);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  bool empty() const { return data_.empty(); }

  // rank-2 accessors
  std::size_t rows() const;
  std::size_t cols() const;
  real_t& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  real_t at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  // rank-3 accessors (images, H x W x C)
  real_t& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  real_t at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  real_t& operator[](std::size_t i) { return data_[i]; }
  real_t operator[](std::size_t i) const { return data_[i]; }

  std::vector<real_t>& data() { return data_; }
  const std::vector<real_t>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  // true when this tensor holds exactly one value
  bool is_scalar() const { return size() == 1; }
  real_t scalar_value() const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<real_t> data_;
};

// Forward kernels. Shape-checked; every mismatch throws DimensionError
// naming both shapes. These are the plain math underneath the autodiff ops.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real_t factor);
// X (m x n) + bias broadcast over rows; bias is 1 x n or length-n
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);
// row-wise softmax with max-subtraction
Tensor softmax_rows(const Tensor& x);
// columns [from, from+width) of a rank-2 tensor
Tensor slice_cols(const Tensor& x, std::size_t from, std::size_t width);
Tensor concat_cols(const std::vector<Tensor>& parts);
// column means: m x n -> 1 x n
Tensor mean_rows(const Tensor& x);
real_t sum(const Tensor& x);
real_t sum_squares(const Tensor& x);
real_t max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace snvt
