#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "snvt/tensor.hpp"

namespace snvt::autodiff {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily by Tape::backward
  bool requires_grad = false;
  std::size_t index = 0;  // position in the tape, creation order
  std::string param_name; // nonempty only for parameter leaves
  std::vector<Node*> inputs;
  // Accumulates d(loss)/d(input) into each input's grad, given this node's grad.
  std::function<void(Node&)> backward;
};

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Value {
 public:
  Value() = default;
  Value(Tape* tape, Node* node) : tape_(tape), node_(node) {}

  const Tensor& tensor() const { return node_->value; }
  real_t scalar() const { return node_->value.scalar_value(); }
  const Tensor& grad() const { return node_->grad; }
  bool valid() const { return node_ != nullptr; }

  Tape* tape() const { return tape_; }
  Node* node() const { return node_; }

 private:
  Tape* tape_ = nullptr;
  Node* node_ = nullptr;
};

using GradMap = std::map<std::string, Tensor>;

// Record of one forward computation. Nodes are appended in evaluation order,
// so the sequence is topologically sorted by construction; backward() walks
// it once, in reverse. One tape per training step, single-threaded.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant input. No gradient is tracked through it.
  Value constant(Tensor value);
  // Named leaf whose gradient is reported by backward().
  Value parameter(std::string name, Tensor value);
  // Generic op node; the extension point all primitives go through.
  Value make(Tensor value, std::vector<Value> inputs, std::function<void(Node&)> backward_fn);

  // Reverse accumulation from a scalar loss. Returns gradients keyed by
  // parameter name. Throws ContractError if loss is not a scalar.
  GradMap backward(const Value& loss);

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Node*>& parameters() const { return params_; }

 private:
  std::deque<Node> nodes_;  // deque: stable addresses as we append
  std::vector<Node*> params_;
};

// Differentiable primitives. Forward values come from the tensor kernels;
// each op installs its own reverse rule.
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value scale(Value a, real_t factor);
Value matmul(Value a, Value b);
Value transpose(Value a);
Value relu(Value x);
Value softmax_rows(Value x);
Value add_row_bias(Value x, Value bias);
Value slice_cols(Value x, std::size_t from, std::size_t width);
Value concat_cols(const std::vector<Value>& parts);
Value mean_rows(Value x);
// per-row (x - mean) / sqrt(var + 1e-5); no learned scale or shift
Value normalize_rows(Value x);
// scalar: sum of squares of all entries
Value sum_squares(Value x);
// scalar: sum_i weights[i] * values[i]; every values[i] must be scalar
Value weighted_sum(const std::vector<Value>& values, const std::vector<real_t>& weights);
// scalar: -sum_c onehot[c] * log(probs[c] + 1e-12); probs is a 1 x C row
Value cross_entropy(Value probs, const std::vector<real_t>& onehot);
// scalar: mean squared error between a 1 x k row and a constant target
Value mse(Value pred, const std::vector<real_t>& target);

}  // namespace snvt::autodiff
