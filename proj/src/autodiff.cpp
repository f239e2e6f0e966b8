#include "snvt/autodiff.hpp"

#include <cmath>

#include "snvt/error.hpp"

namespace snvt::autodiff {

namespace {

constexpr real_t kLogEps = static_cast<real_t>(1e-12);
constexpr real_t kNormEps = static_cast<real_t>(1e-5);

Tape* common_tape(std::initializer_list<Value> values) {
  Tape* tape = nullptr;
  for (const Value& v : values) {
    if (!v.valid()) throw ContractError("op received an empty Value");
    if (tape && v.tape() != tape) throw ContractError("op mixes Values from different tapes");
    tape = v.tape();
  }
  return tape;
}

void accumulate(Node* target, const Tensor& g) {
  if (!target->requires_grad) return;
  if (target->grad.empty()) target->grad = Tensor::zeros(target->value.shape());
  for (std::size_t i = 0; i < g.size(); ++i) target->grad[i] += g[i];
}

}  // namespace

Value Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, nodes_.size(), {}, {}, {}});
  return Value(this, &nodes_.back());
}

Value Tape::parameter(std::string name, Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, nodes_.size(), std::move(name), {}, {}});
  params_.push_back(&nodes_.back());
  return Value(this, &nodes_.back());
}

Value Tape::make(Tensor value, std::vector<Value> inputs,
                 std::function<void(Node&)> backward_fn) {
  Node node;
  node.value = std::move(value);
  node.index = nodes_.size();
  for (const Value& in : inputs) {
    if (in.tape() != this) throw ContractError("node input belongs to another tape");
    node.inputs.push_back(in.node());
    node.requires_grad = node.requires_grad || in.node()->requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return Value(this, &nodes_.back());
}

GradMap Tape::backward(const Value& loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (!loss.node()->value.is_scalar()) {
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(loss.node()->value.shape()));
  }
  for (auto& node : nodes_) node.grad = Tensor();
  Node* root = loss.node();
  root->grad = Tensor::full(root->value.shape(), 1);
  // Creation order is topological, so one reverse sweep visits each node
  // exactly once with its grad fully accumulated.
  for (std::size_t i = root->index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(node);
  }
  GradMap grads;
  for (Node* p : params_) {
    grads[p->param_name] = p->grad.empty() ? Tensor::zeros(p->value.shape()) : p->grad;
  }
  return grads;
}

Value add(Value a, Value b) {
  Tape* tape = common_tape({a, b});
  return tape->make(snvt::add(a.tensor(), b.tensor()), {a, b}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    accumulate(n.inputs[1], n.grad);
  });
}

Value sub(Value a, Value b) {
  Tape* tape = common_tape({a, b});
  return tape->make(snvt::sub(a.tensor(), b.tensor()), {a, b}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    accumulate(n.inputs[1], snvt::scale(n.grad, -1));
  });
}

Value scale(Value a, real_t factor) {
  Tape* tape = common_tape({a});
  return tape->make(snvt::scale(a.tensor(), factor), {a}, [factor](Node& n) {
    accumulate(n.inputs[0], snvt::scale(n.grad, factor));
  });
}

Value matmul(Value a, Value b) {
  Tape* tape = common_tape({a, b});
  return tape->make(snvt::matmul(a.tensor(), b.tensor()), {a, b}, [](Node& n) {
    // dA = dY B^T, dB = A^T dY
    accumulate(n.inputs[0], snvt::matmul(n.grad, snvt::transpose(n.inputs[1]->value)));
    accumulate(n.inputs[1], snvt::matmul(snvt::transpose(n.inputs[0]->value), n.grad));
  });
}

Value transpose(Value a) {
  Tape* tape = common_tape({a});
  return tape->make(snvt::transpose(a.tensor()), {a}, [](Node& n) {
    accumulate(n.inputs[0], snvt::transpose(n.grad));
  });
}

Value relu(Value x) {
  Tape* tape = common_tape({x});
  return tape->make(snvt::relu(x.tensor()), {x}, [](Node& n) {
    // subgradient at exactly 0 is 0
    Tensor g = n.grad;
    const Tensor& in = n.inputs[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] <= real_t{0}) g[i] = 0;
    accumulate(n.inputs[0], g);
  });
}

Value softmax_rows(Value x) {
  Tape* tape = common_tape({x});
  return tape->make(snvt::softmax_rows(x.tensor()), {x}, [](Node& n) {
    // dx_j = p_j * (dy_j - sum_k dy_k p_k), per row
    const Tensor& p = n.value;
    const std::size_t m = p.rows(), c = p.cols();
    Tensor g({m, c});
    for (std::size_t i = 0; i < m; ++i) {
      real_t dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += n.grad.at(i, j) * p.at(i, j);
      for (std::size_t j = 0; j < c; ++j) g.at(i, j) = p.at(i, j) * (n.grad.at(i, j) - dot);
    }
    accumulate(n.inputs[0], g);
  });
}

Value add_row_bias(Value x, Value bias) {
  Tape* tape = common_tape({x, bias});
  return tape->make(snvt::add_row_bias(x.tensor(), bias.tensor()), {x, bias}, [](Node& n) {
    accumulate(n.inputs[0], n.grad);
    const std::size_t m = n.grad.rows(), c = n.grad.cols();
    Tensor db(n.inputs[1]->value.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < c; ++j) db[j] += n.grad.at(i, j);
    accumulate(n.inputs[1], db);
  });
}

Value slice_cols(Value x, std::size_t from, std::size_t width) {
  Tape* tape = common_tape({x});
  return tape->make(snvt::slice_cols(x.tensor(), from, width), {x}, [from, width](Node& n) {
    Tensor g(n.inputs[0]->value.shape());
    for (std::size_t i = 0; i < n.grad.rows(); ++i)
      for (std::size_t j = 0; j < width; ++j) g.at(i, from + j) = n.grad.at(i, j);
    accumulate(n.inputs[0], g);
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  Tape* tape = parts.front().tape();
  std::vector<Tensor> tensors;
  std::vector<std::size_t> widths;
  for (const Value& p : parts) {
    common_tape({parts.front(), p});
    tensors.push_back(p.tensor());
    widths.push_back(p.tensor().cols());
  }
  return tape->make(snvt::concat_cols(tensors), parts, [widths](Node& n) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Tensor g({n.grad.rows(), widths[k]});
      for (std::size_t i = 0; i < n.grad.rows(); ++i)
        for (std::size_t j = 0; j < widths[k]; ++j) g.at(i, j) = n.grad.at(i, off + j);
      accumulate(n.inputs[k], g);
      off += widths[k];
    }
  });
}

Value mean_rows(Value x) {
  Tape* tape = common_tape({x});
  const std::size_t m = x.tensor().rows();
  return tape->make(snvt::mean_rows(x.tensor()), {x}, [m](Node& n) {
    Tensor g(n.inputs[0]->value.shape());
    const real_t inv = real_t{1} / static_cast<real_t>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n.grad.cols(); ++j) g.at(i, j) = n.grad.at(0, j) * inv;
    accumulate(n.inputs[0], g);
  });
}

Value normalize_rows(Value x) {
  Tape* tape = common_tape({x});
  const Tensor& in = x.tensor();
  const std::size_t m = in.rows(), c = in.cols();
  Tensor out({m, c});
  std::vector<real_t> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    real_t mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += in.at(i, j);
    mean /= static_cast<real_t>(c);
    real_t var = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const real_t d = in.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<real_t>(c);
    inv_std[i] = real_t{1} / std::sqrt(var + kNormEps);
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = (in.at(i, j) - mean) * inv_std[i];
  }
  return tape->make(std::move(out), {x}, [inv_std](Node& n) {
    // dx = inv_std * (dy - mean(dy) - y * mean(dy * y)), per row
    const Tensor& y = n.value;
    const std::size_t m2 = y.rows(), c2 = y.cols();
    Tensor g({m2, c2});
    for (std::size_t i = 0; i < m2; ++i) {
      real_t mean_dy = 0, mean_dyy = 0;
      for (std::size_t j = 0; j < c2; ++j) {
        mean_dy += n.grad.at(i, j);
        mean_dyy += n.grad.at(i, j) * y.at(i, j);
      }
      mean_dy /= static_cast<real_t>(c2);
      mean_dyy /= static_cast<real_t>(c2);
      for (std::size_t j = 0; j < c2; ++j) {
        g.at(i, j) = inv_std[i] * (n.grad.at(i, j) - mean_dy - y.at(i, j) * mean_dyy);
      }
    }
    accumulate(n.inputs[0], g);
  });
}

Value sum_squares(Value x) {
  Tape* tape = common_tape({x});
  return tape->make(Tensor::scalar(snvt::sum_squares(x.tensor())), {x}, [](Node& n) {
    accumulate(n.inputs[0], snvt::scale(n.inputs[0]->value, 2 * n.grad.scalar_value()));
  });
}

Value weighted_sum(const std::vector<Value>& values, const std::vector<real_t>& weights) {
  if (values.empty()) throw ContractError("weighted_sum: no terms");
  if (values.size() != weights.size()) {
    throw ContractError("weighted_sum: " + std::to_string(values.size()) + " terms but " +
                        std::to_string(weights.size()) + " weights");
  }
  Tape* tape = values.front().tape();
  real_t total = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    common_tape({values.front(), values[i]});
    total += weights[i] * values[i].scalar();
  }
  return tape->make(Tensor::scalar(total), values, [weights](Node& n) {
    const real_t g = n.grad.scalar_value();
    for (std::size_t i = 0; i < n.inputs.size(); ++i)
      accumulate(n.inputs[i], Tensor::scalar(weights[i] * g));
  });
}

Value cross_entropy(Value probs, const std::vector<real_t>& onehot) {
  Tape* tape = common_tape({probs});
  const Tensor& p = probs.tensor();
  if (p.rank() != 2 || p.rows() != 1 || p.cols() != onehot.size()) {
    throw DimensionError("cross_entropy: probs " + shape_str(p.shape()) + " vs target length " +
                         std::to_string(onehot.size()));
  }
  real_t loss = 0;
  for (std::size_t c = 0; c < onehot.size(); ++c) {
    if (onehot[c] != real_t{0}) loss -= onehot[c] * std::log(p.at(0, c) + kLogEps);
  }
  return tape->make(Tensor::scalar(loss), {probs}, [onehot](Node& n) {
    const real_t g = n.grad.scalar_value();
    const Tensor& pv = n.inputs[0]->value;
    Tensor dp(pv.shape());
    for (std::size_t c = 0; c < onehot.size(); ++c) {
      if (onehot[c] != real_t{0}) dp.at(0, c) = -g * onehot[c] / (pv.at(0, c) + kLogEps);
    }
    accumulate(n.inputs[0], dp);
  });
}

Value mse(Value pred, const std::vector<real_t>& target) {
  Tape* tape = common_tape({pred});
  const Tensor& p = pred.tensor();
  if (p.size() != target.size() || target.empty()) {
    throw DimensionError("mse: prediction " + shape_str(p.shape()) + " vs target length " +
                         std::to_string(target.size()));
  }
  real_t loss = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const real_t d = p[i] - target[i];
    loss += d * d;
  }
  loss /= static_cast<real_t>(target.size());
  return tape->make(Tensor::scalar(loss), {pred}, [target](Node& n) {
    const real_t g = n.grad.scalar_value();
    const Tensor& pv = n.inputs[0]->value;
    Tensor dp(pv.shape());
    const real_t inv = real_t{2} / static_cast<real_t>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) dp[i] = g * inv * (pv[i] - target[i]);
    accumulate(n.inputs[0], dp);
  });
}

}  // namespace snvt::autodiff
