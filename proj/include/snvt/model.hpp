#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "snvt/autodiff.hpp"
#include "snvt/encoder.hpp"
#include "snvt/mtl.hpp"
#include "snvt/params.hpp"
#include "snvt/tensor.hpp"

namespace snvt {

struct EmbedParams {
  Tensor weight;      // (P^2*C) x D
  Tensor bias;        // 1 x D
  Tensor positional;  // N x D, empty when the positional switch is off
};

struct AttentionParams {
  Tensor w_query, w_key, w_value, w_out;  // D x D
};

struct FfnParams {
  Tensor w1, b1, w2, b2;
};

struct LayerParams {
  AttentionParams attn;
  FfnParams ffn;
};

struct HeadParams {
  Tensor weight;  // D x arity
  Tensor bias;    // 1 x arity
};

// Encoder stack plus one head per task. Heads pool the N x D encoder output
// by taking the mean over patch rows.
class Model {
 public:
  Model() = default;
  Model(EncoderConfig encoder_config, TaskSet task_set, double reg_weight, std::uint64_t seed);

  EncoderConfig encoder;
  TaskSet tasks;
  double reg_weight = 0.01;
  std::uint64_t init_seed = 0;

  EmbedParams embed;
  std::vector<LayerParams> layers;
  std::vector<HeadParams> heads;       // parallel to tasks.tasks
  std::set<std::string> frozen;        // parameter names excluded from updates

  // Allocates parameter storage for the configs and fills weights with
  // seeded uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases and the
  // positional table start at zero. Draw order is the registry order below.
  void init_parameters(std::uint64_t seed);

  // Fixed enumeration: embed.{weight,bias,positional}, then per layer
  // attn.{w_query,w_key,w_value,w_out} and ffn.{w1,b1,w2,b2}, then
  // head.<task>.{weight,bias}.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;
  std::size_t scalar_count() const;

  // Half sum of squares over every parameter scalar.
  double l2() const;

  // Parameter leaves bound onto a tape, in registry order.
  struct Bound {
    std::map<std::string, autodiff::Value> by_name;
    std::vector<autodiff::Value> ordered;
    autodiff::Value at(const std::string& name) const;
  };
  Bound bind(autodiff::Tape& tape) const;

  // patchify -> embed -> L x (attention -> ffn), with residual additions and
  // row normalization iff the prenorm switch is on. Output is N x D.
  autodiff::Value encode(autodiff::Tape& tape, const Bound& bound, const Tensor& image) const;
  // Per-task predictions for one sample.
  std::map<std::string, autodiff::Value> forward(autodiff::Tape& tape, const Bound& bound,
                                                 const Tensor& image) const;

  // Forward-only conveniences on a throwaway tape.
  Tensor encode_tensor(const Tensor& image) const;
  std::map<std::string, Tensor> predict(const Tensor& image) const;
};

}  // namespace snvt
