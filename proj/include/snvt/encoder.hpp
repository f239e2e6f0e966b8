#pragma once

#include <cstddef>

#include "snvt/autodiff.hpp"
#include "snvt/tensor.hpp"

namespace snvt {

// Width used under the square root when scaling attention scores.
// per_head divides by sqrt(D/h); full_dim divides by sqrt(D) regardless of
// the head split. With a single head the two agree.
enum class ScoreScale { per_head, full_dim };

struct EncoderConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  std::size_t patch = 4;
  std::size_t dim = 16;    // D
  std::size_t layers = 2;  // L
  std::size_t heads = 2;   // h
  bool positional = true;  // learned N x D table added after embedding
  bool prenorm = true;     // residual connections + row normalization
  ScoreScale score_scale = ScoreScale::per_head;

  void validate() const;  // divisibility constraints; throws ConfigError
  std::size_t patch_count() const { return (height * width) / (patch * patch); }  // N
  std::size_t patch_len() const { return patch * patch * channels; }              // P^2 * C
  std::size_t head_dim() const { return dim / heads; }

  bool operator==(const EncoderConfig&) const = default;
};

// H x W x C image -> N x (P^2*C) patch matrix. Patch grid is scanned
// row-major; inside a patch the flatten order is (row, col, channel).
Tensor patchify(const Tensor& image, const EncoderConfig& config);
// Exact inverse of patchify.
Tensor unpatchify(const Tensor& patches, const EncoderConfig& config);

namespace vit {

struct EmbedderValues {
  autodiff::Value weight;      // (P^2*C) x D
  autodiff::Value bias;        // 1 x D
  autodiff::Value positional;  // N x D; invalid Value when the switch is off
};

struct AttentionValues {
  autodiff::Value w_query, w_key, w_value, w_out;  // all D x D
};

struct FfnValues {
  autodiff::Value w1, b1, w2, b2;
};

// Z = patches * W_e + b_e (+ positional table when present)
autodiff::Value embed_patches(autodiff::Value patches, const EmbedderValues& embedder);

// Multi-head self-attention: project to Q/K/V, split column-wise into
// `heads` slices, per head softmax(Q K^T / sqrt(scale width)) V, concat,
// then the output projection.
autodiff::Value attention(autodiff::Value z, const AttentionValues& weights,
                          std::size_t heads, ScoreScale score_scale);

// relu(x W1 + b1) W2 + b2, rows independent
autodiff::Value ffn(autodiff::Value x, const FfnValues& weights);

}  // namespace vit

}  // namespace snvt
