#include "snvt/encoder.hpp"

#include <cmath>

#include "snvt/error.hpp"

namespace snvt {

void EncoderConfig::validate() const {
  if (height == 0 || width == 0 || channels == 0 || patch == 0 || dim == 0 || heads == 0) {
    throw ConfigError("encoder dimensions must be positive");
  }
  if (height % patch != 0 || width % patch != 0) {
    throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible into " + std::to_string(patch) + "x" +
                      std::to_string(patch) + " patches");
  }
  if (dim % heads != 0) {
    throw ConfigError("embed dim " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

Tensor patchify(const Tensor& image, const EncoderConfig& config) {
  config.validate();
  const std::vector<std::size_t> expected = {config.height, config.width, config.channels};
  if (image.shape() != expected) {
    throw DimensionError("patchify: image " + shape_str(image.shape()) +
                         " does not match configured " + shape_str(expected));
  }
  const std::size_t p = config.patch;
  const std::size_t grid_w = config.width / p;
  Tensor out({config.patch_count(), config.patch_len()});
  for (std::size_t gr = 0; gr < config.height / p; ++gr) {
    for (std::size_t gc = 0; gc < grid_w; ++gc) {
      const std::size_t row = gr * grid_w + gc;
      std::size_t col = 0;
      for (std::size_t pr = 0; pr < p; ++pr)
        for (std::size_t pc = 0; pc < p; ++pc)
          for (std::size_t ch = 0; ch < config.channels; ++ch)
            out.at(row, col++) = image.at(gr * p + pr, gc * p + pc, ch);
    }
  }
  return out;
}

Tensor unpatchify(const Tensor& patches, const EncoderConfig& config) {
  config.validate();
  if (patches.rank() != 2 || patches.rows() != config.patch_count() ||
      patches.cols() != config.patch_len()) {
    throw DimensionError("unpatchify: patches " + shape_str(patches.shape()) +
                         " do not match configured " +
                         shape_str({config.patch_count(), config.patch_len()}));
  }
  const std::size_t p = config.patch;
  const std::size_t grid_w = config.width / p;
  Tensor image({config.height, config.width, config.channels});
  for (std::size_t row = 0; row < patches.rows(); ++row) {
    const std::size_t gr = row / grid_w, gc = row % grid_w;
    std::size_t col = 0;
    for (std::size_t pr = 0; pr < p; ++pr)
      for (std::size_t pc = 0; pc < p; ++pc)
        for (std::size_t ch = 0; ch < config.channels; ++ch)
          image.at(gr * p + pr, gc * p + pc, ch) = patches.at(row, col++);
  }
  return image;
}

namespace vit {

using autodiff::Value;

Value embed_patches(Value patches, const EmbedderValues& embedder) {
  Value z = autodiff::add_row_bias(autodiff::matmul(patches, embedder.weight), embedder.bias);
  if (embedder.positional.valid()) z = autodiff::add(z, embedder.positional);
  return z;
}

Value attention(Value z, const AttentionValues& weights, std::size_t heads,
                ScoreScale score_scale) {
  const std::size_t model_dim = z.tensor().cols();
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(model_dim) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = model_dim / heads;
  const real_t scale_width =
      static_cast<real_t>(score_scale == ScoreScale::per_head ? head_dim : model_dim);
  const real_t inv_sqrt = real_t{1} / std::sqrt(scale_width);

  Value q = autodiff::matmul(z, weights.w_query);
  Value k = autodiff::matmul(z, weights.w_key);
  Value v = autodiff::matmul(z, weights.w_value);

  std::vector<Value> head_outputs;
  head_outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Value qh = autodiff::slice_cols(q, h * head_dim, head_dim);
    Value kh = autodiff::slice_cols(k, h * head_dim, head_dim);
    Value vh = autodiff::slice_cols(v, h * head_dim, head_dim);
    Value scores = autodiff::scale(autodiff::matmul(qh, autodiff::transpose(kh)), inv_sqrt);
    head_outputs.push_back(autodiff::matmul(autodiff::softmax_rows(scores), vh));
  }
  Value merged = heads == 1 ? head_outputs.front() : autodiff::concat_cols(head_outputs);
  return autodiff::matmul(merged, weights.w_out);
}

Value ffn(Value x, const FfnValues& weights) {
  Value hidden = autodiff::relu(
      autodiff::add_row_bias(autodiff::matmul(x, weights.w1), weights.b1));
  return autodiff::add_row_bias(autodiff::matmul(hidden, weights.w2), weights.b2);
}

}  // namespace vit

}  // namespace snvt
