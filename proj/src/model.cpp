#include "snvt/model.hpp"

#include <cmath>

#include "snvt/error.hpp"
#include "snvt/rng.hpp"

namespace snvt {

Model::Model(EncoderConfig encoder_config, TaskSet task_set, double reg, std::uint64_t seed)
    : encoder(encoder_config), tasks(std::move(task_set)), reg_weight(reg) {
  encoder.validate();
  tasks.validate();
  if (reg_weight < 0) throw ConfigError("reg weight must be >= 0");
  init_parameters(seed);
}

namespace {

template <class ModelT, class RefT>
std::vector<RefT> enumerate(ModelT& m) {
  std::vector<RefT> out;
  out.push_back({"embed.weight", &m.embed.weight});
  out.push_back({"embed.bias", &m.embed.bias});
  if (!m.embed.positional.empty()) out.push_back({"embed.positional", &m.embed.positional});
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    auto& layer = m.layers[i];
    out.push_back({prefix + "attn.w_query", &layer.attn.w_query});
    out.push_back({prefix + "attn.w_key", &layer.attn.w_key});
    out.push_back({prefix + "attn.w_value", &layer.attn.w_value});
    out.push_back({prefix + "attn.w_out", &layer.attn.w_out});
    out.push_back({prefix + "ffn.w1", &layer.ffn.w1});
    out.push_back({prefix + "ffn.b1", &layer.ffn.b1});
    out.push_back({prefix + "ffn.w2", &layer.ffn.w2});
    out.push_back({prefix + "ffn.b2", &layer.ffn.b2});
  }
  for (std::size_t t = 0; t < m.heads.size(); ++t) {
    const std::string prefix = "head." + m.tasks.tasks[t].id + ".";
    out.push_back({prefix + "weight", &m.heads[t].weight});
    out.push_back({prefix + "bias", &m.heads[t].bias});
  }
  return out;
}

void fill_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Lcg64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = static_cast<real_t>(rng.uniform(-a, a));
}

}  // namespace

void Model::init_parameters(std::uint64_t seed) {
  encoder.validate();
  tasks.validate();
  init_seed = seed;
  const std::size_t d = encoder.dim;
  const std::size_t plen = encoder.patch_len();
  const std::size_t n = encoder.patch_count();

  embed.weight = Tensor({plen, d});
  embed.bias = Tensor({1, d});
  embed.positional = encoder.positional ? Tensor({n, d}) : Tensor();
  layers.assign(encoder.layers, LayerParams{});
  for (auto& layer : layers) {
    layer.attn.w_query = Tensor({d, d});
    layer.attn.w_key = Tensor({d, d});
    layer.attn.w_value = Tensor({d, d});
    layer.attn.w_out = Tensor({d, d});
    layer.ffn.w1 = Tensor({d, d});
    layer.ffn.b1 = Tensor({1, d});
    layer.ffn.w2 = Tensor({d, d});
    layer.ffn.b2 = Tensor({1, d});
  }
  heads.clear();
  for (const auto& task : tasks.tasks) {
    HeadParams h;
    h.weight = Tensor({d, task.output_arity()});
    h.bias = Tensor({1, task.output_arity()});
    heads.push_back(std::move(h));
  }

  Lcg64 rng(seed);
  fill_uniform(embed.weight, plen, d, rng);
  for (auto& layer : layers) {
    fill_uniform(layer.attn.w_query, d, d, rng);
    fill_uniform(layer.attn.w_key, d, d, rng);
    fill_uniform(layer.attn.w_value, d, d, rng);
    fill_uniform(layer.attn.w_out, d, d, rng);
    fill_uniform(layer.ffn.w1, d, d, rng);
    fill_uniform(layer.ffn.w2, d, d, rng);
  }
  for (std::size_t t = 0; t < heads.size(); ++t) {
    fill_uniform(heads[t].weight, d, tasks.tasks[t].output_arity(), rng);
  }
}

std::vector<ParamRef> Model::parameters() { return enumerate<Model, ParamRef>(*this); }

std::vector<ConstParamRef> Model::parameters() const {
  return enumerate<const Model, ConstParamRef>(*this);
}

std::size_t Model::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor->size();
  return n;
}

double Model::l2() const {
  double total = 0;
  for (const auto& p : parameters()) total += sum_squares(*p.tensor);
  return 0.5 * total;
}

autodiff::Value Model::Bound::at(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw ContractError("no bound parameter named '" + name + "'");
  return it->second;
}

Model::Bound Model::bind(autodiff::Tape& tape) const {
  Bound bound;
  for (const auto& p : parameters()) {
    autodiff::Value v = tape.parameter(p.name, *p.tensor);
    bound.by_name.emplace(p.name, v);
    bound.ordered.push_back(v);
  }
  return bound;
}

namespace {

void check_stage_shape(const autodiff::Value& v, std::size_t n, std::size_t d,
                       const char* stage) {
  const Tensor& t = v.tensor();
  if (t.rank() != 2 || t.rows() != n || t.cols() != d) {
    throw DimensionError(std::string(stage) + ": expected " + shape_str({n, d}) + ", got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

autodiff::Value Model::encode(autodiff::Tape& tape, const Bound& bound,
                              const Tensor& image) const {
  const std::size_t n = encoder.patch_count();
  const std::size_t d = encoder.dim;

  autodiff::Value patches = tape.constant(patchify(image, encoder));

  vit::EmbedderValues embedder;
  embedder.weight = bound.at("embed.weight");
  embedder.bias = bound.at("embed.bias");
  if (encoder.positional) embedder.positional = bound.at("embed.positional");
  autodiff::Value z = vit::embed_patches(patches, embedder);
  check_stage_shape(z, n, d, "embed");

  for (std::size_t i = 0; i < encoder.layers; ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    vit::AttentionValues attn{bound.at(prefix + "attn.w_query"), bound.at(prefix + "attn.w_key"),
                              bound.at(prefix + "attn.w_value"), bound.at(prefix + "attn.w_out")};
    vit::FfnValues ffn_weights{bound.at(prefix + "ffn.w1"), bound.at(prefix + "ffn.b1"),
                               bound.at(prefix + "ffn.w2"), bound.at(prefix + "ffn.b2")};
    if (encoder.prenorm) {
      z = autodiff::add(z, vit::attention(autodiff::normalize_rows(z), attn, encoder.heads,
                                          encoder.score_scale));
      check_stage_shape(z, n, d, "attention");
      z = autodiff::add(z, vit::ffn(autodiff::normalize_rows(z), ffn_weights));
    } else {
      z = vit::attention(z, attn, encoder.heads, encoder.score_scale);
      check_stage_shape(z, n, d, "attention");
      z = vit::ffn(z, ffn_weights);
    }
    check_stage_shape(z, n, d, "ffn");
  }
  return z;
}

std::map<std::string, autodiff::Value> Model::forward(autodiff::Tape& tape, const Bound& bound,
                                                      const Tensor& image) const {
  autodiff::Value z = encode(tape, bound, image);
  std::map<std::string, autodiff::Value> predictions;
  for (const auto& task : tasks.tasks) {
    predictions[task.id] =
        head_forward(z, bound.at("head." + task.id + ".weight"),
                     bound.at("head." + task.id + ".bias"), task.kind);
  }
  return predictions;
}

Tensor Model::encode_tensor(const Tensor& image) const {
  autodiff::Tape tape;
  Bound bound = bind(tape);
  return encode(tape, bound, image).tensor();
}

std::map<std::string, Tensor> Model::predict(const Tensor& image) const {
  autodiff::Tape tape;
  Bound bound = bind(tape);
  std::map<std::string, Tensor> out;
  for (auto& [task, value] : forward(tape, bound, image)) out[task] = value.tensor();
  return out;
}

}  // namespace snvt
