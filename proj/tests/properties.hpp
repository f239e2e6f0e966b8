#pragma once

// Property checks shared by the per-module suites and the acceptance
// runner. Each function throws PropertyFailure on the first violated case.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "snvt/autodiff.hpp"
#include "snvt/checkpoint.hpp"
#include "snvt/data_io.hpp"
#include "snvt/encoder.hpp"
#include "snvt/metrics.hpp"
#include "snvt/model.hpp"
#include "snvt/mtl.hpp"
#include "snvt/tensor.hpp"
#include "snvt/trainer.hpp"
#include "test_support.hpp"

namespace snvt::testing {

// ---------------------------------------------------------------- autodiff

inline void softmax_rows_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t m = 1 + rng.below(5), n = 1 + rng.below(6);
    const Tensor x = random_tensor({m, n}, rng, -50, 50);
    const Tensor p = softmax_rows(x);
    for (std::size_t i = 0; i < m; ++i) {
      double row_sum = 0;
      for (std::size_t j = 0; j < n; ++j) {
        prop_require(p.at(i, j) >= 0 && p.at(i, j) <= 1, "softmax entry outside [0,1]");
        row_sum += p.at(i, j);
      }
      prop_require(std::abs(row_sum - 1.0) <= 1e-6, "softmax row does not sum to 1");
    }
  }
}

inline void softmax_shift_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t m = 1 + rng.below(4), n = 1 + rng.below(6);
    const Tensor x = random_tensor({m, n}, rng, -5, 5);
    const double shift = rng.uniform(-100, 100);
    Tensor shifted = x;
    for (auto& v : shifted.data()) v += static_cast<real_t>(shift);
    prop_require(max_abs_diff(softmax_rows(x), softmax_rows(shifted)) <= 1e-6,
                 "softmax is not shift invariant");
  }
}

inline void matmul_associativity_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(4), l = 1 + rng.below(4),
                      n = 1 + rng.below(4);
    const Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, l}, rng),
                 d = random_tensor({l, n}, rng);
    const Tensor left = matmul(matmul(a, b), d);
    const Tensor right = matmul(a, matmul(b, d));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double denom = std::max({std::abs(left[i]), std::abs(right[i]), 1e-8});
      prop_require(std::abs(left[i] - right[i]) / denom <= 1e-5,
                   "matmul associativity violated beyond 1e-5");
    }
  }
}

inline void relu_idempotence_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const Tensor x = random_tensor({1 + rng.below(4), 1 + rng.below(6)}, rng);
    prop_require(relu(relu(x)) == relu(x), "relu is not idempotent");
  }
}

// Random composites of the differentiable primitives; every parameter's
// analytic gradient must match central differences.
inline void composite_backward_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  constexpr double eps = 1e-4, tol = 1e-3;
  for (int c = 0; c < cases; ++c) {
    const int variant = c % 6;
    const std::size_t m = 2 + rng.below(3), k = 2 + rng.below(3), n = 2 + rng.below(3);
    Tensor a0 = random_tensor({m, k}, rng);
    Tensor b0 = random_tensor({k, n}, rng);
    Tensor bias0 = random_tensor({1, n}, rng);
    std::vector<real_t> target(n);
    for (auto& t : target) t = static_cast<real_t>(rng.uniform(-2, 2));
    const std::size_t true_class = rng.below(n);

    const auto build = [&](autodiff::Tape& tape) {
      autodiff::Value a = tape.parameter("a", a0);
      autodiff::Value b = tape.parameter("b", b0);
      autodiff::Value bias = tape.parameter("bias", bias0);
      autodiff::Value prod = autodiff::matmul(a, b);
      switch (variant) {
        case 0:
          return autodiff::scale(autodiff::sum_squares(prod), 0.5);
        case 1:
          return autodiff::sum_squares(autodiff::softmax_rows(prod));
        case 2:
          return autodiff::sum_squares(autodiff::relu(autodiff::add_row_bias(prod, bias)));
        case 3:
          return autodiff::sum_squares(
              autodiff::normalize_rows(autodiff::matmul(prod, autodiff::transpose(b))));
        case 4: {
          autodiff::Value left = autodiff::slice_cols(prod, 0, n / 2 + 1);
          autodiff::Value right = autodiff::slice_cols(prod, n / 2, n - n / 2);
          autodiff::Value merged = autodiff::concat_cols({left, autodiff::relu(right)});
          return autodiff::mse(autodiff::mean_rows(merged),
                               std::vector<real_t>(merged.tensor().cols(), 0.25));
        }
        default: {
          autodiff::Value pooled = autodiff::mean_rows(autodiff::add_row_bias(prod, bias));
          autodiff::Value probs = autodiff::softmax_rows(pooled);
          return autodiff::cross_entropy(probs, one_hot(n, true_class));
        }
      }
    };

    const auto loss_value = [&]() {
      autodiff::Tape tape;
      return static_cast<double>(build(tape).scalar());
    };
    autodiff::GradMap grads;
    {
      autodiff::Tape tape;
      autodiff::Value loss = build(tape);
      grads = tape.backward(loss);
    }
    const auto check_tensor = [&](const char* name, Tensor& t) {
      const Tensor& g = grads.at(name);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double numeric = fd_derivative(loss_value, t[i], eps);
        if (rel_error(g[i], numeric) > tol) {
          std::ostringstream msg;
          msg << "composite variant " << variant << ": grad '" << name << "'[" << i
              << "] analytic " << g[i] << " vs fd " << numeric;
          throw PropertyFailure(msg.str());
        }
      }
    };
    check_tensor("a", a0);
    check_tensor("b", b0);
    check_tensor("bias", bias0);
  }
}

// ----------------------------------------------------------------- encoder

inline Model tiny_model(EncoderConfig config, const TaskSet& tasks, std::uint64_t seed,
                        double reg_weight = 0.01) {
  return Model(config, tasks, reg_weight, seed);
}

inline TaskSet two_task_set(std::size_t classes = 3) {
  TaskSet tasks;
  tasks.tasks.push_back(TaskSpec{"class", TaskKind::classification, classes, 1.0});
  tasks.tasks.push_back(TaskSpec{"count", TaskKind::regression, 0, 1.0});
  return tasks;
}

inline EncoderConfig tiny_encoder(bool positional, bool prenorm) {
  EncoderConfig c;
  c.height = 8;
  c.width = 8;
  c.channels = 1;
  c.patch = 4;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.positional = positional;
  c.prenorm = prenorm;
  return c;
}

// With positional embeddings off, permuting the input patches permutes the
// encoder output rows the same way.
inline void permutation_equivariance_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const bool prenorm = c % 2 == 0;
    EncoderConfig config = tiny_encoder(/*positional=*/false, prenorm);
    Model model = tiny_model(config, two_task_set(), rng.next_u64());
    const Tensor image = random_tensor({config.height, config.width, config.channels}, rng, 0, 1);

    std::vector<std::size_t> perm(config.patch_count());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);

    const Tensor patches = patchify(image, config);
    Tensor permuted(patches.shape());
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (std::size_t j = 0; j < patches.cols(); ++j)
        permuted.at(i, j) = patches.at(perm[i], j);

    const Tensor base = model.encode_tensor(image);
    const Tensor shuffled = model.encode_tensor(unpatchify(permuted, config));
    for (std::size_t i = 0; i < perm.size(); ++i)
      for (std::size_t j = 0; j < base.cols(); ++j)
        prop_require(std::abs(shuffled.at(i, j) - base.at(perm[i], j)) <= 1e-9,
                     "encode is not patch-permutation equivariant");
  }
}

// Single-head attention with identity output projection keeps every output
// row inside the convex hull of the value rows.
inline void attention_convex_hull_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = 2 + rng.below(4), d = 2 + rng.below(4);
    autodiff::Tape tape;
    autodiff::Value z = tape.constant(random_tensor({n, d}, rng));
    vit::AttentionValues weights{tape.constant(random_tensor({d, d}, rng)),
                                 tape.constant(random_tensor({d, d}, rng)),
                                 tape.constant(random_tensor({d, d}, rng)),
                                 tape.constant(Tensor::identity(d))};
    const Tensor out = vit::attention(z, weights, 1, ScoreScale::per_head).tensor();
    const Tensor v = matmul(z.tensor(), weights.w_value.tensor());
    for (std::size_t j = 0; j < d; ++j) {
      real_t lo = v.at(0, j), hi = v.at(0, j);
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, v.at(i, j));
        hi = std::max(hi, v.at(i, j));
      }
      for (std::size_t i = 0; i < n; ++i) {
        prop_require(out.at(i, j) >= lo - 1e-6 && out.at(i, j) <= hi + 1e-6,
                     "attention output escapes the value rows' bounding box");
      }
    }
  }
  // exact hull membership for the two-row case: out = v0 + t (v1 - v0), t in [0,1]
  for (int c = 0; c < cases; ++c) {
    const std::size_t d = 2 + rng.below(4);
    autodiff::Tape tape;
    autodiff::Value z = tape.constant(random_tensor({2, d}, rng));
    vit::AttentionValues weights{tape.constant(random_tensor({d, d}, rng)),
                                 tape.constant(random_tensor({d, d}, rng)),
                                 tape.constant(random_tensor({d, d}, rng)),
                                 tape.constant(Tensor::identity(d))};
    const Tensor out = vit::attention(z, weights, 1, ScoreScale::per_head).tensor();
    const Tensor v = matmul(z.tensor(), weights.w_value.tensor());
    for (std::size_t i = 0; i < 2; ++i) {
      double num = 0, den = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double dir = v.at(1, j) - v.at(0, j);
        num += (out.at(i, j) - v.at(0, j)) * dir;
        den += dir * dir;
      }
      const double t = den > 0 ? num / den : 0;
      prop_require(t >= -1e-6 && t <= 1 + 1e-6, "two-row attention output leaves the segment");
      for (std::size_t j = 0; j < d; ++j) {
        const double expect = v.at(0, j) + t * (v.at(1, j) - v.at(0, j));
        prop_require(std::abs(out.at(i, j) - expect) <= 1e-6,
                     "two-row attention output leaves the segment");
      }
    }
  }
}

inline void encode_determinism_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    EncoderConfig config = tiny_encoder(true, true);
    Model model = tiny_model(config, two_task_set(), rng.next_u64());
    const Tensor image = random_tensor({config.height, config.width, config.channels}, rng, 0, 1);
    prop_require(model.encode_tensor(image) == model.encode_tensor(image),
                 "encode is not bit-deterministic");
  }
}

// --------------------------------------------------------------------- mtl

inline void cross_entropy_properties(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = 2 + rng.below(5);
    std::vector<double> probs(n);
    double total = 0;
    for (auto& p : probs) total += (p = rng.uniform(0.01, 1.0));
    for (auto& p : probs) p /= total;
    const std::size_t truth = rng.below(n);
    std::vector<double> onehot(n, 0.0);
    onehot[truth] = 1.0;
    const double loss = cross_entropy(probs, onehot);
    prop_require(loss >= 0, "cross entropy went negative");
    if (probs[truth] < 1.0 - 1e-9) {
      prop_require(loss > 0, "cross entropy is zero without full mass on the true class");
    }
  }
  // loss vanishes only at (clamped) certainty
  std::vector<double> sure(4, 0.0);
  sure[2] = 1.0;
  prop_require(cross_entropy(sure, sure) <= 1e-11, "cross entropy at certainty is not ~0");
}

inline void mse_properties(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = rng.uniform(-5, 5);
    for (auto& v : b) v = rng.uniform(-5, 5);
    prop_require(mse(a, b) >= 0, "mse went negative");
    prop_require(mse(a, b) == mse(b, a), "mse is not symmetric");
    prop_require(mse(a, a) == 0, "mse(x,x) != 0");
  }
}

inline void mtl_linearity_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t t = 1 + rng.below(4);
    TaskSet tasks;
    std::map<std::string, double> losses, scaled, summed, other;
    const double alpha = rng.uniform(0.1, 3.0);
    for (std::size_t i = 0; i < t; ++i) {
      const std::string id = "t" + std::to_string(i);
      tasks.tasks.push_back(TaskSpec{id, TaskKind::regression, 0, rng.uniform(0.1, 2.0)});
      losses[id] = rng.uniform(0, 4);
      other[id] = rng.uniform(0, 4);
      scaled[id] = alpha * losses[id];
      summed[id] = losses[id] + other[id];
    }
    const double base = mtl_loss(losses, tasks);
    prop_require(std::abs(mtl_loss(scaled, tasks) - alpha * base) <= 1e-9 * (1 + std::abs(base)),
                 "mtl_loss is not homogeneous");
    prop_require(std::abs(mtl_loss(summed, tasks) - (base + mtl_loss(other, tasks))) <= 1e-9,
                 "mtl_loss is not additive");

    TaskSet doubled = tasks;
    for (auto& spec : doubled.tasks) spec.weight *= 2;
    prop_require(std::abs(mtl_loss(losses, doubled) - 2 * base) <= 1e-9 * (1 + std::abs(base)),
                 "doubling every weight does not double the objective");
  }
}

inline void l2_permutation_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    Model model = tiny_model(tiny_encoder(true, true), two_task_set(), rng.next_u64());
    // walk the parameters in a shuffled order; the half-sum-of-squares must agree
    auto refs = model.parameters();
    std::vector<std::size_t> order(refs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double shuffled = 0;
    for (std::size_t i : order) shuffled += sum_squares(*refs[i].tensor);
    shuffled *= 0.5;
    prop_require(std::abs(shuffled - model.l2()) <= 1e-9 * (1 + model.l2()),
                 "l2 depends on the enumeration order");
  }
}

// d(final)/d(theta_i) - d(mtl)/d(theta_i) = reg_weight * theta_i, by central
// differences. The difference of the two quadratics is exact up to rounding.
inline void reg_gradient_identity_property(std::uint64_t seed, int params_to_check) {
  Lcg64 rng(seed);
  Model model = tiny_model(tiny_encoder(true, true), two_task_set(), seed, 0.01);
  const Tensor image =
      random_tensor({model.encoder.height, model.encoder.width, model.encoder.channels}, rng, 0, 1);
  TargetMap targets;
  targets["class"] = std::size_t{1};
  targets["count"] = 2.0;

  const auto loss_at = [&](double reg_weight) {
    autodiff::Tape tape;
    Model::Bound bound = model.bind(tape);
    std::vector<std::map<std::string, autodiff::Value>> preds{
        model.forward(tape, bound, image)};
    return final_loss(tape, preds, {targets}, model.tasks, reg_weight, bound.ordered)
        .report.final;
  };
  const auto final_fn = [&]() { return loss_at(model.reg_weight); };
  const auto mtl_fn = [&]() { return loss_at(0.0); };

  auto refs = model.parameters();
  for (int c = 0; c < params_to_check; ++c) {
    auto& ref = refs[rng.below(refs.size())];
    if (ref.tensor->size() == 0) continue;
    const std::size_t idx = rng.below(ref.tensor->size());
    const double eps = 1e-4;
    const double d_final = fd_derivative(final_fn, (*ref.tensor)[idx], eps);
    const double d_mtl = fd_derivative(mtl_fn, (*ref.tensor)[idx], eps);
    const double expect = model.reg_weight * (*ref.tensor)[idx];
    prop_require(std::abs((d_final - d_mtl) - expect) <= 1e-6,
                 "regularizer gradient identity violated at " + ref.name);
  }
}

// ----------------------------------------------------------------- trainer

inline SyntheticSpec small_synthetic(std::uint64_t seed, std::size_t train_count,
                                     std::size_t eval_count, double noise) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.noise = noise;
  spec.train_count = train_count;
  spec.val_count = eval_count;
  spec.test_count = eval_count;
  return spec;
}

inline void train_reproducibility_property(std::uint64_t seed) {
  const SyntheticData data = generate_synthetic(small_synthetic(seed, 24, 6, 0.1));
  TrainConfig config;
  config.lr = 1e-3;
  config.batch = 8;
  config.epochs = 3;
  config.seed = seed;
  const auto run = [&]() {
    Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, config.seed);
    return train(model, data.train, nullptr, config);
  };
  const TrainLog a = run();
  const TrainLog b = run();
  prop_require(a.epochs.size() == b.epochs.size(), "run lengths differ");
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    prop_require(a.epochs[e].loss.final == b.epochs[e].loss.final &&
                     a.epochs[e].loss.mtl == b.epochs[e].loss.mtl &&
                     a.epochs[e].loss.reg == b.epochs[e].loss.reg,
                 "same seed produced different loss sequences");
  }
}

inline void monotone_trend_property() {
  double epoch1 = 0, epoch10 = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const SyntheticData data = generate_synthetic(small_synthetic(seed, 60, 12, 0.1));
    Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, seed);
    TrainConfig config;
    config.lr = 1e-3;
    config.batch = 32;
    config.epochs = 10;
    config.seed = seed;
    const TrainLog log = train(model, data.train, nullptr, config);
    epoch1 += log.epochs.front().loss.final;
    epoch10 += log.epochs.back().loss.final;
  }
  prop_require(epoch10 / 3 < epoch1 / 3, "mean epoch-10 loss did not drop below epoch-1 loss");
}

inline void frozen_heads_reg_decrease_property(std::uint64_t seed) {
  const SyntheticData data = generate_synthetic(small_synthetic(seed, 8, 2, 0.1));
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, seed);
  for (auto& p : model.parameters()) {
    if (p.name.rfind("head.", 0) == 0) {
      std::fill(p.tensor->data().begin(), p.tensor->data().end(), real_t{0});
      model.frozen.insert(p.name);
    }
  }
  double last = model.l2();
  prop_require(last > 0, "expected nonzero parameters");
  for (int step = 0; step < 5; ++step) {
    autodiff::Tape tape;
    Model::Bound bound = model.bind(tape);
    std::vector<std::map<std::string, autodiff::Value>> preds;
    std::vector<TargetMap> targets;
    for (const auto& s : data.train.samples) {
      preds.push_back(model.forward(tape, bound, s.pixels));
      targets.push_back(s.targets);
    }
    BatchLoss loss = final_loss(tape, preds, targets, model.tasks, model.reg_weight, bound.ordered);
    sgd_step(model, tape.backward(loss.final_value), 0.05);
    const double now = model.l2();
    prop_require(now < last, "l2 did not strictly decrease under frozen heads");
    last = now;
  }
}

inline void checkpoint_roundtrip_property(std::uint64_t seed, const std::string& path) {
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, seed);
  CheckpointMeta meta;
  meta.optimizer = OptimizerKind::sgd;
  meta.seed = seed;
  save_checkpoint(model, nullptr, meta, path);
  const LoadedCheckpoint loaded = load_checkpoint(path);
  auto before = model.parameters();
  auto after = loaded.model.parameters();
  prop_require(before.size() == after.size(), "parameter count changed across the roundtrip");
  for (std::size_t i = 0; i < before.size(); ++i) {
    prop_require(before[i].name == after[i].name, "parameter order changed across the roundtrip");
    prop_require(*before[i].tensor == *after[i].tensor,
                 "parameter scalars changed across the roundtrip");
  }
  Lcg64 rng(seed);
  const Tensor image = random_tensor({16, 16, 1}, rng, 0, 1);
  prop_require(model.encode_tensor(image) == loaded.model.encode_tensor(image),
               "encode differs after checkpoint roundtrip");
}

// ----------------------------------------------------------------- metrics

inline metrics::TokenSeq random_tokens(Lcg64& rng, std::size_t min_len, std::size_t max_len,
                                       std::size_t vocab) {
  static const char* words[] = {"river",  "field", "road",  "house", "trees", "water",
                                "bridge", "roof",  "grass", "cars",  "path",  "sand"};
  metrics::TokenSeq tokens;
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  for (std::size_t i = 0; i < len; ++i) tokens.push_back(words[rng.below(std::min<std::size_t>(vocab, 12))]);
  return tokens;
}

inline void metric_reference_reorder_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const metrics::TokenSeq cand = random_tokens(rng, 3, 8, 6);
    std::vector<metrics::TokenSeq> refs;
    for (std::size_t r = 0; r < 2 + rng.below(3); ++r) refs.push_back(random_tokens(rng, 3, 8, 6));
    std::vector<metrics::TokenSeq> shuffled = refs;
    rng.shuffle(shuffled);
    for (int n = 1; n <= 4; ++n) {
      prop_require(metrics::bleu(cand, refs, n) == metrics::bleu(cand, shuffled, n),
                   "bleu changed under reference reordering");
    }
    prop_require(metrics::rouge_l(cand, refs) == metrics::rouge_l(cand, shuffled),
                 "rouge changed under reference reordering");
    prop_require(metrics::meteor_lite(cand, refs) == metrics::meteor_lite(cand, shuffled),
                 "meteor changed under reference reordering");
  }
}

inline void metric_range_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const metrics::TokenSeq cand = random_tokens(rng, 2, 9, 8);
    std::vector<metrics::TokenSeq> refs;
    for (std::size_t r = 0; r < 1 + rng.below(4); ++r) refs.push_back(random_tokens(rng, 2, 9, 8));
    for (int n = 1; n <= 4; ++n) {
      const double b = metrics::bleu(cand, refs, n);
      prop_require(b >= 0 && b <= 100, "bleu outside [0,100]");
    }
    const double r = metrics::rouge_l(cand, refs);
    const double m = metrics::meteor_lite(cand, refs);
    prop_require(r >= 0 && r <= 100, "rouge outside [0,100]");
    prop_require(m >= 0 && m <= 100, "meteor outside [0,100]");

    // candidate equal to one reference pins BLEU and ROUGE at 100
    const std::size_t pick = rng.below(refs.size());
    for (int n = 1; n <= 4; ++n) {
      if (refs[pick].size() < static_cast<std::size_t>(n)) continue;
      prop_require(close(metrics::bleu(refs[pick], refs, n), 100.0, 1e-9),
                   "bleu(candidate == reference) != 100");
    }
    prop_require(close(metrics::rouge_l(refs[pick], refs), 100.0, 1e-9),
                 "rouge(candidate == reference) != 100");
  }
}

inline void bleu_monotone_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    // candidate = reference with one mid-token replaced by the first token,
    // so every n-gram order keeps at least one match and no smoothing fires
    metrics::TokenSeq ref = random_tokens(rng, 10, 14, 10);
    metrics::TokenSeq cand = ref;
    cand[5] = ref[0];
    double prev = 1e9;
    for (int n = 1; n <= 4; ++n) {
      const double score = metrics::bleu(cand, {ref}, n);
      prop_require(score <= prev + 1e-9, "bleu increased with max_n");
      prev = score;
    }
  }
}

inline void cider_single_image_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    metrics::CaptionEntry entry;
    entry.id = "only";
    entry.candidate = random_tokens(rng, 2, 8, 8);
    for (std::size_t r = 0; r < 1 + rng.below(4); ++r)
      entry.references.push_back(random_tokens(rng, 2, 8, 8));
    prop_require(metrics::cider({entry}) == 0.0, "one-image corpus must score 0");
  }
}

inline void vqa_overall_identity_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    std::vector<metrics::VqaRecord> records;
    const std::size_t n = 20 + rng.below(100);
    for (std::size_t i = 0; i < n; ++i) {
      metrics::VqaRecord rec;
      rec.id = "q" + std::to_string(i);
      rec.category = static_cast<metrics::VqaCategory>(rng.below(4));
      rec.truth = "yes";
      rec.predicted = rng.below(2) ? "yes" : "no";
      records.push_back(std::move(rec));
    }
    const metrics::VqaReport report = metrics::vqa_accuracy(records);
    double weighted = 0;
    std::size_t total = 0;
    for (const auto& [cat, score] : report.categories) {
      weighted += score.percent() * static_cast<double>(score.total);
      total += score.total;
    }
    prop_require(close(report.overall, weighted / static_cast<double>(total), 1e-9),
                 "overall != record-weighted mean of category accuracies");
  }
}

inline void metric_purity_property(std::uint64_t seed, int cases) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const metrics::TokenSeq cand = random_tokens(rng, 2, 8, 8);
    const std::vector<metrics::TokenSeq> refs = {random_tokens(rng, 2, 8, 8),
                                                 random_tokens(rng, 2, 8, 8)};
    prop_require(metrics::bleu(cand, refs, 4) == metrics::bleu(cand, refs, 4),
                 "bleu is not pure");
    prop_require(metrics::rouge_l(cand, refs) == metrics::rouge_l(cand, refs),
                 "rouge is not pure");
    prop_require(metrics::meteor_lite(cand, refs) == metrics::meteor_lite(cand, refs),
                 "meteor is not pure");
  }
}

// ----------------------------------------------------------------- data-io

inline void image_roundtrip_property(std::uint64_t seed, int cases, const std::string& path) {
  Lcg64 rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t h = 1 + rng.below(8), w = 1 + rng.below(8);
    const std::size_t channels = rng.below(2) ? 3 : 1;
    Tensor image({h, w, channels});
    for (auto& v : image.data()) {
      v = static_cast<real_t>(rng.below(256)) / real_t{255};  // exact 8-bit grid
    }
    write_image(path, image);
    prop_require(load_image(path) == image, "8-bit image roundtrip is not exact");
  }
}

inline void split_disjointness_property(std::uint64_t seed) {
  const SyntheticData data = generate_synthetic(small_synthetic(seed, 30, 10, 0.1));
  validate_splits({&data.train_manifest, &data.val_manifest, &data.test_manifest});
  std::set<std::string> ids;
  std::size_t total = 0;
  for (const auto* m : {&data.train_manifest, &data.val_manifest, &data.test_manifest}) {
    for (const auto& s : m->samples) {
      ids.insert(s.id);
      ++total;
    }
  }
  prop_require(ids.size() == total, "split ids are not disjoint");
  prop_require(total == 50, "splits do not cover the declared sample set");
}

// At zero noise the class is fully determined by the mean intensity.
inline void synthetic_bayes_property(std::uint64_t seed) {
  SyntheticSpec spec = small_synthetic(seed, 60, 12, 0.0);
  const SyntheticData data = generate_synthetic(spec);
  for (const Dataset* split : {&data.train, &data.val, &data.test}) {
    for (const auto& sample : split->samples) {
      double mean = 0;
      for (real_t v : sample.pixels.data()) mean += v;
      mean /= static_cast<double>(sample.pixels.size());
      std::size_t best = 0;
      double best_gap = 1e9;
      for (std::size_t k = 0; k < spec.classes; ++k) {
        const double gap = std::abs(mean - (static_cast<double>(k) + 0.5) /
                                               static_cast<double>(spec.classes));
        if (gap < best_gap) {
          best_gap = gap;
          best = k;
        }
      }
      prop_require(best == std::get<std::size_t>(sample.targets.at("class")),
                   "mean intensity does not determine the class at zero noise");
    }
  }
}

}  // namespace snvt::testing
