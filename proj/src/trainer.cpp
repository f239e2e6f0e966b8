#include "snvt/trainer.hpp"

#include <chrono>
#include <cmath>

#include "snvt/error.hpp"
#include "snvt/rng.hpp"
#include "snvt/threads.hpp"

namespace snvt {

EncoderConfig preset_encoder(Preset preset, std::size_t height, std::size_t width,
                             std::size_t channels) {
  EncoderConfig c;
  c.height = height;
  c.width = width;
  c.channels = channels;
  if (preset == Preset::desk) {
    c.layers = 2;
    c.dim = 16;
    c.heads = 2;
    c.patch = 4;
  } else {
    c.layers = 12;
    c.dim = 512;
    c.heads = 8;
    c.patch = 16;
  }
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  // lr == 0 is allowed as the degenerate "evaluate the loss, move nothing" run
  if (lr < 0) throw ConfigError("learning rate must be >= 0");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

void sgd_step(Model& model, const autodiff::GradMap& grads, double lr) {
  for (auto& p : model.parameters()) {
    if (model.frozen.count(p.name)) continue;
    auto it = grads.find(p.name);
    if (it == grads.end()) throw ContractError("sgd_step: no gradient for '" + p.name + "'");
    const Tensor& g = it->second;
    if (!g.all_finite()) throw DivergedError("sgd_step: gradient for '" + p.name + "' is not finite");
    for (std::size_t i = 0; i < p.tensor->size(); ++i) {
      (*p.tensor)[i] -= static_cast<real_t>(lr) * g[i];
    }
  }
}

void adam_step(Model& model, const autodiff::GradMap& grads, AdamState& state, double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto& p : model.parameters()) {
    auto it = grads.find(p.name);
    if (it == grads.end()) throw ContractError("adam_step: no gradient for '" + p.name + "'");
    const Tensor& g = it->second;
    if (!g.all_finite()) throw DivergedError("adam_step: gradient for '" + p.name + "' is not finite");
    Tensor& m = state.m.try_emplace(p.name, Tensor::zeros(p.tensor->shape())).first->second;
    Tensor& v = state.v.try_emplace(p.name, Tensor::zeros(p.tensor->shape())).first->second;
    const bool frozen = model.frozen.count(p.name) != 0;
    for (std::size_t i = 0; i < p.tensor->size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<real_t>(beta1 * m[i] + (1 - beta1) * gi);
      v[i] = static_cast<real_t>(beta2 * v[i] + (1 - beta2) * gi * gi);
      if (frozen) continue;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      (*p.tensor)[i] -= static_cast<real_t>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

namespace {

void add_losses(LossReport& total, const LossReport& step, double weight) {
  if (total.task_losses.empty()) {
    total.task_losses = step.task_losses;
    for (auto& [id, v] : total.task_losses) v *= weight;
  } else {
    for (std::size_t i = 0; i < total.task_losses.size(); ++i) {
      total.task_losses[i].second += weight * step.task_losses[i].second;
    }
  }
  total.mtl += weight * step.mtl;
  total.reg += weight * step.reg;
  total.final += weight * step.final;
  total.reg_weight = step.reg_weight;
}

}  // namespace

TrainLog train(Model& model, const Dataset& train_data, const Dataset* eval_data,
               const TrainConfig& config, AdamState* adam_state) {
  config.validate();
  if (train_data.empty()) throw ContractError("train: dataset is empty");

  AdamState local_state;
  AdamState& state = adam_state ? *adam_state : local_state;

  Lcg64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(train_data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);

    LossReport epoch_loss;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      ++step;
      const std::size_t take = std::min(config.batch, order.size() - start);

      autodiff::Tape tape;
      Model::Bound bound = model.bind(tape);
      std::vector<std::map<std::string, autodiff::Value>> predictions;
      std::vector<TargetMap> targets;
      predictions.reserve(take);
      targets.reserve(take);
      for (std::size_t i = 0; i < take; ++i) {
        const ImageSample& sample = train_data.samples[order[start + i]];
        predictions.push_back(model.forward(tape, bound, sample.pixels));
        targets.push_back(sample.targets);
      }
      BatchLoss loss = final_loss(tape, predictions, targets, model.tasks, model.reg_weight,
                                  bound.ordered);
      if (!std::isfinite(loss.report.final)) {
        throw DivergedError("training diverged at step " + std::to_string(step));
      }
      autodiff::GradMap grads = tape.backward(loss.final_value);
      if (config.optimizer == OptimizerKind::sgd) {
        sgd_step(model, grads, config.lr);
      } else {
        adam_step(model, grads, state, config.lr);
      }
      add_losses(epoch_loss, loss.report, static_cast<double>(take));
      seen += take;
    }

    const double inv = 1.0 / static_cast<double>(seen);
    for (auto& [id, v] : epoch_loss.task_losses) v *= inv;
    epoch_loss.mtl *= inv;
    epoch_loss.reg *= inv;
    epoch_loss.final *= inv;

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss;
    if (eval_data) stats.metrics = evaluate(model, *eval_data);
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(stats.loss.final)) {
      throw DivergedError("training diverged in epoch " + std::to_string(epoch));
    }
    log.epochs.push_back(std::move(stats));
  }
  return log;
}

std::map<std::string, double> evaluate(const Model& model, const Dataset& data) {
  if (data.empty()) throw ContractError("evaluate: dataset is empty");
  struct Tally {
    std::size_t correct = 0, labelled = 0;
    double abs_err = 0, rounded_abs_err = 0;
  };
  std::vector<std::map<std::string, Tally>> partial(data.size());

  parallel_for(data.size(), [&](std::size_t i) {
    const ImageSample& sample = data.samples[i];
    auto predictions = model.predict(sample.pixels);
    for (const auto& task : model.tasks.tasks) {
      auto target_it = sample.targets.find(task.id);
      if (target_it == sample.targets.end()) continue;
      Tally& tally = partial[i][task.id];
      ++tally.labelled;
      const Tensor& pred = predictions.at(task.id);
      if (task.kind == TaskKind::classification) {
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < pred.size(); ++c)
          if (pred[c] > pred[argmax]) argmax = c;
        if (argmax == std::get<std::size_t>(target_it->second)) ++tally.correct;
      } else {
        const double truth = std::get<double>(target_it->second);
        const double raw = pred[0];
        const double rounded = std::max(0.0, std::round(raw));
        tally.abs_err = std::abs(raw - truth);
        tally.rounded_abs_err = std::abs(rounded - truth);
      }
    }
  });

  std::map<std::string, Tally> totals;
  for (const auto& per_sample : partial) {
    for (const auto& [id, t] : per_sample) {
      Tally& total = totals[id];
      total.correct += t.correct;
      total.labelled += t.labelled;
      total.abs_err += t.abs_err;
      total.rounded_abs_err += t.rounded_abs_err;
    }
  }

  std::map<std::string, double> metrics;
  for (const auto& task : model.tasks.tasks) {
    auto it = totals.find(task.id);
    if (it == totals.end() || it->second.labelled == 0) continue;
    const Tally& t = it->second;
    const double n = static_cast<double>(t.labelled);
    if (task.kind == TaskKind::classification) {
      metrics[task.id + ".accuracy"] = static_cast<double>(t.correct) / n;
    } else {
      metrics[task.id + ".mae"] = t.abs_err / n;
      metrics[task.id + ".rounded_mae"] = t.rounded_abs_err / n;
    }
  }
  return metrics;
}

}  // namespace snvt
