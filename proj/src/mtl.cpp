#include "snvt/mtl.hpp"

#include <cmath>

#include "snvt/error.hpp"

namespace snvt {

namespace {
constexpr double kLogEps = 1e-12;
}

void TaskSpec::validate() const {
  if (id.empty()) throw ValidationError("task id must be nonempty");
  if (weight <= 0) throw ValidationError("task '" + id + "': loss weight must be > 0");
  if (kind == TaskKind::classification && classes < 2) {
    throw ValidationError("task '" + id + "': classification needs at least 2 classes");
  }
}

void TaskSet::validate() const {
  if (tasks.empty()) throw ValidationError("task set must contain at least one task");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].validate();
    for (std::size_t j = i + 1; j < tasks.size(); ++j) {
      if (tasks[i].id == tasks[j].id) {
        throw ValidationError("duplicate task id '" + tasks[i].id + "'");
      }
    }
  }
}

const TaskSpec* TaskSet::find(const std::string& id) const {
  for (const auto& t : tasks)
    if (t.id == id) return &t;
  return nullptr;
}

std::vector<real_t> one_hot(std::size_t classes, std::size_t index) {
  if (index >= classes) {
    throw ContractError("class index " + std::to_string(index) + " out of range for " +
                        std::to_string(classes) + " classes");
  }
  std::vector<real_t> y(classes, 0);
  y[index] = 1;
  return y;
}

autodiff::Value head_forward(autodiff::Value z_encoded, autodiff::Value weight,
                             autodiff::Value bias, TaskKind kind) {
  autodiff::Value pooled = autodiff::mean_rows(z_encoded);
  autodiff::Value logits =
      autodiff::add_row_bias(autodiff::matmul(pooled, weight), bias);
  if (kind == TaskKind::classification) return autodiff::softmax_rows(logits);
  return logits;
}

double cross_entropy(const std::vector<double>& probs, const std::vector<double>& onehot) {
  if (probs.size() != onehot.size() || probs.empty()) {
    throw DimensionError("cross_entropy: length mismatch, " + std::to_string(probs.size()) +
                         " vs " + std::to_string(onehot.size()));
  }
  double total = 0;
  std::size_t ones = 0;
  for (double y : onehot) {
    if (y == 1.0) {
      ++ones;
    } else if (y != 0.0) {
      throw ContractError("cross_entropy: target is not one-hot");
    }
  }
  if (ones != 1) throw ContractError("cross_entropy: target is not one-hot");
  for (double p : probs) {
    if (p < -1e-9 || p > 1 + 1e-9) throw ContractError("cross_entropy: probabilities outside [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ContractError("cross_entropy: probabilities sum to " + std::to_string(total));
  }
  double loss = 0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (onehot[c] != 0.0) loss -= onehot[c] * std::log(probs[c] + kLogEps);
  }
  return loss;
}

double mse(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw DimensionError("mse: length mismatch, " + std::to_string(predicted.size()) + " vs " +
                         std::to_string(truth.size()));
  }
  double total = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    total += d * d;
  }
  return total / static_cast<double>(predicted.size());
}

double mtl_loss(const std::map<std::string, double>& task_losses, const TaskSet& tasks) {
  tasks.validate();
  double total = 0;
  for (const auto& task : tasks.tasks) {
    auto it = task_losses.find(task.id);
    if (it == task_losses.end()) {
      throw ContractError("mtl_loss: no loss value for task '" + task.id + "'");
    }
    total += task.weight * it->second;
  }
  return total;
}

BatchLoss final_loss(autodiff::Tape& tape,
                     const std::vector<std::map<std::string, autodiff::Value>>& predictions,
                     const std::vector<TargetMap>& targets, const TaskSet& tasks,
                     double reg_weight, const std::vector<autodiff::Value>& parameters) {
  tasks.validate();
  if (predictions.empty()) throw ContractError("final_loss: empty batch");
  if (predictions.size() != targets.size()) {
    throw ContractError("final_loss: " + std::to_string(predictions.size()) +
                        " predictions vs " + std::to_string(targets.size()) + " target rows");
  }
  if (reg_weight < 0) throw ContractError("final_loss: reg weight must be >= 0");

  BatchLoss out;
  out.report.reg_weight = reg_weight;

  // Per-task batch mean over the samples that carry the task's target, so a
  // task's weight means the same thing regardless of batch composition.
  std::vector<autodiff::Value> task_nodes;
  std::vector<real_t> task_weights;
  for (const auto& task : tasks.tasks) {
    std::vector<autodiff::Value> sample_losses;
    for (std::size_t s = 0; s < predictions.size(); ++s) {
      auto target_it = targets[s].find(task.id);
      if (target_it == targets[s].end()) continue;  // partial labels contribute nothing
      auto pred_it = predictions[s].find(task.id);
      if (pred_it == predictions[s].end()) {
        throw ContractError("final_loss: sample " + std::to_string(s) +
                            " has no prediction for task '" + task.id + "'");
      }
      if (task.kind == TaskKind::classification) {
        const auto* cls = std::get_if<std::size_t>(&target_it->second);
        if (!cls) throw ContractError("final_loss: task '" + task.id + "' expects a class index");
        sample_losses.push_back(
            autodiff::cross_entropy(pred_it->second, one_hot(task.classes, *cls)));
      } else {
        const auto* count = std::get_if<double>(&target_it->second);
        if (!count) throw ContractError("final_loss: task '" + task.id + "' expects a real target");
        sample_losses.push_back(
            autodiff::mse(pred_it->second, {static_cast<real_t>(*count)}));
      }
    }
    autodiff::Value task_value;
    if (sample_losses.empty()) {
      task_value = tape.constant(Tensor::scalar(0));
    } else {
      const real_t inv = real_t{1} / static_cast<real_t>(sample_losses.size());
      task_value = autodiff::weighted_sum(
          sample_losses, std::vector<real_t>(sample_losses.size(), inv));
    }
    out.task_values[task.id] = task_value;
    out.report.task_losses.emplace_back(task.id, task_value.scalar());
    task_nodes.push_back(task_value);
    task_weights.push_back(static_cast<real_t>(task.weight));
  }

  out.mtl_value = autodiff::weighted_sum(task_nodes, task_weights);
  out.report.mtl = out.mtl_value.scalar();

  // L2 regularizer: half the sum of squares over every learned scalar.
  autodiff::Value reg_value;
  if (parameters.empty()) {
    reg_value = tape.constant(Tensor::scalar(0));
  } else {
    std::vector<autodiff::Value> squares;
    squares.reserve(parameters.size());
    for (const auto& p : parameters) squares.push_back(autodiff::sum_squares(p));
    reg_value = autodiff::weighted_sum(
        squares, std::vector<real_t>(squares.size(), static_cast<real_t>(0.5)));
  }
  out.report.reg = reg_value.scalar();

  out.final_value = autodiff::weighted_sum({out.mtl_value, reg_value},
                                           {1, static_cast<real_t>(reg_weight)});
  out.report.final = out.final_value.scalar();
  return out;
}

}  // namespace snvt
