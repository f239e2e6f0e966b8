#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "snvt/autodiff.hpp"
#include "snvt/tensor.hpp"

namespace snvt {

enum class TaskKind { classification, regression };

struct TaskSpec {
  std::string id;
  TaskKind kind = TaskKind::classification;
  std::size_t classes = 0;  // classification only
  double weight = 1.0;      // loss weight, > 0

  void validate() const;
  std::size_t output_arity() const {
    return kind == TaskKind::classification ? classes : 1;
  }
};

struct TaskSet {
  std::vector<TaskSpec> tasks;

  void validate() const;  // unique ids, at least one task
  const TaskSpec* find(const std::string& id) const;
  std::size_t size() const { return tasks.size(); }
};

// Ground truth for one sample: class index for classification tasks,
// real count for regression tasks. A sample may carry only a subset of
// the task set's targets.
using Target = std::variant<std::size_t, double>;
using TargetMap = std::map<std::string, Target>;

struct LossReport {
  std::vector<std::pair<std::string, double>> task_losses;  // task order
  double mtl = 0;     // sum of weight_t * loss_t
  double reg = 0;     // half sum of squared parameters
  double final = 0;   // mtl + reg_weight * reg
  double reg_weight = 0;
};

// Pooled head on top of the N x D encoder output: mean over patch rows,
// then an affine map; classification applies a row softmax, regression is
// the raw affine output.
autodiff::Value head_forward(autodiff::Value z_encoded, autodiff::Value weight,
                             autodiff::Value bias, TaskKind kind);

// -sum_c y_c log(p_c + 1e-12). Validates that p is a probability vector
// and y is one-hot; throws ContractError otherwise.
double cross_entropy(const std::vector<double>& probs, const std::vector<double>& onehot);

// mean of squared differences
double mse(const std::vector<double>& predicted, const std::vector<double>& truth);

// Weighted sum of per-task losses in task order. Every task in the set
// must have a loss entry.
double mtl_loss(const std::map<std::string, double>& task_losses, const TaskSet& tasks);

// Batch loss graph: per-task losses averaged over the samples that carry
// that task's target, the weighted multi-task sum, the half-sum-of-squares
// regularizer over the given parameter leaves, and the final objective.
struct BatchLoss {
  LossReport report;
  autodiff::Value final_value;
  autodiff::Value mtl_value;
  std::map<std::string, autodiff::Value> task_values;
};

BatchLoss final_loss(autodiff::Tape& tape,
                     const std::vector<std::map<std::string, autodiff::Value>>& predictions,
                     const std::vector<TargetMap>& targets, const TaskSet& tasks,
                     double reg_weight, const std::vector<autodiff::Value>& parameters);

std::vector<real_t> one_hot(std::size_t classes, std::size_t index);

}  // namespace snvt
