#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "snvt/data_io.hpp"
#include "snvt/model.hpp"
#include "snvt/mtl.hpp"

namespace snvt {

enum class OptimizerKind { sgd, adam };
enum class Preset { desk, paper };

// desk: L=2, D=16, h=2, P=4. paper: L=12, D=512, h=8, P=16.
// Image dimensions come from the data.
EncoderConfig preset_encoder(Preset preset, std::size_t height, std::size_t width,
                             std::size_t channels);

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch = 32;
  std::size_t epochs = 50;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 1;
  Preset preset = Preset::desk;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  LossReport loss;        // sample-weighted means over the epoch's steps
  double wall_seconds = 0;
  std::map<std::string, double> metrics;  // filled when an eval set is given
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

struct AdamState {
  std::map<std::string, Tensor> m, v;
  std::size_t step = 0;
};

// p <- p - lr * g
void sgd_step(Model& model, const autodiff::GradMap& grads, double lr);
// bias-corrected first/second moment update, beta1=0.9, beta2=0.999, eps=1e-8
void adam_step(Model& model, const autodiff::GradMap& grads, AdamState& state, double lr);

// Mini-batch training against the final objective. Shuffles each epoch with
// the seeded generator; aborts with DivergedError if a loss or gradient goes
// non-finite. Returns one EpochStats per epoch.
TrainLog train(Model& model, const Dataset& train_data, const Dataset* eval_data,
               const TrainConfig& config, AdamState* adam_state = nullptr);

// Per-task metrics: "<task>.accuracy" for classification (argmax match),
// "<task>.mae" and "<task>.rounded_mae" for regression (predictions rounded
// to the nearest nonnegative integer for the latter). Forward passes may run
// in parallel across samples, capped by SNVT_THREADS.
std::map<std::string, double> evaluate(const Model& model, const Dataset& data);

}  // namespace snvt
