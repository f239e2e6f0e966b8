#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "snvt/checkpoint.hpp"
#include "snvt/error.hpp"
#include "snvt/trainer.hpp"
#include "properties.hpp"
#include "test_support.hpp"

using namespace snvt;
using namespace snvt::testing;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("presets pin the published dimensions") {
  const EncoderConfig desk = preset_encoder(Preset::desk, 16, 16, 1);
  CHECK(desk.layers == 2);
  CHECK(desk.dim == 16);
  CHECK(desk.heads == 2);
  CHECK(desk.patch == 4);
  const EncoderConfig paper = preset_encoder(Preset::paper, 256, 256, 3);
  CHECK(paper.layers == 12);
  CHECK(paper.dim == 512);
  CHECK(paper.heads == 8);
  CHECK(paper.patch == 16);
  CHECK(paper.patch_count() == 1024);
}

TEST_CASE("train config validation") {
  TrainConfig config;
  config.batch = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = TrainConfig{};
  config.lr = -1;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = TrainConfig{};
  config.epochs = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("sgd step: p=1, g=2, lr=0.1 gives 0.8; zero gradient is a no-op") {
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 51);
  auto refs = model.parameters();
  autodiff::GradMap grads;
  for (const auto& p : refs) grads[p.name] = Tensor::zeros(p.tensor->shape());
  const Model before = model;
  sgd_step(model, grads, 0.1);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(*refs[i].tensor == *before.parameters()[i].tensor);
  }

  (*refs.front().tensor)[0] = 1.0;
  grads[refs.front().name][0] = 2.0;
  sgd_step(model, grads, 0.1);
  CHECK(std::abs((*refs.front().tensor)[0] - 0.8) <= 1e-15);
}

TEST_CASE("adam first step moves by ~lr regardless of gradient scale") {
  for (double g : {1.0, 100.0, 0.01}) {
    Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 52);
    auto refs = model.parameters();
    autodiff::GradMap grads;
    for (const auto& p : refs) grads[p.name] = Tensor::full(p.tensor->shape(), static_cast<real_t>(g));
    Model before = model;
    auto before_refs = before.parameters();
    AdamState state;
    adam_step(model, grads, state, 1e-3);
    // first step: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps) ~ lr
    for (std::size_t i = 0; i < refs.size(); ++i) {
      for (std::size_t k = 0; k < refs[i].tensor->size(); ++k) {
        const double moved = (*before_refs[i].tensor)[k] - (*refs[i].tensor)[k];
        CHECK(std::abs(moved - 1e-3) <= 1e-3 * 1e-2);
      }
    }
    CHECK(state.step == 1);
  }
}

TEST_CASE("adam rejects NaN gradients as divergence") {
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 53);
  autodiff::GradMap grads;
  for (const auto& p : model.parameters()) grads[p.name] = Tensor::zeros(p.tensor->shape());
  grads.begin()->second[0] = std::nan("");
  AdamState state;
  CHECK_THROWS_AS(adam_step(model, grads, state, 1e-3), DivergedError);
}

TEST_CASE("zero learning rate leaves parameters untouched and the loss flat") {
  const SyntheticData data = generate_synthetic(small_synthetic(54, 16, 4, 0.1));
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 54);
  const Model before = model;
  TrainConfig config;
  config.lr = 0.0;
  config.batch = 8;
  config.epochs = 3;
  config.seed = 54;
  config.optimizer = OptimizerKind::sgd;
  const TrainLog log = train(model, data.train, nullptr, config);
  auto now = model.parameters();
  auto then = before.parameters();
  for (std::size_t i = 0; i < now.size(); ++i) CHECK(*now[i].tensor == *then[i].tensor);
  CHECK(std::abs(log.epochs.front().loss.final - log.epochs.back().loss.final) <= 1e-12);
}

TEST_CASE("a single sample is memorized to below 1e-2 cross entropy") {
  const SyntheticData data = generate_synthetic(small_synthetic(55, 1, 1, 0.0));
  Dataset one;
  one.samples.push_back(data.train.samples.front());
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.0, 55);
  TrainConfig config;
  config.lr = 1e-2;
  config.batch = 1;
  config.epochs = 300;
  config.seed = 55;
  const TrainLog log = train(model, one, nullptr, config);
  double class_loss = 1e9;
  for (const auto& [id, value] : log.epochs.back().loss.task_losses) {
    if (id == "class") class_loss = value;
  }
  CHECK(class_loss < 1e-2);
}

TEST_CASE("training diverges loudly when a parameter is poisoned") {
  const SyntheticData data = generate_synthetic(small_synthetic(56, 8, 2, 0.1));
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 56);
  (*model.parameters().front().tensor)[0] = std::nan("");
  TrainConfig config;
  config.epochs = 1;
  config.batch = 4;
  try {
    train(model, data.train, nullptr, config);
    FAIL("expected DivergedError");
  } catch (const DivergedError& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bit exact, with and without optimizer state") {
  const std::string path = temp_path("snvt_test_roundtrip.ckpt");
  CHECK_NOTHROW(checkpoint_roundtrip_property(57, path));

  // now with adam state from a short run
  const SyntheticData data = generate_synthetic(small_synthetic(58, 8, 2, 0.1));
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 58);
  TrainConfig config;
  config.epochs = 1;
  config.batch = 4;
  config.lr = 1e-3;
  config.seed = 58;
  AdamState adam;
  train(model, data.train, nullptr, config, &adam);
  CheckpointMeta meta;
  meta.optimizer = OptimizerKind::adam;
  meta.seed = 58;
  meta.step = adam.step;
  save_checkpoint(model, &adam, meta, path);
  const LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.meta.step == adam.step);
  CHECK(loaded.adam.step == adam.step);
  for (const auto& [name, tensor] : adam.m) CHECK(loaded.adam.m.at(name) == tensor);
  for (const auto& [name, tensor] : adam.v) CHECK(loaded.adam.v.at(name) == tensor);
  fs::remove(path);
}

TEST_CASE("truncated checkpoints fail with an offset and load no partial model") {
  const std::string path = temp_path("snvt_test_trunc.ckpt");
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 59);
  CheckpointMeta meta;
  save_checkpoint(model, nullptr, meta, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  // drop the last 100 bytes
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 100));
  out.close();
  CHECK_THROWS_AS(load_checkpoint(path), CorruptFileError);

  // bad magic
  std::string corrupted = bytes;
  corrupted[0] = 'X';
  out.open(path, std::ios::binary | std::ios::trunc);
  out.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
  out.close();
  try {
    load_checkpoint(path);
    FAIL("expected CorruptFileError");
  } catch (const CorruptFileError& e) {
    CHECK(e.offset() == 0);
  }
  fs::remove(path);
}

TEST_CASE("checkpoints refuse to load under a mismatched config") {
  const std::string path = temp_path("snvt_test_mismatch.ckpt");
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 60);
  CheckpointMeta meta;
  save_checkpoint(model, nullptr, meta, path);
  const LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK_NOTHROW(require_checkpoint_config(loaded, model.encoder, model.tasks));
  CHECK_THROWS_AS(
      require_checkpoint_config(loaded, preset_encoder(Preset::paper, 256, 256, 3), model.tasks),
      ConfigError);
  fs::remove(path);
}

TEST_CASE("evaluate reports accuracy and count error") {
  const SyntheticData data = generate_synthetic(small_synthetic(61, 12, 6, 0.1));
  Model model(preset_encoder(Preset::desk, 16, 16, 1), two_task_set(), 0.01, 61);
  const auto metrics = evaluate(model, data.val);
  CHECK(metrics.count("class.accuracy") == 1);
  CHECK(metrics.count("count.mae") == 1);
  CHECK(metrics.count("count.rounded_mae") == 1);
  CHECK(metrics.at("class.accuracy") >= 0.0);
  CHECK(metrics.at("class.accuracy") <= 1.0);
}

TEST_CASE("property: identical seeds give bitwise-identical loss sequences") {
  CHECK_NOTHROW(train_reproducibility_property(62));
}

TEST_CASE("property: epoch-10 loss beats epoch-1 loss over seeds 1..3") {
  CHECK_NOTHROW(monotone_trend_property());
}

TEST_CASE("property: frozen zero heads make training pure weight decay") {
  CHECK_NOTHROW(frozen_heads_reg_decrease_property(63));
}
