#include "snvt/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "snvt/checkpoint.hpp"
#include "snvt/data_io.hpp"
#include "snvt/error.hpp"
#include "snvt/gradcheck.hpp"
#include "snvt/metrics.hpp"
#include "snvt/model.hpp"
#include "snvt/serialize.hpp"
#include "snvt/trainer.hpp"

namespace snvt {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
}

std::string sig6(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Preset parse_preset(const std::string& name) {
  if (name == "desk") return Preset::desk;
  if (name == "paper") return Preset::paper;
  throw ValidationError("unknown preset '" + name + "' (want desk or paper)");
}

json gradcheck_json(const GradCheckReport& report) {
  json j;
  j["pass"] = report.pass;
  j["tolerance"] = report.tolerance;
  j["epsilon"] = report.epsilon;
  j["max_rel_error"] = report.max_rel_error;
  json params = json::array();
  for (const auto& p : report.params) {
    params.push_back(json{{"name", p.name},
                          {"checked", p.checked},
                          {"max_rel_error", p.max_rel_error}});
  }
  j["parameters"] = std::move(params);
  return j;
}

std::string gradcheck_table(const GradCheckReport& report) {
  std::ostringstream out;
  out << "parameter                 checked  max_rel_error\n";
  out << "------------------------  -------  -------------\n";
  for (const auto& p : report.params) {
    out << p.name;
    for (std::size_t i = p.name.size(); i < 26; ++i) out << ' ';
    std::string checked = std::to_string(p.checked);
    out << checked;
    for (std::size_t i = checked.size(); i < 9; ++i) out << ' ';
    out << sig6(p.max_rel_error) << "\n";
  }
  out << (report.pass ? "PASS" : "FAIL") << "  max_rel_error " << sig6(report.max_rel_error)
      << "  tolerance " << sig6(report.tolerance) << "  epsilon " << sig6(report.epsilon) << "\n";
  return out.str();
}

json trainlog_json(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    json tasks = json::object();
    for (const auto& [id, v] : e.loss.task_losses) tasks[id] = v;
    json metrics = json::object();
    for (const auto& [k, v] : e.metrics) metrics[k] = v;
    epochs.push_back(json{{"epoch", e.epoch},
                          {"task_losses", std::move(tasks)},
                          {"mtl", e.loss.mtl},
                          {"reg", e.loss.reg},
                          {"final", e.loss.final},
                          {"metrics", std::move(metrics)},
                          {"wall_seconds", e.wall_seconds}});
  }
  return json{{"epochs", std::move(epochs)}};
}

json eval_json(const std::map<std::string, double>& metrics) {
  json j = json::object();
  for (const auto& [k, v] : metrics) j[k] = v;
  return j;
}

std::string eval_table(const std::map<std::string, double>& metrics) {
  std::ostringstream out;
  out << "metric                    value\n";
  out << "------------------------  ----------\n";
  for (const auto& [k, v] : metrics) {
    out << k;
    for (std::size_t i = k.size(); i < 26; ++i) out << ' ';
    out << sig6(v) << "\n";
  }
  return out.str();
}

TaskSet gradcheck_tasks() {
  TaskSet tasks;
  tasks.tasks.push_back(TaskSpec{"class", TaskKind::classification, 3, 1.0});
  tasks.tasks.push_back(TaskSpec{"count", TaskKind::regression, 0, 1.0});
  return tasks;
}

int run_synth(const SyntheticSpec& spec, const std::string& out_dir, std::ostream& err) {
  SyntheticData data = generate_synthetic(spec);
  write_synthetic(data, out_dir);
  err << "wrote " << data.train.size() << "/" << data.val.size() << "/" << data.test.size()
      << " train/val/test samples to " << out_dir << "\n";
  return 0;
}

int run_gradcheck(Preset preset, double tol, double eps, std::uint64_t seed,
                  std::size_t samples_per_tensor, const std::string& json_path,
                  std::ostream& out, std::ostream& err) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.train_count = 4;
  spec.val_count = 1;
  spec.test_count = 1;
  SyntheticData data = generate_synthetic(spec);

  EncoderConfig encoder = preset_encoder(preset, spec.image_size, spec.image_size, spec.channels);
  Model model(encoder, gradcheck_tasks(), 0.01, seed);

  std::vector<const ImageSample*> batch;
  for (const auto& s : data.train.samples) batch.push_back(&s);

  const auto build = [&](autodiff::Tape& tape) {
    Model::Bound bound = model.bind(tape);
    std::vector<std::map<std::string, autodiff::Value>> preds;
    std::vector<TargetMap> targets;
    for (const auto* s : batch) {
      preds.push_back(model.forward(tape, bound, s->pixels));
      targets.push_back(s->targets);
    }
    return final_loss(tape, preds, targets, model.tasks, model.reg_weight, bound.ordered);
  };
  const auto loss_value = [&]() {
    autodiff::Tape tape;
    return build(tape).report.final;
  };
  const auto analytic = [&]() {
    autodiff::Tape tape;
    BatchLoss loss = build(tape);
    return tape.backward(loss.final_value);
  };

  err << "gradient check over " << model.scalar_count() << " parameters ("
      << batch.size() << "-sample batch)\n";
  GradCheckReport report =
      gradcheck(model.parameters(), loss_value, analytic, eps, tol, seed, samples_per_tensor);
  out << gradcheck_table(report);
  if (!json_path.empty()) write_text(json_path, gradcheck_json(report).dump(2));
  return report.pass ? 0 : 2;
}

int run_train(const std::string& manifest_path, const std::string& eval_manifest_path,
              Preset preset, const TrainConfig& config, const std::string& checkpoint_out,
              const std::string& json_path, std::ostream& out, std::ostream& err) {
  DatasetManifest manifest = load_manifest(manifest_path);
  Dataset train_data = load_dataset(manifest);

  Dataset eval_data;
  bool have_eval = false;
  if (!eval_manifest_path.empty()) {
    DatasetManifest eval_manifest = load_manifest(eval_manifest_path);
    validate_splits({&manifest, &eval_manifest});
    eval_data = load_dataset(eval_manifest);
    have_eval = true;
  }

  EncoderConfig encoder = preset_encoder(preset, manifest.encoder.height,
                                         manifest.encoder.width, manifest.encoder.channels);
  double reg_weight = 0.01;
  Model model(encoder, manifest.tasks, reg_weight, config.seed);

  err << "training " << model.scalar_count() << " parameters on " << train_data.size()
      << " samples, " << config.epochs << " epochs\n";
  AdamState adam;
  TrainLog log = train(model, train_data, have_eval ? &eval_data : nullptr, config, &adam);
  for (const auto& e : log.epochs) {
    err << "epoch " << e.epoch << "  final " << sig6(e.loss.final);
    for (const auto& [k, v] : e.metrics) err << "  " << k << " " << sig6(v);
    err << "\n";
  }

  if (!checkpoint_out.empty()) {
    CheckpointMeta meta;
    meta.optimizer = config.optimizer;
    meta.seed = config.seed;
    meta.step = adam.step;
    save_checkpoint(model, config.optimizer == OptimizerKind::adam ? &adam : nullptr, meta,
                    checkpoint_out);
    err << "checkpoint written to " << checkpoint_out << "\n";
  }

  const json j = trainlog_json(log);
  if (!json_path.empty()) write_text(json_path, j.dump(2));
  if (!log.epochs.empty()) {
    out << "final loss " << sig6(log.epochs.back().loss.final) << " after "
        << log.epochs.size() << " epochs\n";
  }
  return 0;
}

int run_eval(const std::string& manifest_path, const std::string& checkpoint_path,
             const std::string& json_path, std::ostream& out, std::ostream& err) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  DatasetManifest manifest = load_manifest(manifest_path);
  if (manifest.encoder.height != loaded.model.encoder.height ||
      manifest.encoder.width != loaded.model.encoder.width ||
      manifest.encoder.channels != loaded.model.encoder.channels) {
    throw ConfigError("manifest images are " +
                      shape_str({manifest.encoder.height, manifest.encoder.width,
                                 manifest.encoder.channels}) +
                      " but the checkpoint expects " +
                      shape_str({loaded.model.encoder.height, loaded.model.encoder.width,
                                 loaded.model.encoder.channels}));
  }
  Dataset data = load_dataset(manifest);
  err << "evaluating " << data.size() << " samples\n";
  const auto metrics = evaluate(loaded.model, data);
  out << eval_table(metrics);
  if (!json_path.empty()) write_text(json_path, eval_json(metrics).dump(2));
  return 0;
}

int run_metrics(const std::string& captions_path, const std::string& vqa_path,
                const std::string& json_path, std::ostream& out, std::ostream& err) {
  if (captions_path.empty() == vqa_path.empty()) {
    throw ValidationError("metrics: give exactly one of --captions or --vqa");
  }
  if (!captions_path.empty()) {
    const auto corpus = metrics::read_caption_jsonl(captions_path);
    err << "scoring " << corpus.size() << " caption records\n";
    const auto report = metrics::score_captions(corpus);
    out << metrics::render_caption_table(report);
    if (!json_path.empty()) write_text(json_path, metrics::caption_report_json(report));
  } else {
    const auto records = metrics::read_vqa_jsonl(vqa_path);
    err << "scoring " << records.size() << " vqa records\n";
    const auto report = metrics::vqa_accuracy(records);
    out << metrics::render_vqa_table(report);
    if (!json_path.empty()) write_text(json_path, metrics::vqa_report_json(report));
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vision-transformer multi-task trainer and metric suite"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic dataset");
  SyntheticSpec spec;
  std::string synth_out;
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--classes", spec.classes, "number of classes");
  synth->add_option("--count-max", spec.count_max, "largest block count");
  synth->add_option("--noise", spec.noise, "pixel noise amplitude, [0, 0.5)");
  synth->add_option("--image-size", spec.image_size, "square image edge");
  synth->add_option("--block", spec.block, "bright block edge");
  synth->add_option("--train-count", spec.train_count, "train split size");
  synth->add_option("--val-count", spec.val_count, "val split size");
  synth->add_option("--test-count", spec.test_count, "test split size");
  synth->add_option("--out", synth_out, "output directory")->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "compare analytic gradients to finite differences");
  std::string grad_preset = "desk";
  double grad_tol = 1e-3, grad_eps = 1e-3;
  std::uint64_t grad_seed = 1;
  std::size_t grad_samples = 16;
  std::string grad_json;
  grad->add_option("--preset", grad_preset, "desk or paper");
  grad->add_option("--tol", grad_tol, "relative-error tolerance");
  grad->add_option("--eps", grad_eps, "finite-difference step");
  grad->add_option("--seed", grad_seed, "seed for data, init and subsampling");
  grad->add_option("--samples", grad_samples, "scalars checked per tensor (min)");
  grad->add_option("--json", grad_json, "also write the report as JSON");

  // train
  auto* tr = app.add_subcommand("train", "train a model against a manifest");
  std::string train_manifest, eval_manifest, checkpoint_out, train_json;
  std::string train_preset = "desk", train_opt = "adam";
  TrainConfig tconfig;
  tr->add_option("--manifest", train_manifest, "training-split manifest")->required();
  tr->add_option("--eval-manifest", eval_manifest, "held-out manifest for per-epoch metrics");
  tr->add_option("--preset", train_preset, "desk or paper");
  tr->add_option("--lr", tconfig.lr, "learning rate");
  tr->add_option("--batch", tconfig.batch, "batch size");
  tr->add_option("--epochs", tconfig.epochs, "epochs");
  tr->add_option("--seed", tconfig.seed, "seed for init and shuffling");
  tr->add_option("--optimizer", train_opt, "adam or sgd");
  tr->add_option("--checkpoint-out", checkpoint_out, "checkpoint output path");
  tr->add_option("--json", train_json, "also write the training log as JSON");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint against a manifest");
  std::string eval_manifest_path, eval_checkpoint, eval_json_path;
  ev->add_option("--manifest", eval_manifest_path, "manifest to evaluate")->required();
  ev->add_option("--checkpoint", eval_checkpoint, "checkpoint to load")->required();
  ev->add_option("--json", eval_json_path, "also write the report as JSON");

  // metrics
  auto* me = app.add_subcommand("metrics", "score caption or vqa prediction files");
  std::string captions_path, vqa_path, metrics_json;
  me->add_option("--captions", captions_path, "caption JSONL file");
  me->add_option("--vqa", vqa_path, "vqa JSONL file");
  me->add_option("--json", metrics_json, "also write the report as JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return 0;
    }
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(spec, synth_out, err);
    if (grad->parsed()) {
      return run_gradcheck(parse_preset(grad_preset), grad_tol, grad_eps, grad_seed,
                           grad_samples, grad_json, out, err);
    }
    if (tr->parsed()) {
      if (train_opt == "sgd") {
        tconfig.optimizer = OptimizerKind::sgd;
      } else if (train_opt == "adam") {
        tconfig.optimizer = OptimizerKind::adam;
      } else {
        throw ValidationError("unknown optimizer '" + train_opt + "'");
      }
      tconfig.preset = parse_preset(train_preset);
      return run_train(train_manifest, eval_manifest, tconfig.preset, tconfig, checkpoint_out,
                       train_json, out, err);
    }
    if (ev->parsed()) return run_eval(eval_manifest_path, eval_checkpoint, eval_json_path, out, err);
    if (me->parsed()) return run_metrics(captions_path, vqa_path, metrics_json, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace snvt
