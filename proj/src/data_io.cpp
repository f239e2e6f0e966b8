#include "snvt/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "snvt/error.hpp"
#include "snvt/rng.hpp"
#include "snvt/serialize.hpp"

namespace snvt {

namespace fs = std::filesystem;

namespace {

// Reads one whitespace-delimited unsigned decimal token. The format allows
// no comments, so anything that is not a digit is a hard error.
std::size_t read_pnm_int(const std::string& bytes, std::size_t& pos, const std::string& path) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    throw CorruptFileError(path + ": malformed header", pos);
  }
  std::size_t value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    ++pos;
  }
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

Tensor load_image(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw CorruptFileError(path + ": unsupported magic (want P5 or P6)", 0);
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const std::size_t width = read_pnm_int(bytes, pos, path);
  const std::size_t height = read_pnm_int(bytes, pos, path);
  const std::size_t maxval = read_pnm_int(bytes, pos, path);
  if (maxval != 255) {
    throw CorruptFileError(path + ": only 8-bit images (maxval 255) are supported", pos);
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw CorruptFileError(path + ": malformed header", pos);
  }
  ++pos;  // single whitespace byte separates header and payload
  const std::size_t need = height * width * channels;
  if (bytes.size() - pos < need) {
    throw CorruptFileError(path + ": truncated payload, need " + std::to_string(need) +
                               " bytes but only " + std::to_string(bytes.size() - pos) +
                               " remain",
                           bytes.size());
  }
  Tensor image({height, width, channels});
  for (std::size_t i = 0; i < need; ++i) {
    image[i] = static_cast<real_t>(static_cast<unsigned char>(bytes[pos + i])) / real_t{255};
  }
  return image;
}

void write_image(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw DimensionError("write_image: expected H x W x 1 or H x W x 3, got " +
                         shape_str(image.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << (image.dim(2) == 1 ? "P5" : "P6") << "\n"
      << image.dim(1) << " " << image.dim(0) << "\n255\n";
  for (real_t v : image.data()) {
    const long byte = std::lround(std::clamp<real_t>(v, 0, 1) * 255);
    out.put(static_cast<char>(static_cast<unsigned char>(byte)));
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

void DatasetManifest::validate() const {
  tasks.validate();
  encoder.validate();
  if (split != "train" && split != "val" && split != "test") {
    throw ValidationError("manifest split must be train/val/test, got '" + split + "'");
  }
  if (samples.empty()) throw ValidationError("manifest has no samples");

  std::vector<std::string> problems;
  std::vector<std::string> seen;
  for (const auto& sample : samples) {
    if (std::find(seen.begin(), seen.end(), sample.id) != seen.end()) {
      problems.push_back("duplicate sample id '" + sample.id + "'");
    }
    seen.push_back(sample.id);
    for (const auto& [task_id, target] : sample.targets) {
      const TaskSpec* task = tasks.find(task_id);
      if (!task) {
        problems.push_back("sample '" + sample.id + "' targets unknown task '" + task_id + "'");
        continue;
      }
      if (task->kind == TaskKind::classification) {
        const auto* cls = std::get_if<std::size_t>(&target);
        if (!cls) {
          problems.push_back("sample '" + sample.id + "': task '" + task_id +
                             "' needs an integer class index");
        } else if (*cls >= task->classes) {
          problems.push_back("sample '" + sample.id + "': class " + std::to_string(*cls) +
                             " out of range for task '" + task_id + "'");
        }
      } else if (!std::get_if<double>(&target)) {
        problems.push_back("sample '" + sample.id + "': task '" + task_id +
                           "' needs a real target");
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "manifest validation failed:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

namespace {

json targets_to_json(const TargetMap& targets, const TaskSet& tasks) {
  json j = json::object();
  for (const auto& [id, target] : targets) {
    if (const auto* cls = std::get_if<std::size_t>(&target)) {
      j[id] = *cls;
    } else {
      j[id] = std::get<double>(target);
    }
    (void)tasks;
  }
  return j;
}

TargetMap targets_from_json(const json& j, const TaskSet& tasks, const std::string& sample_id) {
  TargetMap targets;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const TaskSpec* task = tasks.find(it.key());
    // Unknown ids / wrong kinds are reported by validate(); here we only
    // need a faithful decode.
    bool want_class = task && task->kind == TaskKind::classification;
    if (want_class && it.value().is_number_unsigned()) {
      targets[it.key()] = it.value().get<std::size_t>();
    } else if (it.value().is_number()) {
      targets[it.key()] = it.value().get<double>();
    } else {
      throw ValidationError("sample '" + sample_id + "': target '" + it.key() +
                            "' is not a number");
    }
  }
  return targets;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  DatasetManifest manifest;
  try {
    manifest.name = j.at("name").get<std::string>();
    manifest.split = j.at("split").get<std::string>();
    manifest.encoder = encoder_from_json(j.at("encoder"));
    manifest.tasks = tasks_from_json(j.at("tasks"));
    for (const auto& js : j.at("samples")) {
      ManifestSample sample;
      sample.id = js.at("id").get<std::string>();
      sample.image = js.at("image").get<std::string>();
      sample.targets = targets_from_json(js.value("targets", json::object()), manifest.tasks,
                                         sample.id);
      for (const auto& c : js.value("captions", json::array()))
        sample.captions.push_back(c.get<std::string>());
      for (const auto& q : js.value("questions", json::array()))
        sample.questions.push_back(q.get<std::string>());
      manifest.samples.push_back(std::move(sample));
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest '" + path + "' is missing fields: " + e.what());
  }
  manifest.base_dir = fs::path(path).parent_path().string();
  manifest.validate();

  std::vector<std::string> missing;
  for (const auto& sample : manifest.samples) {
    const fs::path img = fs::path(manifest.base_dir) / sample.image;
    if (!fs::exists(img)) missing.push_back(img.string());
  }
  if (!missing.empty()) {
    std::string msg = "manifest references missing images:";
    for (const auto& m : missing) msg += "\n  - " + m;
    throw ValidationError(msg);
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  json j;
  j["name"] = manifest.name;
  j["split"] = manifest.split;
  j["encoder"] = to_json(manifest.encoder);
  j["tasks"] = to_json(manifest.tasks);
  json samples = json::array();
  for (const auto& sample : manifest.samples) {
    json js;
    js["id"] = sample.id;
    js["image"] = sample.image;
    js["targets"] = targets_to_json(sample.targets, manifest.tasks);
    if (!sample.captions.empty()) js["captions"] = sample.captions;
    if (!sample.questions.empty()) js["questions"] = sample.questions;
    samples.push_back(std::move(js));
  }
  j["samples"] = std::move(samples);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

Dataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  Dataset dataset;
  for (const auto& sample : manifest.samples) {
    const fs::path img_path = fs::path(manifest.base_dir) / sample.image;
    Tensor pixels = load_image(img_path.string());
    const std::vector<std::size_t> expected = {manifest.encoder.height, manifest.encoder.width,
                                               manifest.encoder.channels};
    if (pixels.shape() != expected) {
      throw ValidationError("image '" + img_path.string() + "' is " + shape_str(pixels.shape()) +
                            " but the manifest declares " + shape_str(expected));
    }
    dataset.samples.push_back(ImageSample{sample.id, std::move(pixels), sample.targets});
  }
  return dataset;
}

void validate_splits(const std::vector<const DatasetManifest*>& manifests) {
  std::vector<std::string> problems;
  for (std::size_t a = 0; a < manifests.size(); ++a) {
    for (std::size_t b = a + 1; b < manifests.size(); ++b) {
      for (const auto& sa : manifests[a]->samples) {
        for (const auto& sb : manifests[b]->samples) {
          if (sa.id == sb.id) {
            problems.push_back("sample '" + sa.id + "' appears in both " + manifests[a]->split +
                               " and " + manifests[b]->split);
          }
        }
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "split overlap:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw ValidationError("synthetic spec: need at least 2 classes");
  if (noise < 0 || noise >= 0.5) throw ValidationError("synthetic spec: noise must be in [0, 0.5)");
  if (channels != 1 && channels != 3) throw ValidationError("synthetic spec: channels must be 1 or 3");
  if (image_size == 0 || block == 0 || image_size % block != 0) {
    throw ValidationError("synthetic spec: image size must be a positive multiple of the block size");
  }
  if (train_count == 0) throw ValidationError("synthetic spec: train split must be nonempty");
}

namespace {

TaskSet synthetic_tasks(const SyntheticSpec& spec) {
  TaskSet tasks;
  tasks.tasks.push_back(TaskSpec{"class", TaskKind::classification, spec.classes, 1.0});
  tasks.tasks.push_back(TaskSpec{"count", TaskKind::regression, 0, 1.0});
  return tasks;
}

EncoderConfig synthetic_encoder(const SyntheticSpec& spec) {
  EncoderConfig c;  // desk-scale defaults: L=2, D=16, h=2, P=4
  c.height = spec.image_size;
  c.width = spec.image_size;
  c.channels = spec.channels;
  return c;
}

ImageSample make_sample(const SyntheticSpec& spec, const std::string& id, std::size_t label,
                        Lcg64& rng) {
  const double base = (static_cast<double>(label) + 0.5) / static_cast<double>(spec.classes);
  Tensor pixels = Tensor::full({spec.image_size, spec.image_size, spec.channels},
                               static_cast<real_t>(base));

  const std::size_t count = rng.below(spec.count_max + 1);
  const std::size_t grid = spec.image_size / spec.block;
  std::vector<std::size_t> cells(grid * grid);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(cells[i], cells[i + rng.below(cells.size() - i)]);
  }
  const real_t bright = static_cast<real_t>(std::min(1.0, base + 0.4));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r0 = (cells[i] / grid) * spec.block;
    const std::size_t c0 = (cells[i] % grid) * spec.block;
    for (std::size_t r = 0; r < spec.block; ++r)
      for (std::size_t c = 0; c < spec.block; ++c)
        for (std::size_t ch = 0; ch < spec.channels; ++ch)
          pixels.at(r0 + r, c0 + c, ch) = bright;
  }
  if (spec.noise > 0) {
    for (auto& v : pixels.data()) {
      v = std::clamp<real_t>(v + static_cast<real_t>(rng.uniform(-spec.noise, spec.noise)), 0, 1);
    }
  }
  ImageSample sample;
  sample.id = id;
  sample.pixels = std::move(pixels);
  sample.targets["class"] = label;
  sample.targets["count"] = static_cast<double>(count);
  return sample;
}

void fill_split(const SyntheticSpec& spec, const std::string& split, std::size_t count,
                Lcg64& rng, Dataset& dataset, DatasetManifest& manifest) {
  manifest.name = "synthetic";
  manifest.split = split;
  manifest.encoder = synthetic_encoder(spec);
  manifest.tasks = synthetic_tasks(spec);
  const char* ext = spec.channels == 1 ? ".pgm" : ".ppm";
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % spec.classes;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04llu", static_cast<unsigned long long>(i));
    const std::string id = "synth-" + split + "-" + buf;
    ImageSample sample = make_sample(spec, id, label, rng);
    ManifestSample ms;
    ms.id = id;
    ms.image = "images/" + id + ext;
    ms.targets = sample.targets;
    manifest.samples.push_back(std::move(ms));
    dataset.samples.push_back(std::move(sample));
  }
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Lcg64 rng(spec.seed);
  SyntheticData data;
  fill_split(spec, "train", spec.train_count, rng, data.train, data.train_manifest);
  fill_split(spec, "val", spec.val_count, rng, data.val, data.val_manifest);
  fill_split(spec, "test", spec.test_count, rng, data.test, data.test_manifest);
  return data;
}

void write_synthetic(const SyntheticData& data, const std::string& out_dir) {
  const fs::path root(out_dir);
  fs::create_directories(root / "images");
  auto write_split = [&](const Dataset& dataset, const DatasetManifest& manifest,
                         const std::string& file) {
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      write_image((root / manifest.samples[i].image).string(), dataset.samples[i].pixels);
    }
    save_manifest(manifest, (root / file).string());
  };
  write_split(data.train, data.train_manifest, "train.json");
  if (!data.val.empty()) write_split(data.val, data.val_manifest, "val.json");
  if (!data.test.empty()) write_split(data.test, data.test_manifest, "test.json");
}

}  // namespace snvt
