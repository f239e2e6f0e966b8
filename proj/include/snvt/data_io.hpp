#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snvt/encoder.hpp"
#include "snvt/mtl.hpp"
#include "snvt/tensor.hpp"

namespace snvt {

// One decoded training sample: pixels scaled to [0,1], plus whatever task
// targets the manifest carried for it.
struct ImageSample {
  std::string id;
  Tensor pixels;  // H x W x C
  TargetMap targets;
};

struct Dataset {
  std::vector<ImageSample> samples;
  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

struct ManifestSample {
  std::string id;
  std::string image;  // path relative to the manifest file
  TargetMap targets;
  std::vector<std::string> captions;
  std::vector<std::string> questions;
};

struct DatasetManifest {
  std::string name;
  std::string split;  // "train" | "val" | "test"
  EncoderConfig encoder;
  TaskSet tasks;
  std::vector<ManifestSample> samples;
  std::string base_dir;  // directory of the manifest file; not serialized

  // Unique sample ids, known task ids, target kinds matching task kinds.
  // Collects every offender into one error message.
  void validate() const;
};

// Binary PGM (P5) / PPM (P6), 8-bit, maxval 255. Pixels come back as
// value / 255 in row-major H x W x C.
Tensor load_image(const std::string& path);
// Inverse writer: C=1 -> P5, C=3 -> P6, bytes round(v * 255) clamped.
void write_image(const std::string& path, const Tensor& image);

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

// Decodes every sample; image dimensions must match the manifest's encoder.
Dataset load_dataset(const DatasetManifest& manifest);

// Splits must have pairwise-disjoint sample ids.
void validate_splits(const std::vector<const DatasetManifest*>& manifests);

// Deterministic synthetic data: class k has base intensity (k+0.5)/K, the
// count task adds m bright block x block squares (m uniform in
// [0, count_max]), then uniform noise in [-noise, noise], clamped to [0,1].
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::size_t image_size = 16;
  std::size_t channels = 1;
  std::size_t classes = 3;
  std::size_t count_max = 3;
  std::size_t block = 4;
  double noise = 0.1;
  std::size_t train_count = 300;
  std::size_t val_count = 60;
  std::size_t test_count = 60;

  void validate() const;
};

struct SyntheticData {
  DatasetManifest train_manifest, val_manifest, test_manifest;
  Dataset train, val, test;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);
// Writes images/<id>.pgm|.ppm plus train.json / val.json / test.json.
void write_synthetic(const SyntheticData& data, const std::string& out_dir);

}  // namespace snvt
