#pragma once

#include <cstdint>
#include <string>

#include "snvt/model.hpp"
#include "snvt/trainer.hpp"

namespace snvt {

// Checkpoint layout:
//   bytes 0..3   magic "SNVT"
//   byte  4      format version 0x01
//   bytes 5..12  unsigned 64-bit little-endian header length
//   header       UTF-8 JSON: configs, pooling mode, seed/step counters,
//                optimizer kind, and a tensor table (name, shape, byte
//                offset into the blob region, in storage order)
//   blobs        concatenated little-endian IEEE-754 64-bit values,
//                one run per tensor-table entry
// Adam moments are stored as extra tensors named opt.m.<param> and
// opt.v.<param>. Every structural problem raises CorruptFileError with the
// offending byte offset.

struct CheckpointMeta {
  OptimizerKind optimizer = OptimizerKind::adam;
  bool has_optimizer_state = false;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

struct LoadedCheckpoint {
  Model model;
  AdamState adam;
  CheckpointMeta meta;
};

void save_checkpoint(const Model& model, const AdamState* adam, const CheckpointMeta& meta,
                     const std::string& path);

LoadedCheckpoint load_checkpoint(const std::string& path);

// Compares the stored configs against expectations; throws ConfigError on
// any difference (used when resuming under an explicit preset).
void require_checkpoint_config(const LoadedCheckpoint& loaded, const EncoderConfig& encoder,
                               const TaskSet& tasks);

}  // namespace snvt
