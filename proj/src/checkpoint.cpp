#include "snvt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "snvt/error.hpp"
#include "snvt/serialize.hpp"

namespace snvt {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'V', 'T'};
constexpr unsigned char kVersion = 0x01;
constexpr std::size_t kHeaderStart = 13;  // magic + version + u64 length

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t get_u64(const std::string& bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + static_cast<std::size_t>(i)]);
  }
  return v;
}

double get_f64(const std::string& bytes, std::size_t offset) {
  return std::bit_cast<double>(get_u64(bytes, offset));
}

}  // namespace

void save_checkpoint(const Model& model, const AdamState* adam, const CheckpointMeta& meta,
                     const std::string& path) {
  json header;
  header["format_version"] = 1;
  header["encoder"] = to_json(model.encoder);
  header["tasks"] = to_json(model.tasks);
  header["reg_weight"] = model.reg_weight;
  header["pooling"] = "mean";
  header["init_seed"] = model.init_seed;
  header["seed"] = meta.seed;
  header["step"] = meta.step;
  header["optimizer"] = meta.optimizer == OptimizerKind::adam ? "adam" : "sgd";

  struct Entry {
    std::string name;
    const Tensor* tensor;
  };
  std::vector<Entry> entries;
  for (const auto& p : model.parameters()) entries.push_back({p.name, p.tensor});
  const bool with_state = adam && !adam->m.empty();
  if (with_state) {
    for (const auto& p : model.parameters()) {
      entries.push_back({"opt.m." + p.name, &adam->m.at(p.name)});
      entries.push_back({"opt.v." + p.name, &adam->v.at(p.name)});
    }
  }
  header["has_optimizer_state"] = with_state;

  json table = json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    table.push_back(json{{"name", e.name}, {"shape", e.tensor->shape()}, {"offset", offset}});
    offset += e.tensor->size() * 8;
  }
  header["tensors"] = std::move(table);

  const std::string header_text = header.dump();
  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_u64(out, header_text.size());
  out += header_text;
  for (const auto& e : entries) {
    for (real_t v : e.tensor->data()) put_f64(out, static_cast<double>(v));
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write checkpoint '" + path + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("short write to checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  const std::string bytes = buf.str();

  if (bytes.size() < kHeaderStart) {
    throw CorruptFileError(path + ": truncated before header", bytes.size());
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CorruptFileError(path + ": bad magic", 0);
  }
  if (static_cast<unsigned char>(bytes[4]) != kVersion) {
    throw CorruptFileError(path + ": unsupported version " +
                               std::to_string(static_cast<unsigned>(
                                   static_cast<unsigned char>(bytes[4]))),
                           4);
  }
  const std::uint64_t header_len = get_u64(bytes, 5);
  if (bytes.size() - kHeaderStart < header_len) {
    throw CorruptFileError(path + ": truncated header", bytes.size());
  }
  json header;
  try {
    header = json::parse(bytes.substr(kHeaderStart, header_len));
  } catch (const json::exception& e) {
    throw CorruptFileError(path + ": header is not valid JSON: " + e.what(), kHeaderStart);
  }

  LoadedCheckpoint loaded;
  const std::size_t blob_start = kHeaderStart + header_len;
  try {
    if (header.at("format_version").get<int>() != 1) {
      throw CorruptFileError(path + ": unknown format_version", kHeaderStart);
    }
    loaded.model.encoder = encoder_from_json(header.at("encoder"));
    loaded.model.tasks = tasks_from_json(header.at("tasks"));
    loaded.model.reg_weight = header.at("reg_weight").get<double>();
    loaded.model.init_seed = header.at("init_seed").get<std::uint64_t>();
    loaded.meta.seed = header.at("seed").get<std::uint64_t>();
    loaded.meta.step = header.at("step").get<std::uint64_t>();
    loaded.meta.optimizer = header.at("optimizer").get<std::string>() == "sgd"
                                ? OptimizerKind::sgd
                                : OptimizerKind::adam;
    loaded.meta.has_optimizer_state = header.at("has_optimizer_state").get<bool>();

    // allocate parameter storage, then overwrite from the blob region
    loaded.model.init_parameters(loaded.model.init_seed);
    std::map<std::string, Tensor*> slots;
    for (auto& p : loaded.model.parameters()) slots[p.name] = p.tensor;
    if (loaded.meta.has_optimizer_state) {
      for (auto& p : loaded.model.parameters()) {
        Tensor& m = loaded.adam.m.emplace(p.name, Tensor::zeros(p.tensor->shape())).first->second;
        Tensor& v = loaded.adam.v.emplace(p.name, Tensor::zeros(p.tensor->shape())).first->second;
        slots["opt.m." + p.name] = &m;
        slots["opt.v." + p.name] = &v;
      }
      loaded.adam.step = loaded.meta.step;
    }

    std::size_t filled = 0;
    for (const auto& entry : header.at("tensors")) {
      const std::string name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
      const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
      auto it = slots.find(name);
      if (it == slots.end()) {
        throw CorruptFileError(path + ": tensor table names unknown tensor '" + name + "'",
                               kHeaderStart);
      }
      Tensor& target = *it->second;
      if (target.shape() != shape) {
        throw CorruptFileError(path + ": tensor '" + name + "' has shape " + shape_str(shape) +
                                   " but the configs imply " + shape_str(target.shape()),
                               kHeaderStart);
      }
      const std::size_t start = blob_start + offset;
      const std::size_t need = target.size() * 8;
      if (start + need > bytes.size()) {
        throw CorruptFileError(path + ": truncated tensor data for '" + name + "'", bytes.size());
      }
      for (std::size_t i = 0; i < target.size(); ++i) {
        target[i] = static_cast<real_t>(get_f64(bytes, start + i * 8));
      }
      ++filled;
    }
    if (filled != slots.size()) {
      throw CorruptFileError(path + ": tensor table is missing entries", kHeaderStart);
    }
  } catch (const json::exception& e) {
    throw CorruptFileError(path + ": header is missing fields: " + e.what(), kHeaderStart);
  }
  return loaded;
}

void require_checkpoint_config(const LoadedCheckpoint& loaded, const EncoderConfig& encoder,
                               const TaskSet& tasks) {
  if (!(loaded.model.encoder == encoder)) {
    throw ConfigError("checkpoint encoder config does not match: stored " +
                      to_json(loaded.model.encoder).dump() + ", expected " +
                      to_json(encoder).dump());
  }
  if (to_json(loaded.model.tasks) != to_json(tasks)) {
    throw ConfigError("checkpoint task set does not match: stored " +
                      to_json(loaded.model.tasks).dump() + ", expected " + to_json(tasks).dump());
  }
}

}  // namespace snvt
