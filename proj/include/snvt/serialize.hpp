#pragma once

#include <json.hpp>

#include "snvt/encoder.hpp"
#include "snvt/error.hpp"
#include "snvt/mtl.hpp"

// JSON forms shared by manifests, checkpoints and reports.

namespace snvt {

using json = nlohmann::ordered_json;

inline json to_json(const EncoderConfig& c) {
  return json{{"height", c.height},
              {"width", c.width},
              {"channels", c.channels},
              {"patch", c.patch},
              {"dim", c.dim},
              {"layers", c.layers},
              {"heads", c.heads},
              {"positional", c.positional},
              {"prenorm", c.prenorm},
              {"score_scale", c.score_scale == ScoreScale::per_head ? "per_head" : "full_dim"}};
}

inline EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  try {
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.patch = j.at("patch").get<std::size_t>();
    c.dim = j.at("dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.positional = j.at("positional").get<bool>();
    c.prenorm = j.at("prenorm").get<bool>();
    const std::string scale = j.at("score_scale").get<std::string>();
    if (scale == "per_head") {
      c.score_scale = ScoreScale::per_head;
    } else if (scale == "full_dim") {
      c.score_scale = ScoreScale::full_dim;
    } else {
      throw ValidationError("unknown score_scale '" + scale + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json to_json(const TaskSpec& t) {
  json j{{"id", t.id},
         {"kind", t.kind == TaskKind::classification ? "classification" : "regression"},
         {"lambda", t.weight}};
  if (t.kind == TaskKind::classification) j["classes"] = t.classes;
  return j;
}

inline json to_json(const TaskSet& tasks) {
  json arr = json::array();
  for (const auto& t : tasks.tasks) arr.push_back(to_json(t));
  return arr;
}

inline TaskSpec task_from_json(const json& j) {
  TaskSpec t;
  try {
    t.id = j.at("id").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "classification") {
      t.kind = TaskKind::classification;
      t.classes = j.at("classes").get<std::size_t>();
    } else if (kind == "regression") {
      t.kind = TaskKind::regression;
    } else {
      throw ValidationError("unknown task kind '" + kind + "'");
    }
    if (j.contains("lambda")) t.weight = j.at("lambda").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad task spec: ") + e.what());
  }
  t.validate();
  return t;
}

inline TaskSet tasks_from_json(const json& arr) {
  TaskSet tasks;
  for (const auto& j : arr) tasks.tasks.push_back(task_from_json(j));
  tasks.validate();
  return tasks;
}

}  // namespace snvt
