// Copyright 2026 The Laso Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "laso/config.h"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "laso/error.h"
#include "laso/vocab_ids.h"

namespace laso {

namespace {

using nlohmann::json;

void check_keys(const json& o, const std::string& prefix,
                std::initializer_list<const char*> known) {
  if (!o.is_object()) {
    throw ConfigError("config: '" + prefix + "' must be an object");
  }
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
      throw ConfigError("config: unknown key '" + path + "'");
    }
  }
}

template <typename T>
void read_field(const json& o, const std::string& prefix, const char* key,
                T* out) {
  auto it = o.find(key);
  if (it == o.end()) return;
  try {
    *out = it->template get<T>();
  } catch (const json::exception&) {
    std::string path = prefix.empty() ? std::string(key) : prefix + "." + key;
    throw ConfigError("config: key '" + path + "' has the wrong type");
  }
}

RunConfig from_json(const json& j) {
  RunConfig cfg;
  check_keys(j, "", {"seed", "model", "train", "data", "teacher"});
  read_field(j, "", "seed", &cfg.seed);
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model",
               {"kind", "d_model", "n_heads", "d_inner", "activation",
                "dropout", "n_enc", "n_pds", "n_dec", "max_len", "vocab_size",
                "d_feat", "teacher_dim"});
    read_field(m, "model", "kind", &cfg.model_kind);
    read_field(m, "model", "d_model", &cfg.d_model);
    read_field(m, "model", "n_heads", &cfg.n_heads);
    read_field(m, "model", "d_inner", &cfg.d_inner);
    read_field(m, "model", "activation", &cfg.activation);
    read_field(m, "model", "dropout", &cfg.dropout);
    read_field(m, "model", "n_enc", &cfg.n_enc);
    read_field(m, "model", "n_pds", &cfg.n_pds);
    read_field(m, "model", "n_dec", &cfg.n_dec);
    read_field(m, "model", "max_len", &cfg.max_len);
    read_field(m, "model", "vocab_size", &cfg.vocab_size);
    read_field(m, "model", "d_feat", &cfg.d_feat);
    read_field(m, "model", "teacher_dim", &cfg.teacher_dim);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"warmup_steps", "label_smoothing", "lambda", "accum_steps",
                "epochs", "batch_seconds", "avg_last_k", "specaug"});
    read_field(t, "train", "warmup_steps", &cfg.train.warmup_steps);
    read_field(t, "train", "label_smoothing", &cfg.train.label_smoothing);
    read_field(t, "train", "lambda", &cfg.train.lambda);
    read_field(t, "train", "accum_steps", &cfg.train.accum_steps);
    read_field(t, "train", "epochs", &cfg.train.epochs);
    read_field(t, "train", "batch_seconds", &cfg.train.batch_seconds);
    read_field(t, "train", "avg_last_k", &cfg.train.avg_last_k);
    if (t.contains("specaug")) {
      const json& s = t.at("specaug");
      check_keys(s, "train.specaug",
                 {"enabled", "freq_width", "time_width", "n_freq_masks",
                  "n_time_masks"});
      read_field(s, "train.specaug", "enabled", &cfg.train.specaug.enabled);
      read_field(s, "train.specaug", "freq_width",
                 &cfg.train.specaug.freq_width);
      read_field(s, "train.specaug", "time_width",
                 &cfg.train.specaug.time_width);
      read_field(s, "train.specaug", "n_freq_masks",
                 &cfg.train.specaug.n_freq_masks);
      read_field(s, "train.specaug", "n_time_masks",
                 &cfg.train.specaug.n_time_masks);
    }
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"n_utterances", "d_min", "d_max", "noise_sigma", "len_min",
                "len_max"});
    read_field(d, "data", "n_utterances", &cfg.data_n_utterances);
    read_field(d, "data", "d_min", &cfg.data_d_min);
    read_field(d, "data", "d_max", &cfg.data_d_max);
    read_field(d, "data", "noise_sigma", &cfg.data_noise_sigma);
    read_field(d, "data", "len_min", &cfg.data_len_min);
    read_field(d, "data", "len_max", &cfg.data_len_max);
  }
  if (j.contains("teacher")) {
    const json& t = j.at("teacher");
    check_keys(t, "teacher",
               {"d_model", "n_heads", "d_inner", "n_blocks", "dropout",
                "mask_prob", "epochs", "batch_size", "warmup_steps"});
    read_field(t, "teacher", "d_model", &cfg.teacher_d_model);
    read_field(t, "teacher", "n_heads", &cfg.teacher_n_heads);
    read_field(t, "teacher", "d_inner", &cfg.teacher_d_inner);
    read_field(t, "teacher", "n_blocks", &cfg.teacher_n_blocks);
    read_field(t, "teacher", "dropout", &cfg.teacher_dropout);
    read_field(t, "teacher", "mask_prob", &cfg.teacher_mask_prob);
    read_field(t, "teacher", "epochs", &cfg.teacher_epochs);
    read_field(t, "teacher", "batch_size", &cfg.teacher_batch_size);
    read_field(t, "teacher", "warmup_steps", &cfg.teacher_warmup_steps);
  }
  return cfg;
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["model"] = {{"kind", c.model_kind},
                {"d_model", c.d_model},
                {"n_heads", c.n_heads},
                {"d_inner", c.d_inner},
                {"activation", c.activation},
                {"dropout", c.dropout},
                {"n_enc", c.n_enc},
                {"n_pds", c.n_pds},
                {"n_dec", c.n_dec},
                {"max_len", c.max_len},
                {"vocab_size", c.vocab_size},
                {"d_feat", c.d_feat},
                {"teacher_dim", c.teacher_dim}};
  j["train"] = {{"warmup_steps", c.train.warmup_steps},
                {"label_smoothing", c.train.label_smoothing},
                {"lambda", c.train.lambda},
                {"accum_steps", c.train.accum_steps},
                {"epochs", c.train.epochs},
                {"batch_seconds", c.train.batch_seconds},
                {"avg_last_k", c.train.avg_last_k},
                {"specaug",
                 {{"enabled", c.train.specaug.enabled},
                  {"freq_width", c.train.specaug.freq_width},
                  {"time_width", c.train.specaug.time_width},
                  {"n_freq_masks", c.train.specaug.n_freq_masks},
                  {"n_time_masks", c.train.specaug.n_time_masks}}}};
  j["data"] = {{"n_utterances", c.data_n_utterances},
               {"d_min", c.data_d_min},
               {"d_max", c.data_d_max},
               {"noise_sigma", c.data_noise_sigma},
               {"len_min", c.data_len_min},
               {"len_max", c.data_len_max}};
  j["teacher"] = {{"d_model", c.teacher_d_model},
                  {"n_heads", c.teacher_n_heads},
                  {"d_inner", c.teacher_d_inner},
                  {"n_blocks", c.teacher_n_blocks},
                  {"dropout", c.teacher_dropout},
                  {"mask_prob", c.teacher_mask_prob},
                  {"epochs", c.teacher_epochs},
                  {"batch_size", c.teacher_batch_size},
                  {"warmup_steps", c.teacher_warmup_steps}};
  return j;
}

}  // namespace

void RunConfig::validate() const {
  if (model_kind != "laso" && model_kind != "ar") {
    throw ConfigError("config: model.kind must be 'laso' or 'ar', got '" +
                      model_kind + "'");
  }
  if (activation != "glu" && activation != "relu") {
    throw ConfigError("config: model.activation must be 'glu' or 'relu', "
                      "got '" + activation + "'");
  }
  if (model_kind == "laso") {
    laso_config(*this).validate();
  } else {
    ar_config(*this).validate();
  }
  train_config(*this).validate();
  synthetic_spec(*this).validate();
  teacher_config(*this).validate();
  if (train.lambda > 0.0 && teacher_dim != teacher_d_model) {
    throw ConfigError(
        "config: train.lambda > 0 needs model.teacher_dim == teacher.d_model "
        "(got " + std::to_string(teacher_dim) + " vs " +
        std::to_string(teacher_d_model) + ")");
  }
}

RunConfig preset_config(const std::string& name) {
  RunConfig cfg;  // defaults are the tiny learnability profile
  if (name == "tiny") {
    cfg.train.epochs = 50;
    cfg.train.warmup_steps = 200;
    cfg.train.batch_seconds = 8.0;
    cfg.train.accum_steps = 2;
    cfg.train.avg_last_k = 5;
  } else if (name == "small") {
    cfg.d_model = 128;
    cfg.n_heads = 4;
    cfg.d_inner = 512;
    cfg.n_enc = 4;
    cfg.n_pds = 1;
    cfg.n_dec = 4;
    cfg.max_len = 32;
    cfg.train.epochs = 20;
    cfg.train.warmup_steps = 250;
    cfg.train.batch_seconds = 16.0;
    cfg.train.avg_last_k = 3;
  } else if (name == "paper-shape") {
    cfg.d_model = 256;
    cfg.n_heads = 4;
    cfg.d_inner = 2048;
    cfg.n_enc = 4;
    cfg.n_pds = 1;
    cfg.n_dec = 4;
    cfg.max_len = 60;
    cfg.d_feat = 80;
    cfg.train.epochs = 10;
    cfg.train.warmup_steps = 400;
    cfg.train.batch_seconds = 30.0;
    cfg.train.avg_last_k = 10;
  } else {
    throw ConfigError("config: unknown preset '" + name +
                      "'; expected tiny, small or paper-shape");
  }
  return cfg;
}

std::string preset_json(const std::string& name) {
  return run_config_json(preset_config(name));
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg = from_json(j);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("config: cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string apply_override(const std::string& json_text,
                           const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config: override '" + assignment +
                      "' is not of the form key=value");
  }
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  json parsed;
  bool scalar = true;
  try {
    parsed = json::parse(value);
    if (parsed.is_object() || parsed.is_array()) scalar = false;
  } catch (const json::exception&) {
    parsed = value;  // bare words are strings
  }
  if (!scalar) {
    throw ConfigError("config: override '" + path +
                      "' must assign a scalar value");
  }
  json* node = &j;
  std::size_t at = 0;
  while (true) {
    std::size_t dot = path.find('.', at);
    std::string part = path.substr(at, dot == std::string::npos
                                           ? std::string::npos
                                           : dot - at);
    if (part.empty()) {
      throw ConfigError("config: override path '" + path +
                        "' has an empty segment");
    }
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      break;
    }
    node = &(*node)[part];
    if (!node->is_object() && !node->is_null()) {
      throw ConfigError("config: override path '" + path +
                        "' descends into a non-section value");
    }
    at = dot + 1;
  }
  return j.dump(2);
}

std::string run_config_json(const RunConfig& cfg) {
  return to_json(cfg).dump(2);
}

AttentionConfig attention_config(const RunConfig& cfg) {
  AttentionConfig::Activation act = cfg.activation == "relu"
                                        ? AttentionConfig::Activation::kRelu
                                        : AttentionConfig::Activation::kGlu;
  return AttentionConfig{cfg.d_model, cfg.n_heads, cfg.d_inner, act,
                         cfg.dropout};
}

LasoConfig laso_config(const RunConfig& cfg) {
  LasoConfig c;
  c.attention = attention_config(cfg);
  c.n_enc = cfg.n_enc;
  c.n_pds = cfg.n_pds;
  c.n_dec = cfg.n_dec;
  c.max_len = cfg.max_len;
  c.vocab_size = cfg.vocab_size;
  c.d_feat = cfg.d_feat;
  c.teacher_dim = cfg.teacher_dim;
  return c;
}

ArConfig ar_config(const RunConfig& cfg) {
  ArConfig c;
  c.attention = attention_config(cfg);
  c.n_enc = cfg.n_enc;
  c.n_dec = cfg.n_dec;
  c.max_len = cfg.max_len;
  c.vocab_size = cfg.vocab_size;
  c.d_feat = cfg.d_feat;
  return c;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig c = cfg.train;
  c.seed = cfg.seed;
  return c;
}

SyntheticSpec synthetic_spec(const RunConfig& cfg) {
  SyntheticSpec spec;
  spec.vocab_size = cfg.vocab_size;
  spec.d_feat = cfg.d_feat;
  spec.transition =
      SyntheticSpec::default_transition(cfg.vocab_size - kNumReservedIds);
  spec.d_min = cfg.data_d_min;
  spec.d_max = cfg.data_d_max;
  spec.noise_sigma = cfg.data_noise_sigma;
  spec.n_utterances = cfg.data_n_utterances;
  spec.len_min = cfg.data_len_min;
  spec.len_max = cfg.data_len_max;
  spec.max_len = cfg.max_len;
  spec.seed = cfg.seed;
  return spec;
}

TeacherConfig teacher_config(const RunConfig& cfg) {
  TeacherConfig c;
  c.d_model = cfg.teacher_d_model;
  c.n_heads = cfg.teacher_n_heads;
  c.d_inner = cfg.teacher_d_inner;
  c.n_blocks = cfg.teacher_n_blocks;
  c.dropout = cfg.teacher_dropout;
  c.vocab_size = cfg.vocab_size;
  c.max_len = cfg.max_len;
  c.mask_prob = cfg.teacher_mask_prob;
  c.epochs = cfg.teacher_epochs;
  c.batch_size = cfg.teacher_batch_size;
  c.warmup_steps = cfg.teacher_warmup_steps;
  c.seed = cfg.seed;
  return c;
}

}  // namespace laso
