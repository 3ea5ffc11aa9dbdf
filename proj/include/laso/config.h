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

#pragma once

#include <cstdint>
#include <string>

#include "laso/data.h"
#include "laso/model.h"
#include "laso/training.h"

namespace laso {

// Everything a run needs, parsed from one JSON file with sections model /
// train / data / teacher. Every key is optional (defaults below); unknown
// keys are rejected. The single top-level seed drives data generation,
// initialization, training and the teacher; sub-seeds are derived from it.
struct RunConfig {
  std::uint64_t seed = 0;

  // model section
  std::string model_kind = "laso";  // "laso" or "ar"
  int d_model = 64;
  int n_heads = 2;
  int d_inner = 128;
  std::string activation = "glu";  // "glu" or "relu"
  double dropout = 0.1;
  int n_enc = 2;
  int n_pds = 1;
  int n_dec = 2;
  int max_len = 24;
  int vocab_size = 32;
  int d_feat = 40;
  int teacher_dim = 0;

  // train section (train.seed is always the top-level seed)
  TrainConfig train;

  // data section; vocab_size, d_feat and max_len come from the model section
  int data_n_utterances = 2000;
  int data_d_min = 2;
  int data_d_max = 5;
  double data_noise_sigma = 0.3;
  int data_len_min = 3;
  int data_len_max = 20;

  // teacher section; vocab_size, max_len and seed are derived
  int teacher_d_model = 48;
  int teacher_n_heads = 4;
  int teacher_d_inner = 96;
  int teacher_n_blocks = 2;
  double teacher_dropout = 0.0;
  double teacher_mask_prob = 0.15;
  int teacher_epochs = 8;
  int teacher_batch_size = 16;
  int teacher_warmup_steps = 100;

  void validate() const;  // throws ConfigError
};

// tiny: the learnability profile. small: the matched-stack benchmark
// profile. paper-shape: the published layer geometry at desk vocabulary.
RunConfig preset_config(const std::string& name);
std::string preset_json(const std::string& name);

// Strict parse: wrong types and unknown keys both throw ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);  // IoError on read failure

// Applies one "dotted.path=value" assignment to JSON text and returns the
// new text. The value is parsed as a JSON scalar when possible, else taken
// as a string. Unknown paths surface later, when the text is parsed.
std::string apply_override(const std::string& json_text,
                           const std::string& assignment);

// Canonical serialization; parse_run_config(run_config_json(c)) == c.
std::string run_config_json(const RunConfig& cfg);

AttentionConfig attention_config(const RunConfig& cfg);
LasoConfig laso_config(const RunConfig& cfg);
ArConfig ar_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
SyntheticSpec synthetic_spec(const RunConfig& cfg);
TeacherConfig teacher_config(const RunConfig& cfg);

}  // namespace laso
