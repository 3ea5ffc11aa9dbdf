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
#include <utility>
#include <vector>

#include "laso/tape.h"
#include "laso/tensor.h"

namespace laso {

// On-disk model snapshot. Values are stored as raw f64 bit patterns, so a
// save/load round trip is bit-exact.
struct Checkpoint {
  std::string config_json;  // run configuration the model was built from
  std::uint64_t step = 0;
  // Registry order; restore() matches entries to the model by name.
  std::vector<std::pair<std::string, Tensor>> params;
  // Optimizer moments, aligned with params by name. Optional.
  bool has_opt_state = false;
  std::uint64_t opt_step = 0;
  std::vector<std::pair<std::string, Tensor>> opt_m;
  std::vector<std::pair<std::string, Tensor>> opt_v;
};

// Copies the current parameter values into a Checkpoint.
Checkpoint snapshot(const std::vector<Parameter*>& params,
                    const std::string& config_json, std::uint64_t step);

// Writes parameter values from ckpt into params. Every name must match with
// an identical shape, both ways; any mismatch is an ArchError naming the
// offending parameter.
void restore(const Checkpoint& ckpt, const std::vector<Parameter*>& params);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);  // FormatError on damage

// Elementwise mean of several checkpoints' parameter tables. All files must
// agree on names, order and shapes (ArchError otherwise). The result carries
// the first checkpoint's config and the last one's step.
Checkpoint average_checkpoints(const std::vector<std::string>& paths);

}  // namespace laso
