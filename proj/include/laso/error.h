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

#include <stdexcept>
#include <string>
#include <utility>

namespace laso {

// Base error. `category()` is a stable machine-readable tag; the CLI maps
// each category to a distinct exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& msg)
      : std::runtime_error(msg), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

// Tensor shape or dimension mismatch. Messages name both shapes.
struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

// Invalid or inconsistent configuration values.
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

// Invalid data fed to a component (bad token ids, over-length sequences, ...).
struct DataError : Error {
  explicit DataError(const std::string& m) : Error("data", m) {}
};

// Malformed file content. Messages name the byte offset where parsing failed.
struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

// Filesystem problems (missing file, failed write).
struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// Checkpoint does not match the model it is being loaded into.
struct ArchError : Error {
  explicit ArchError(const std::string& m) : Error("arch", m) {}
};

// Training aborted (non-finite loss and similar).
struct TrainError : Error {
  explicit TrainError(const std::string& m) : Error("train", m) {}
};

}  // namespace laso
