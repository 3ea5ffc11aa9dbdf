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

#include <string>
#include <vector>

namespace laso {

// Runs one command-line invocation in-process and returns the process exit
// code: 0 success, 2 configuration, 3 missing/unwritable file, 4 malformed
// file, 5 checkpoint/architecture mismatch, 6 bad data, 1 anything else.
// Failures print one line to stderr: "error [<category>]: <message>".
int cli_main(int argc, const char* const* argv);

// Same, without the program-name element.
int cli_main(const std::vector<std::string>& args);

}  // namespace laso
