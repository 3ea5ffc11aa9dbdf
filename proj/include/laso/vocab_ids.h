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

namespace laso {

// Reserved vocabulary ids, fixed across every model and corpus. <eos> doubles
// as the filler symbol that pads fixed-length targets past the transcript end.
inline constexpr int kEosId = 0;
inline constexpr int kSosId = 1;
inline constexpr int kUnkId = 2;
inline constexpr int kNumReservedIds = 3;

}  // namespace laso
