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
#include <vector>

#include "laso/data.h"
#include "laso/model.h"
#include "laso/tensor.h"

namespace laso {

// A decoded transcript. ids carries real tokens only: every filler and
// start marker has been stripped, so no reserved special id appears.
struct Hypothesis {
  std::vector<int> ids;
  std::vector<double> confidences;  // max prob at each kept position
};

// Argmax each row (ties break to the lowest id), skip start markers, stop
// at the first filler. Confidence is the winning probability.
Hypothesis hypothesis_from_probs(const Tensor& probs);

// One forward pass, then per-position argmax and filler stripping. Output
// length is decided by where the model put the first filler, never by an
// emission loop.
Hypothesis greedy_decode(LasoModel& model, const Tensor& features);

struct CerResult {
  int distance = 0;
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  double rate = 0.0;  // distance / |ref|
};

// Unit-cost edit distance with an operation breakdown.
// ref must be non-empty.
CerResult cer(const std::vector<int>& ref, const std::vector<int>& hyp);

struct EvalUtterance {
  std::string id;
  std::vector<int> ref_ids;
  std::vector<int> hyp_ids;
  CerResult score;
};

struct EvalResult {
  std::int64_t total_distance = 0;
  std::int64_t total_ref_len = 0;
  double cer = 0.0;  // micro average: total_distance / total_ref_len
  std::vector<EvalUtterance> utterances;
};

// Greedy-decode every utterance and score against its transcript.
EvalResult evaluate(LasoModel& model, const Corpus& corpus);

struct BenchReport {
  double total_processing_seconds = 0.0;
  double total_audio_seconds = 0.0;
  int n_utterances = 0;
  std::vector<double> utterance_seconds;  // per-utterance, same pass as total
  std::uint64_t decoder_passes = 0;
  std::uint64_t decoder_block_calls = 0;

  double rtf() const { return total_processing_seconds / total_audio_seconds; }
  double apt() const { return total_processing_seconds / n_utterances; }
};

struct BenchResult {
  BenchReport nar;
  BenchReport ar;
  int beam = 0;
  int repeats = 0;
  double speedup_apt = 0.0;  // ar.apt() / nar.apt()
  double speedup_rtf = 0.0;
};

// Wall-clock comparison of the one-pass decoder against beam-search
// decoding with the autoregressive baseline. Each system runs the whole
// corpus `repeats` times, utterance by utterance on one thread; the
// reported pass is the median by total processing time. Decoder invocation
// counts must be identical across passes.
BenchResult benchmark(const Corpus& corpus, LasoModel& nar_model,
                      ArBaselineModel& ar_model, int beam, int repeats);

std::string bench_csv(const BenchResult& r);
std::string bench_summary(const BenchResult& r);
std::string eval_csv(const EvalResult& r, const Vocabulary& vocab);
std::string eval_summary(const EvalResult& r);

}  // namespace laso
