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
#include <map>
#include <string>
#include <vector>

#include "laso/rng.h"
#include "laso/tensor.h"
#include "laso/vocab_ids.h"

namespace laso {

// Frame hop used to turn frame counts into seconds, so the real-time factor
// has meaningful units.
inline constexpr double kFrameShiftSeconds = 0.01;

// Ordered token list with a bijective id <-> token mapping. Ids 0..2 are the
// reserved specials and must appear first, in order.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<std::string> tokens);

  // Reserved specials plus real tokens "w00", "w01", ... up to vocab_size.
  static Vocabulary make_default(int vocab_size);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  // <unk> for tokens not in the list.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;

  // One token per line; the line number is the id.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

struct Utterance {
  std::string id;
  Tensor features;          // [t0, d_feat]
  std::vector<int> tokens;  // real-token ids only, no specials
  double duration_seconds = 0.0;
};

using Corpus = std::vector<Utterance>;

// Recipe for a synthetic speech-like corpus: transcripts are sampled from a
// token-level Markov chain (so a bidirectional language model has structure
// to learn), and each token is rendered as a run of noisy copies of a fixed
// per-token prototype vector.
struct SyntheticSpec {
  int vocab_size = 32;
  int d_feat = 40;
  // Row r is the successor distribution of real token r (0-based over the
  // vocab_size - 3 real tokens). Rows must sum to 1 within 1e-9.
  Tensor transition;
  int d_min = 2;  // frames per token, inclusive range
  int d_max = 5;
  double noise_sigma = 0.3;
  int n_utterances = 0;
  int len_min = 3;  // tokens per transcript, inclusive range
  int len_max = 20;
  int max_len = 24;  // decode slot count the corpus must fit (with specials)
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  static SyntheticSpec desk_default(int n_utterances, std::uint64_t seed);
  // Sparse rows: a handful of likely successors per token, at fixed offsets.
  static Tensor default_transition(int n_real_tokens);
};

// One transcript from the spec's Markov chain: uniform length in
// [len_min, len_max], uniform first token, chain successors after. Returned
// ids are vocabulary ids (reserved ids never appear).
std::vector<int> sample_transcript(const SyntheticSpec& spec, RngStream* rng);

// Deterministic under spec.seed. Prototype vectors are drawn from a stream
// forked off the seed, so they do not depend on n_utterances or the split:
// different splits of one seed share the token acoustics but are disjoint
// draws of transcripts and noise. Feature values are quantized to f32
// precision so a save/load round trip is bit-exact.
Corpus generate_corpus(const SyntheticSpec& spec, int split = 0,
                       const std::string& id_prefix = "utt");

// Fixed-length training view of a set of utterances.
struct Batch {
  std::vector<std::string> ids;
  Tensor features;                // [b, t_max, d_feat], zero right-padding
  std::vector<int> frame_counts;  // real frames per item
  // Per item, t_max entries, 1 over the real frames and 0 over the padding.
  std::vector<std::vector<std::uint8_t>> frame_masks;
  // Per item, exactly max_len ids: (optional <sos>), tokens, then <eos> fill.
  std::vector<std::vector<int>> targets;
  // Rows of targets that carry signal: tokens plus the specials included
  // under the chosen convention.
  std::vector<int> valid_lens;
  double total_seconds = 0.0;
};

// Target row for one transcript: optional <sos>, the tokens, <eos>, then
// <eos> fill to exactly max_len. valid_len (when non-null) receives the
// number of leading slots that carry signal, specials included. Throws
// DataError when the transcript does not fit; nothing is ever truncated.
std::vector<int> pad_targets(const std::vector<int>& tokens, int max_len,
                             bool with_sos, int* valid_len = nullptr);

// Assembles corpus[indices] into one padded batch. with_sos prepends <sos>
// to every target (the convention used when distillation is on, so decoder
// rows align one to one with teacher rows). Throws DataError if a transcript
// plus its specials does not fit max_len; nothing is ever truncated.
Batch batchify(const Corpus& corpus, const std::vector<int>& indices,
               const Vocabulary& vocab, int max_len, bool with_sos);

// Little-endian binary corpus file; layout documented in the README. Load
// errors name the byte offset at which the file went wrong.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace laso
