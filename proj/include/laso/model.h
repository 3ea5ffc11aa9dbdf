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

#include "laso/attention.h"
#include "laso/ops.h"
#include "laso/tape.h"
#include "laso/tensor.h"

namespace laso {

class RngStream;

// Attention score matrices collected during a forward pass, keyed by
// (module, layer, head). Retention is opt-in per call.
struct DiagKey {
  std::string module;
  int layer = 0;
  int head = 0;
  auto operator<=>(const DiagKey&) const = default;
};
using Diagnostics = std::map<DiagKey, Tensor>;

// Per-call forward options. Dropout fires only in training mode.
struct RunOpts {
  bool training = false;
  RngStream* dropout_rng = nullptr;
  bool collect_diagnostics = false;
};

// Decode-side work counters, for asserting the cost asymmetry between the
// one-pass decoder and the autoregressive baseline.
struct DecodeStats {
  std::uint64_t decoder_passes = 0;
  std::uint64_t decoder_block_calls = 0;
};

struct EncodeResult {
  Var z;        // [t_rows, d_model]
  int t_valid;  // rows that correspond to real (unpadded) input frames
};

// Conv frontend + self-attention stack + final LN, shared between the
// one-pass model and the autoregressive baseline. An empty stack (n_blocks
// == 0) is the identity: no blocks and no final LN.
struct EncoderParams {
  ConvFrontendParams frontend;
  std::vector<BlockParams> blocks;
  LnParams final_ln;

  void init(const AttentionConfig& cfg, int n_blocks, int d_feat,
            const std::string& prefix, RngStream* rng);
  void collect(std::vector<Parameter*>* out);
  static std::int64_t param_count(const AttentionConfig& cfg, int n_blocks,
                                  int d_feat);
};

struct LasoConfig {
  AttentionConfig attention;
  int n_enc = 0;
  int n_pds = 1;
  int n_dec = 0;
  int max_len = 0;  // number of decode slots; all outputs have this length
  int vocab_size = 0;
  int d_feat = 0;
  int teacher_dim = 0;  // hidden width of the distillation teacher; 0 = off

  void validate() const;  // throws ConfigError
};

struct ForwardResult {
  Var probs;       // [max_len, vocab_size], rows sum to 1
  Var dec_hidden;  // decoder output before the classification projection
  Diagnostics diagnostics;
};

// One-pass recognizer: conv frontend and encoder over the frames, a
// summarizer that cross-attends the encoded frames from exactly max_len
// query slots, a self-attention decoder over those slots, and a per-slot
// classifier. Output length never depends on the input length.
class LasoModel {
 public:
  LasoModel(const LasoConfig& cfg, RngStream* init_rng);

  const LasoConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& parameters() { return params_; }
  void zero_grads();
  static std::int64_t expected_param_count(const LasoConfig& cfg);

  EncodeResult encode(Tape* t, const Tensor& features, const RunOpts& opts,
                      int valid_t0 = -1, Diagnostics* diag = nullptr);
  // Fixed number of query slots cross-attending the encoded frames; the
  // output always has max_len rows regardless of z's length.
  Var summarize(Tape* t, const EncodeResult& enc, const RunOpts& opts,
                Diagnostics* diag = nullptr);
  struct DecodeResult {
    Var probs;
    Var hidden;
  };
  DecodeResult decode(Tape* t, const Var& slots, const RunOpts& opts,
                      Diagnostics* diag = nullptr);

  ForwardResult forward(Tape* t, const Tensor& features, const RunOpts& opts);
  // features is [batch, t_max, d_feat], right-padded with zeros;
  // frame_counts gives each item's real frame count. Padded frames are
  // masked out of encoder self-attention and summarizer cross-attention, so
  // each item's output matches an unpadded forward.
  std::vector<ForwardResult> forward_batch(Tape* t, const Tensor& features,
                                           const std::vector<int>& frame_counts,
                                           const RunOpts& opts);

  Parameter* teacher_projection();  // null when teacher_dim == 0

  const DecodeStats& stats() const { return stats_; }
  void reset_stats() { stats_ = DecodeStats{}; }

 private:
  ForwardResult forward_padded(Tape* t, const Tensor& features, int valid_t0,
                               const RunOpts& opts);
  Tensor pe_rows(int n);

  LasoConfig cfg_;
  EncoderParams encoder_;
  std::vector<BlockParams> pds_blocks_;
  LnParams pds_final_ln_;
  std::vector<BlockParams> dec_blocks_;
  LnParams dec_final_ln_;
  Parameter out_w_, out_b_;
  Parameter teacher_proj_;
  bool has_teacher_proj_ = false;
  std::vector<Parameter*> params_;
  Tensor pe_cache_;
  DecodeStats stats_;
};

struct ArConfig {
  AttentionConfig attention;
  int n_enc = 0;
  int n_dec = 0;
  int max_len = 0;  // longest decoder input, <sos> included
  int vocab_size = 0;
  int d_feat = 0;

  void validate() const;
};

// Decoder block of the autoregressive baseline: causal self-attention, then
// cross-attention over the encoded frames, then the FFN.
struct ArBlockParams {
  LnParams ln_self;
  MhaProjections self_proj;
  LnParams ln_cross;
  MhaProjections cross_proj;
  LnParams ln_ffn;
  FfnParams ffn;

  void init(const AttentionConfig& cfg, const std::string& prefix,
            RngStream* rng);
  void collect(std::vector<Parameter*>* out);
  static std::int64_t param_count(const AttentionConfig& cfg);
};

// Conventional encoder-decoder baseline: same frontend and encoder shape,
// token-embedding decoder with causal self-attention. Emits one token per
// decoder pass, so decoding cost grows with the output length (and beam
// width); this asymmetry is exactly what the benchmark measures.
class ArBaselineModel {
 public:
  ArBaselineModel(const ArConfig& cfg, RngStream* init_rng);

  const ArConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& parameters() { return params_; }
  void zero_grads();
  static std::int64_t expected_param_count(const ArConfig& cfg);

  EncodeResult encode(Tape* t, const Tensor& features, const RunOpts& opts,
                      int valid_t0 = -1);
  // Teacher-forcing forward: input_ids (starting with <sos>) produce a
  // next-token distribution at every position under a causal mask. One call
  // counts as one decoder pass.
  Var decode_train(Tape* t, const std::vector<int>& input_ids,
                   const EncodeResult& enc, const RunOpts& opts);
  // Next-token distribution after the given prefix: last row of a fresh
  // teacher-forcing pass (no state is cached between steps).
  Tensor step_probs(const std::vector<int>& prefix_ids,
                    const EncodeResult& enc);

  const DecodeStats& stats() const { return stats_; }
  void reset_stats() { stats_ = DecodeStats{}; }

 private:
  Tensor pe_rows(int n);

  ArConfig cfg_;
  EncoderParams encoder_;
  Parameter embed_;
  std::vector<ArBlockParams> dec_blocks_;
  LnParams dec_final_ln_;
  Parameter out_w_, out_b_;
  std::vector<Parameter*> params_;
  Tensor pe_cache_;
  DecodeStats stats_;
};

struct ArDecodeResult {
  std::vector<int> tokens;        // specials stripped
  double logp = 0.0;              // sum of token log-probs of the winner
  std::uint64_t decoder_passes = 0;
};

// Greedy decoding: repeatedly take the argmax next token (ties break to the
// lowest id) until <eos> or max_len emissions.
ArDecodeResult ar_greedy_decode(ArBaselineModel& model, const Tensor& features,
                                int max_len);
// Length-wise beam search scored by summed log-probs. Hypotheses retire when
// they emit <eos>; anything still alive at max_len is force-terminated. With
// beam == 1 this reproduces greedy decoding exactly.
ArDecodeResult ar_beam_decode(ArBaselineModel& model, const Tensor& features,
                              int beam, int max_len);

}  // namespace laso
