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

#include "laso/ops.h"
#include "laso/tape.h"
#include "laso/tensor.h"

namespace laso {

// Logit value written into masked-out attention positions. After the row max
// is subtracted, exp() underflows to exact zero, so masked keys contribute
// nothing to the softmax.
inline constexpr double kMaskedLogit = -1e9;

struct AttentionConfig {
  enum class Activation { kGlu, kRelu };

  int d_model = 0;
  int n_heads = 0;
  int d_inner = 0;
  Activation activation = Activation::kGlu;
  double dropout = 0.0;

  int head_dim() const { return d_model / n_heads; }
  // First FFN layer output width (doubled for the GLU gate).
  int ffn_hidden() const {
    return activation == Activation::kGlu ? 2 * d_inner : d_inner;
  }
  void validate() const;  // throws ConfigError
};

// Boolean attendability matrix: entry (q, k) says whether query row q may
// attend key row k. Construction rejects masks with a fully blocked query
// row, since softmax over an empty key set is undefined.
class AttentionMask {
 public:
  AttentionMask(int t_q, int t_k, std::vector<std::uint8_t> keep);

  // Every key attendable.
  static AttentionMask full(int t_q, int t_k);
  // Query row q may attend key rows 0..q.
  static AttentionMask causal(int n);
  // All query rows attend exactly the first valid_k key rows.
  static AttentionMask key_padding(int t_q, int t_k, int valid_k);

  int t_q() const { return t_q_; }
  int t_k() const { return t_k_; }
  bool allowed(int q, int k) const {
    return keep_[static_cast<std::size_t>(q) * t_k_ + k] != 0;
  }
  const std::vector<std::uint8_t>& flat() const { return keep_; }

 private:
  int t_q_, t_k_;
  std::vector<std::uint8_t> keep_;
};

// Per-head projection matrices. Heads are separate [d_model, head_dim]
// matrices rather than slices of one big one.
struct MhaProjections {
  std::vector<Parameter> w_q, w_k, w_v;
  Parameter w_o;

  void init(const AttentionConfig& cfg, const std::string& prefix,
            RngStream* rng);
  void collect(std::vector<Parameter*>* out);
  static std::int64_t param_count(const AttentionConfig& cfg);
};

struct LnParams {
  Parameter gain, bias;

  // Identity at init: gain ones, bias zeros.
  void init(int d, const std::string& prefix);
  void collect(std::vector<Parameter*>* out);
};

struct FfnParams {
  Parameter w1, b1, w2, b2;

  void init(const AttentionConfig& cfg, const std::string& prefix,
            RngStream* rng);
  void collect(std::vector<Parameter*>* out);
  static std::int64_t param_count(const AttentionConfig& cfg);
};

// Pre-norm block: LN -> multi-head attention -> residual, then
// LN -> position-wise FFN -> residual.
struct BlockParams {
  LnParams ln_att;
  MhaProjections proj;
  LnParams ln_ffn;
  FfnParams ffn;

  void init(const AttentionConfig& cfg, const std::string& prefix,
            RngStream* rng);
  void collect(std::vector<Parameter*>* out);
  static std::int64_t param_count(const AttentionConfig& cfg);
};

// Dropout applied to sublayer outputs before the residual add. p == 0 is an
// exact no-op (inference); p > 0 requires an rng.
struct DropoutCtx {
  double p = 0.0;
  RngStream* rng = nullptr;
};

// Softmax(q k^T / sqrt(d_k)) v. If scores_out is non-null the post-softmax
// score matrix [t_q, t_k] is copied there for diagnostics.
Var scaled_dot_attention(Tape* t, const Var& q, const Var& k, const Var& v,
                         const AttentionMask* mask,
                         Tensor* scores_out = nullptr);

// Projects q / kv per head, attends per head, concatenates and applies the
// output projection. scores_out, when non-null, receives one matrix per head.
Var multi_head_attention(Tape* t, const Var& q, const Var& kv,
                         MhaProjections& proj, int n_heads,
                         const AttentionMask* mask,
                         std::vector<Tensor>* scores_out = nullptr);

Var position_wise_ffn(Tape* t, const Var& x, FfnParams& p,
                      AttentionConfig::Activation act);

// x_q + Dropout(MHA(LN(x_q), LN(m), LN(m))). With self_attention the memory
// is x_q itself and its LN is computed once; in the cross case the same LN
// parameters are applied to the memory.
Var mha_sublayer(Tape* t, const Var& x_q, const Var& memory,
                 bool self_attention, LnParams& ln,
                 MhaProjections& proj, int n_heads,
                 const AttentionMask* mask, const DropoutCtx& drop,
                 std::vector<Tensor>* scores_out = nullptr);

Var ffn_sublayer(Tape* t, const Var& x, LnParams& ln, FfnParams& p,
                 AttentionConfig::Activation act, const DropoutCtx& drop);

// Full block: mha_sublayer followed by ffn_sublayer.
Var attention_block(Tape* t, const Var& x_q, const Var& memory,
                    bool self_attention, BlockParams& p,
                    const AttentionConfig& cfg, const AttentionMask* mask,
                    const DropoutCtx& drop,
                    std::vector<Tensor>* scores_out = nullptr);

}  // namespace laso
