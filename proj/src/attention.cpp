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

#include "laso/attention.h"

#include <cmath>

#include "laso/error.h"
#include "laso/rng.h"

namespace laso {

void AttentionConfig::validate() const {
  if (d_model <= 0 || d_model % 2 != 0) {
    throw ConfigError("attention: d_model must be positive and even, got " +
                      std::to_string(d_model));
  }
  if (n_heads <= 0 || d_model % n_heads != 0) {
    throw ConfigError("attention: n_heads " + std::to_string(n_heads) +
                      " must divide d_model " + std::to_string(d_model));
  }
  if (d_inner <= 0) {
    throw ConfigError("attention: d_inner must be positive, got " +
                      std::to_string(d_inner));
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("attention: dropout " + std::to_string(dropout) +
                      " outside [0, 1)");
  }
}

AttentionMask::AttentionMask(int t_q, int t_k, std::vector<std::uint8_t> keep)
    : t_q_(t_q), t_k_(t_k), keep_(std::move(keep)) {
  if (t_q <= 0 || t_k <= 0 ||
      keep_.size() != static_cast<std::size_t>(t_q) * t_k) {
    throw ShapeError("mask: " + std::to_string(keep_.size()) +
                     " entries for " + std::to_string(t_q) + " x " +
                     std::to_string(t_k));
  }
  for (int q = 0; q < t_q_; ++q) {
    bool any = false;
    for (int k = 0; k < t_k_ && !any; ++k) any = allowed(q, k);
    if (!any) {
      throw ConfigError("mask: query row " + std::to_string(q) +
                        " has no attendable key");
    }
  }
}

AttentionMask AttentionMask::full(int t_q, int t_k) {
  return AttentionMask(
      t_q, t_k,
      std::vector<std::uint8_t>(static_cast<std::size_t>(t_q) * t_k, 1));
}

AttentionMask AttentionMask::causal(int n) {
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(n) * n, 0);
  for (int q = 0; q < n; ++q) {
    for (int k = 0; k <= q; ++k) keep[static_cast<std::size_t>(q) * n + k] = 1;
  }
  return AttentionMask(n, n, std::move(keep));
}

AttentionMask AttentionMask::key_padding(int t_q, int t_k, int valid_k) {
  if (valid_k <= 0 || valid_k > t_k) {
    throw ConfigError("mask: " + std::to_string(valid_k) +
                      " valid keys of " + std::to_string(t_k));
  }
  std::vector<std::uint8_t> keep(static_cast<std::size_t>(t_q) * t_k, 0);
  for (int q = 0; q < t_q; ++q) {
    for (int k = 0; k < valid_k; ++k) {
      keep[static_cast<std::size_t>(q) * t_k + k] = 1;
    }
  }
  return AttentionMask(t_q, t_k, std::move(keep));
}

void MhaProjections::init(const AttentionConfig& cfg, const std::string& prefix,
                          RngStream* rng) {
  const int d = cfg.d_model, dk = cfg.head_dim();
  w_q.clear();
  w_k.clear();
  w_v.clear();
  for (int h = 0; h < cfg.n_heads; ++h) {
    const std::string hs = std::to_string(h);
    w_q.emplace_back(prefix + ".q" + hs, xavier_uniform({d, dk}, d, dk, rng));
    w_k.emplace_back(prefix + ".k" + hs, xavier_uniform({d, dk}, d, dk, rng));
    w_v.emplace_back(prefix + ".v" + hs, xavier_uniform({d, dk}, d, dk, rng));
  }
  w_o = Parameter(prefix + ".o", xavier_uniform({d, d}, d, d, rng));
}

void MhaProjections::collect(std::vector<Parameter*>* out) {
  for (auto& p : w_q) out->push_back(&p);
  for (auto& p : w_k) out->push_back(&p);
  for (auto& p : w_v) out->push_back(&p);
  out->push_back(&w_o);
}

std::int64_t MhaProjections::param_count(const AttentionConfig& cfg) {
  const std::int64_t d = cfg.d_model;
  return 3 * cfg.n_heads * d * cfg.head_dim() + d * d;
}

void LnParams::init(int d, const std::string& prefix) {
  gain = Parameter(prefix + ".gain", Tensor::full({d}, 1.0));
  bias = Parameter(prefix + ".bias", Tensor({d}));
}

void LnParams::collect(std::vector<Parameter*>* out) {
  out->push_back(&gain);
  out->push_back(&bias);
}

void FfnParams::init(const AttentionConfig& cfg, const std::string& prefix,
                     RngStream* rng) {
  const int d = cfg.d_model, dh = cfg.ffn_hidden(), di = cfg.d_inner;
  w1 = Parameter(prefix + ".w1", xavier_uniform({d, dh}, d, dh, rng));
  b1 = Parameter(prefix + ".b1", Tensor({dh}));
  w2 = Parameter(prefix + ".w2", xavier_uniform({di, d}, di, d, rng));
  b2 = Parameter(prefix + ".b2", Tensor({d}));
}

void FfnParams::collect(std::vector<Parameter*>* out) {
  out->push_back(&w1);
  out->push_back(&b1);
  out->push_back(&w2);
  out->push_back(&b2);
}

std::int64_t FfnParams::param_count(const AttentionConfig& cfg) {
  const std::int64_t d = cfg.d_model, dh = cfg.ffn_hidden(), di = cfg.d_inner;
  return d * dh + dh + di * d + d;
}

void BlockParams::init(const AttentionConfig& cfg, const std::string& prefix,
                       RngStream* rng) {
  ln_att.init(cfg.d_model, prefix + ".att.ln");
  proj.init(cfg, prefix + ".att", rng);
  ln_ffn.init(cfg.d_model, prefix + ".ffn.ln");
  ffn.init(cfg, prefix + ".ffn", rng);
}

void BlockParams::collect(std::vector<Parameter*>* out) {
  ln_att.collect(out);
  proj.collect(out);
  ln_ffn.collect(out);
  ffn.collect(out);
}

std::int64_t BlockParams::param_count(const AttentionConfig& cfg) {
  return 4 * static_cast<std::int64_t>(cfg.d_model) +
         MhaProjections::param_count(cfg) + FfnParams::param_count(cfg);
}

Var scaled_dot_attention(Tape* t, const Var& q, const Var& k, const Var& v,
                         const AttentionMask* mask, Tensor* scores_out) {
  check_ndim(q.v(), 2, "scaled_dot_attention");
  check_ndim(k.v(), 2, "scaled_dot_attention");
  check_ndim(v.v(), 2, "scaled_dot_attention");
  const int dk = q.v().cols();
  if (k.v().cols() != dk) {
    throw ShapeError("scaled_dot_attention: q " + q.v().shape_str() + " vs k " +
                     k.v().shape_str());
  }
  if (v.v().rows() != k.v().rows()) {
    throw ShapeError("scaled_dot_attention: k " + k.v().shape_str() + " vs v " +
                     v.v().shape_str());
  }
  if (mask != nullptr &&
      (mask->t_q() != q.v().rows() || mask->t_k() != k.v().rows())) {
    throw ShapeError("scaled_dot_attention: mask " +
                     std::to_string(mask->t_q()) + " x " +
                     std::to_string(mask->t_k()) + " for scores " +
                     std::to_string(q.v().rows()) + " x " +
                     std::to_string(k.v().rows()));
  }
  Var logits = scale(t, matmul(t, q, transpose_2d(t, k)), 1.0 / std::sqrt(dk));
  if (mask != nullptr) {
    logits = masked_fill(t, logits, mask->flat(), kMaskedLogit);
  }
  Var scores = softmax_rows(t, logits);
  if (scores_out != nullptr) *scores_out = scores.v();
  return matmul(t, scores, v);
}

Var multi_head_attention(Tape* t, const Var& q, const Var& kv,
                         MhaProjections& proj, int n_heads,
                         const AttentionMask* mask,
                         std::vector<Tensor>* scores_out) {
  if (static_cast<int>(proj.w_q.size()) != n_heads) {
    throw ConfigError("multi_head_attention: " +
                      std::to_string(proj.w_q.size()) + " projections for " +
                      std::to_string(n_heads) + " heads");
  }
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Var qh = matmul(t, q, as_var(t, proj.w_q[h]));
    Var kh = matmul(t, kv, as_var(t, proj.w_k[h]));
    Var vh = matmul(t, kv, as_var(t, proj.w_v[h]));
    Tensor head_scores;
    Var oh = scaled_dot_attention(t, qh, kh, vh, mask,
                                  scores_out ? &head_scores : nullptr);
    if (scores_out) scores_out->push_back(std::move(head_scores));
    heads.push_back(std::move(oh));
  }
  Var merged = merge_heads(t, heads);
  return matmul(t, merged, as_var(t, proj.w_o));
}

Var position_wise_ffn(Tape* t, const Var& x, FfnParams& p,
                      AttentionConfig::Activation act) {
  Var h = add_bias(t, matmul(t, x, as_var(t, p.w1)), as_var(t, p.b1));
  h = act == AttentionConfig::Activation::kGlu ? glu(t, h) : relu(t, h);
  return add_bias(t, matmul(t, h, as_var(t, p.w2)), as_var(t, p.b2));
}

namespace {

Var maybe_dropout(Tape* t, const Var& x, const DropoutCtx& drop) {
  if (drop.p == 0.0) return x;
  if (drop.rng == nullptr) {
    throw ConfigError("dropout: p > 0 with no rng");
  }
  Tensor mask = make_dropout_mask(x.v().shape, drop.p, drop.rng);
  return hadamard(t, x, own_var(std::move(mask)));
}

Var apply_ln(Tape* t, const Var& x, LnParams& ln) {
  return layer_norm(t, x, as_var(t, ln.gain), as_var(t, ln.bias));
}

}  // namespace

Var mha_sublayer(Tape* t, const Var& x_q, const Var& memory,
                 bool self_attention, LnParams& ln,
                 MhaProjections& proj, int n_heads,
                 const AttentionMask* mask, const DropoutCtx& drop,
                 std::vector<Tensor>* scores_out) {
  Var xn = apply_ln(t, x_q, ln);
  // One shared LN: the same normalization parameters are applied to the
  // memory that provides keys and values.
  Var mn = self_attention ? xn : apply_ln(t, memory, ln);
  Var att = multi_head_attention(t, xn, mn, proj, n_heads, mask, scores_out);
  return add(t, x_q, maybe_dropout(t, att, drop));
}

Var ffn_sublayer(Tape* t, const Var& x, LnParams& ln, FfnParams& p,
                 AttentionConfig::Activation act, const DropoutCtx& drop) {
  Var f = position_wise_ffn(t, apply_ln(t, x, ln), p, act);
  return add(t, x, maybe_dropout(t, f, drop));
}

Var attention_block(Tape* t, const Var& x_q, const Var& memory,
                    bool self_attention, BlockParams& p,
                    const AttentionConfig& cfg, const AttentionMask* mask,
                    const DropoutCtx& drop, std::vector<Tensor>* scores_out) {
  Var h = mha_sublayer(t, x_q, memory, self_attention, p.ln_att, p.proj,
                       cfg.n_heads, mask, drop, scores_out);
  return ffn_sublayer(t, h, p.ln_ffn, p.ffn, cfg.activation, drop);
}

}  // namespace laso
