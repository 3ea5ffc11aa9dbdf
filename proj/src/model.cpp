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

#include "laso/model.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "laso/error.h"
#include "laso/rng.h"
#include "laso/vocab_ids.h"

namespace laso {

namespace {

std::int64_t numel(const Parameter& p) {
  return static_cast<std::int64_t>(p.value.data.size());
}

// First n rows of the sinusoidal position encoding, memoized in *cache.
// Row values depend only on the row index, so a larger table has the same
// leading rows.
Tensor pe_slice(Tensor* cache, int n, int d) {
  int rows = cache->shape.empty() ? 0 : cache->shape[0];
  int cols = cache->shape.size() == 2 ? cache->shape[1] : -1;
  if (rows < n || cols != d) {
    *cache = sinusoidal_pe(std::max(n, rows), d);
  }
  Tensor out({n, d});
  std::copy(cache->data.begin(),
            cache->data.begin() + static_cast<std::size_t>(n) * d,
            out.data.begin());
  return out;
}

// Frontend + masked self-attention stack + final LN over one (possibly
// right-padded) feature matrix. pe must already have the output row count.
EncodeResult run_encoder(Tape* t, EncoderParams& p, const AttentionConfig& cfg,
                         const Tensor& features, int valid_t0,
                         const RunOpts& opts, Tensor pe,
                         const char* module_name, Diagnostics* diag) {
  Var x = conv_subsample(t, own_var(features), p.frontend, valid_t0);
  int t_rows = x.v().shape[0];
  int t_valid = valid_t0 >= 0 ? conv_out_len(conv_out_len(valid_t0)) : t_rows;
  x = add(t, x, own_var(std::move(pe)));
  std::optional<AttentionMask> mask;
  if (t_valid < t_rows) {
    mask.emplace(AttentionMask::key_padding(t_rows, t_rows, t_valid));
  }
  DropoutCtx drop{opts.training ? cfg.dropout : 0.0, opts.dropout_rng};
  bool want_scores = opts.collect_diagnostics && diag != nullptr;
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    std::vector<Tensor> scores;
    x = attention_block(t, x, x, true, p.blocks[i], cfg,
                        mask ? &*mask : nullptr, drop,
                        want_scores ? &scores : nullptr);
    if (want_scores) {
      for (int h = 0; h < static_cast<int>(scores.size()); ++h) {
        (*diag)[DiagKey{module_name, static_cast<int>(i), h}] =
            std::move(scores[h]);
      }
    }
  }
  if (!p.blocks.empty()) {
    x = layer_norm(t, x, as_var(t, p.final_ln.gain),
                   as_var(t, p.final_ln.bias));
  }
  return EncodeResult{x, t_valid};
}

}  // namespace

void EncoderParams::init(const AttentionConfig& cfg, int n_blocks, int d_feat,
                         const std::string& prefix, RngStream* rng) {
  frontend.init(d_feat, cfg.d_model, rng);
  blocks.resize(n_blocks);
  for (int i = 0; i < n_blocks; ++i) {
    blocks[i].init(cfg, prefix + ".block" + std::to_string(i), rng);
  }
  if (n_blocks > 0) {
    final_ln.init(cfg.d_model, prefix + ".final_ln");
  }
}

void EncoderParams::collect(std::vector<Parameter*>* out) {
  frontend.collect(out);
  for (BlockParams& b : blocks) b.collect(out);
  if (!blocks.empty()) final_ln.collect(out);
}

std::int64_t EncoderParams::param_count(const AttentionConfig& cfg,
                                        int n_blocks, int d_feat) {
  std::int64_t n = ConvFrontendParams::param_count(d_feat, cfg.d_model);
  n += static_cast<std::int64_t>(n_blocks) * BlockParams::param_count(cfg);
  if (n_blocks > 0) n += 2 * cfg.d_model;
  return n;
}

void LasoConfig::validate() const {
  attention.validate();
  if (n_enc < 0 || n_dec < 0) {
    throw ConfigError("laso config: negative stack depth");
  }
  if (n_pds < 1) {
    throw ConfigError("laso config: need at least one summarizer block");
  }
  if (max_len < 1) {
    throw ConfigError("laso config: max_len must be positive");
  }
  if (vocab_size < kNumReservedIds + 1) {
    throw ConfigError("laso config: vocab_size must exceed the " +
                      std::to_string(kNumReservedIds) + " reserved ids");
  }
  if (d_feat < 1) {
    throw ConfigError("laso config: d_feat must be positive");
  }
  if (teacher_dim < 0) {
    throw ConfigError("laso config: teacher_dim must be >= 0");
  }
}

LasoModel::LasoModel(const LasoConfig& cfg, RngStream* init_rng) : cfg_(cfg) {
  cfg_.validate();
  const AttentionConfig& a = cfg_.attention;
  encoder_.init(a, cfg_.n_enc, cfg_.d_feat, "enc", init_rng);
  pds_blocks_.resize(cfg_.n_pds);
  for (int i = 0; i < cfg_.n_pds; ++i) {
    pds_blocks_[i].init(a, "pds.block" + std::to_string(i), init_rng);
  }
  pds_final_ln_.init(a.d_model, "pds.final_ln");
  dec_blocks_.resize(cfg_.n_dec);
  for (int i = 0; i < cfg_.n_dec; ++i) {
    dec_blocks_[i].init(a, "dec.block" + std::to_string(i), init_rng);
  }
  if (cfg_.n_dec > 0) {
    dec_final_ln_.init(a.d_model, "dec.final_ln");
  }
  out_w_ = Parameter("out.w", xavier_uniform({a.d_model, cfg_.vocab_size},
                                             a.d_model, cfg_.vocab_size,
                                             init_rng));
  out_b_ = Parameter("out.b", Tensor::zeros({cfg_.vocab_size}));
  if (cfg_.teacher_dim > 0) {
    teacher_proj_ = Parameter(
        "distill.proj", xavier_uniform({a.d_model, cfg_.teacher_dim},
                                       a.d_model, cfg_.teacher_dim, init_rng));
    has_teacher_proj_ = true;
  }

  encoder_.collect(&params_);
  for (BlockParams& b : pds_blocks_) b.collect(&params_);
  pds_final_ln_.collect(&params_);
  for (BlockParams& b : dec_blocks_) b.collect(&params_);
  if (cfg_.n_dec > 0) dec_final_ln_.collect(&params_);
  params_.push_back(&out_w_);
  params_.push_back(&out_b_);
  if (has_teacher_proj_) params_.push_back(&teacher_proj_);

  std::int64_t total = 0;
  for (Parameter* p : params_) total += numel(*p);
  if (total != expected_param_count(cfg_)) {
    throw ConfigError("laso model: registered " + std::to_string(total) +
                      " parameters, expected " +
                      std::to_string(expected_param_count(cfg_)));
  }
}

void LasoModel::zero_grads() {
  for (Parameter* p : params_) p->zero_grad();
}

std::int64_t LasoModel::expected_param_count(const LasoConfig& cfg) {
  const AttentionConfig& a = cfg.attention;
  std::int64_t n = EncoderParams::param_count(a, cfg.n_enc, cfg.d_feat);
  n += static_cast<std::int64_t>(cfg.n_pds) * BlockParams::param_count(a);
  n += 2 * a.d_model;  // summarizer final LN
  n += static_cast<std::int64_t>(cfg.n_dec) * BlockParams::param_count(a);
  if (cfg.n_dec > 0) n += 2 * a.d_model;
  n += static_cast<std::int64_t>(a.d_model) * cfg.vocab_size + cfg.vocab_size;
  if (cfg.teacher_dim > 0) {
    n += static_cast<std::int64_t>(a.d_model) * cfg.teacher_dim;
  }
  return n;
}

Tensor LasoModel::pe_rows(int n) {
  return pe_slice(&pe_cache_, n, cfg_.attention.d_model);
}

EncodeResult LasoModel::encode(Tape* t, const Tensor& features,
                               const RunOpts& opts, int valid_t0,
                               Diagnostics* diag) {
  if (features.shape.size() != 2 ||
      features.shape[1] != cfg_.d_feat) {
    throw ShapeError("encode: features must be [t, " +
                     std::to_string(cfg_.d_feat) + "], got " +
                     shape_str(features.shape));
  }
  int t_rows = conv_out_len(conv_out_len(features.shape[0]));
  return run_encoder(t, encoder_, cfg_.attention, features, valid_t0, opts,
                     pe_rows(t_rows), "enc", diag);
}

Var LasoModel::summarize(Tape* t, const EncodeResult& enc, const RunOpts& opts,
                         Diagnostics* diag) {
  const AttentionConfig& a = cfg_.attention;
  int t_rows = enc.z.v().shape[0];
  std::optional<AttentionMask> mask;
  if (enc.t_valid < t_rows) {
    mask.emplace(AttentionMask::key_padding(cfg_.max_len, t_rows, enc.t_valid));
  }
  DropoutCtx drop{opts.training ? a.dropout : 0.0, opts.dropout_rng};
  bool want_scores = opts.collect_diagnostics && diag != nullptr;
  // The first block's queries are the position encodings of the output
  // slots; later blocks refine the previous block's output. Keys and values
  // are always the encoded frames.
  Var q = own_var(pe_rows(cfg_.max_len));
  for (int i = 0; i < cfg_.n_pds; ++i) {
    std::vector<Tensor> scores;
    q = attention_block(t, q, enc.z, false, pds_blocks_[i], a,
                        mask ? &*mask : nullptr, drop,
                        want_scores ? &scores : nullptr);
    if (want_scores) {
      for (int h = 0; h < static_cast<int>(scores.size()); ++h) {
        (*diag)[DiagKey{"pds", i, h}] = std::move(scores[h]);
      }
    }
  }
  return layer_norm(t, q, as_var(t, pds_final_ln_.gain),
                    as_var(t, pds_final_ln_.bias));
}

LasoModel::DecodeResult LasoModel::decode(Tape* t, const Var& slots,
                                          const RunOpts& opts,
                                          Diagnostics* diag) {
  const AttentionConfig& a = cfg_.attention;
  DropoutCtx drop{opts.training ? a.dropout : 0.0, opts.dropout_rng};
  bool want_scores = opts.collect_diagnostics && diag != nullptr;
  Var x = slots;
  for (int i = 0; i < cfg_.n_dec; ++i) {
    std::vector<Tensor> scores;
    x = attention_block(t, x, x, true, dec_blocks_[i], a, nullptr, drop,
                        want_scores ? &scores : nullptr);
    if (want_scores) {
      for (int h = 0; h < static_cast<int>(scores.size()); ++h) {
        (*diag)[DiagKey{"dec", i, h}] = std::move(scores[h]);
      }
    }
  }
  if (cfg_.n_dec > 0) {
    x = layer_norm(t, x, as_var(t, dec_final_ln_.gain),
                   as_var(t, dec_final_ln_.bias));
  }
  Var logits = add_bias(t, matmul(t, x, as_var(t, out_w_)),
                        as_var(t, out_b_));
  Var probs = softmax_rows(t, logits);
  stats_.decoder_passes += 1;
  stats_.decoder_block_calls += static_cast<std::uint64_t>(cfg_.n_dec);
  return DecodeResult{probs, x};
}

ForwardResult LasoModel::forward(Tape* t, const Tensor& features,
                                 const RunOpts& opts) {
  return forward_padded(t, features, -1, opts);
}

ForwardResult LasoModel::forward_padded(Tape* t, const Tensor& features,
                                        int valid_t0, const RunOpts& opts) {
  ForwardResult r;
  Diagnostics* diag = opts.collect_diagnostics ? &r.diagnostics : nullptr;
  EncodeResult enc = encode(t, features, opts, valid_t0, diag);
  Var slots = summarize(t, enc, opts, diag);
  DecodeResult d = decode(t, slots, opts, diag);
  r.probs = d.probs;
  r.dec_hidden = d.hidden;
  return r;
}

std::vector<ForwardResult> LasoModel::forward_batch(
    Tape* t, const Tensor& features, const std::vector<int>& frame_counts,
    const RunOpts& opts) {
  if (features.shape.size() != 3) {
    throw ShapeError("forward_batch: features must be [batch, t, d], got " +
                     shape_str(features.shape));
  }
  int b = features.shape[0];
  int t_max = features.shape[1];
  int d = features.shape[2];
  if (static_cast<int>(frame_counts.size()) != b) {
    throw ShapeError("forward_batch: got " +
                     std::to_string(frame_counts.size()) +
                     " frame counts for batch of " + std::to_string(b));
  }
  std::vector<ForwardResult> out;
  out.reserve(b);
  for (int i = 0; i < b; ++i) {
    if (frame_counts[i] < 1 || frame_counts[i] > t_max) {
      throw DataError("forward_batch: frame count " +
                      std::to_string(frame_counts[i]) +
                      " outside [1, " + std::to_string(t_max) + "]");
    }
    Tensor item({t_max, d});
    std::size_t stride = static_cast<std::size_t>(t_max) * d;
    std::copy(features.data.begin() + i * stride,
              features.data.begin() + (i + 1) * stride, item.data.begin());
    int valid = frame_counts[i] == t_max ? -1 : frame_counts[i];
    out.push_back(forward_padded(t, item, valid, opts));
  }
  return out;
}

Parameter* LasoModel::teacher_projection() {
  return has_teacher_proj_ ? &teacher_proj_ : nullptr;
}

void ArConfig::validate() const {
  attention.validate();
  if (n_enc < 0 || n_dec < 0) {
    throw ConfigError("ar config: negative stack depth");
  }
  if (max_len < 1) {
    throw ConfigError("ar config: max_len must be positive");
  }
  if (vocab_size < kNumReservedIds + 1) {
    throw ConfigError("ar config: vocab_size must exceed the " +
                      std::to_string(kNumReservedIds) + " reserved ids");
  }
  if (d_feat < 1) {
    throw ConfigError("ar config: d_feat must be positive");
  }
}

void ArBlockParams::init(const AttentionConfig& cfg, const std::string& prefix,
                         RngStream* rng) {
  ln_self.init(cfg.d_model, prefix + ".ln_self");
  self_proj.init(cfg, prefix + ".self", rng);
  ln_cross.init(cfg.d_model, prefix + ".ln_cross");
  cross_proj.init(cfg, prefix + ".cross", rng);
  ln_ffn.init(cfg.d_model, prefix + ".ln_ffn");
  ffn.init(cfg, prefix + ".ffn", rng);
}

void ArBlockParams::collect(std::vector<Parameter*>* out) {
  ln_self.collect(out);
  self_proj.collect(out);
  ln_cross.collect(out);
  cross_proj.collect(out);
  ln_ffn.collect(out);
  ffn.collect(out);
}

std::int64_t ArBlockParams::param_count(const AttentionConfig& cfg) {
  return 6 * static_cast<std::int64_t>(cfg.d_model) +
         2 * MhaProjections::param_count(cfg) + FfnParams::param_count(cfg);
}

ArBaselineModel::ArBaselineModel(const ArConfig& cfg, RngStream* init_rng)
    : cfg_(cfg) {
  cfg_.validate();
  const AttentionConfig& a = cfg_.attention;
  encoder_.init(a, cfg_.n_enc, cfg_.d_feat, "enc", init_rng);
  embed_ = Parameter("dec.embed",
                     xavier_uniform({cfg_.vocab_size, a.d_model},
                                    cfg_.vocab_size, a.d_model, init_rng));
  dec_blocks_.resize(cfg_.n_dec);
  for (int i = 0; i < cfg_.n_dec; ++i) {
    dec_blocks_[i].init(a, "dec.block" + std::to_string(i), init_rng);
  }
  if (cfg_.n_dec > 0) {
    dec_final_ln_.init(a.d_model, "dec.final_ln");
  }
  out_w_ = Parameter("out.w", xavier_uniform({a.d_model, cfg_.vocab_size},
                                             a.d_model, cfg_.vocab_size,
                                             init_rng));
  out_b_ = Parameter("out.b", Tensor::zeros({cfg_.vocab_size}));

  encoder_.collect(&params_);
  params_.push_back(&embed_);
  for (ArBlockParams& b : dec_blocks_) b.collect(&params_);
  if (cfg_.n_dec > 0) dec_final_ln_.collect(&params_);
  params_.push_back(&out_w_);
  params_.push_back(&out_b_);

  std::int64_t total = 0;
  for (Parameter* p : params_) total += numel(*p);
  if (total != expected_param_count(cfg_)) {
    throw ConfigError("ar model: registered " + std::to_string(total) +
                      " parameters, expected " +
                      std::to_string(expected_param_count(cfg_)));
  }
}

void ArBaselineModel::zero_grads() {
  for (Parameter* p : params_) p->zero_grad();
}

std::int64_t ArBaselineModel::expected_param_count(const ArConfig& cfg) {
  const AttentionConfig& a = cfg.attention;
  std::int64_t n = EncoderParams::param_count(a, cfg.n_enc, cfg.d_feat);
  n += static_cast<std::int64_t>(cfg.vocab_size) * a.d_model;  // embedding
  n += static_cast<std::int64_t>(cfg.n_dec) * ArBlockParams::param_count(a);
  if (cfg.n_dec > 0) n += 2 * a.d_model;
  n += static_cast<std::int64_t>(a.d_model) * cfg.vocab_size + cfg.vocab_size;
  return n;
}

Tensor ArBaselineModel::pe_rows(int n) {
  return pe_slice(&pe_cache_, n, cfg_.attention.d_model);
}

EncodeResult ArBaselineModel::encode(Tape* t, const Tensor& features,
                                     const RunOpts& opts, int valid_t0) {
  if (features.shape.size() != 2 || features.shape[1] != cfg_.d_feat) {
    throw ShapeError("encode: features must be [t, " +
                     std::to_string(cfg_.d_feat) + "], got " +
                     shape_str(features.shape));
  }
  int t_rows = conv_out_len(conv_out_len(features.shape[0]));
  return run_encoder(t, encoder_, cfg_.attention, features, valid_t0, opts,
                     pe_rows(t_rows), "enc", nullptr);
}

Var ArBaselineModel::decode_train(Tape* t, const std::vector<int>& input_ids,
                                  const EncodeResult& enc,
                                  const RunOpts& opts) {
  if (input_ids.empty()) {
    throw DataError("decode_train: empty decoder input");
  }
  int n = static_cast<int>(input_ids.size());
  if (n > cfg_.max_len + 1) {
    throw DataError("decode_train: decoder input of " + std::to_string(n) +
                    " exceeds max_len " + std::to_string(cfg_.max_len) +
                    " plus <sos>");
  }
  const AttentionConfig& a = cfg_.attention;
  Var x = embedding_lookup(t, as_var(t, embed_), input_ids);
  x = add(t, x, own_var(pe_rows(n)));
  AttentionMask causal = AttentionMask::causal(n);
  int t_rows = enc.z.v().shape[0];
  std::optional<AttentionMask> cross;
  if (enc.t_valid < t_rows) {
    cross.emplace(AttentionMask::key_padding(n, t_rows, enc.t_valid));
  }
  DropoutCtx drop{opts.training ? a.dropout : 0.0, opts.dropout_rng};
  for (ArBlockParams& b : dec_blocks_) {
    Var h = mha_sublayer(t, x, x, true, b.ln_self, b.self_proj, a.n_heads,
                         &causal, drop);
    h = mha_sublayer(t, h, enc.z, false, b.ln_cross, b.cross_proj, a.n_heads,
                     cross ? &*cross : nullptr, drop);
    x = ffn_sublayer(t, h, b.ln_ffn, b.ffn, a.activation, drop);
  }
  if (!dec_blocks_.empty()) {
    x = layer_norm(t, x, as_var(t, dec_final_ln_.gain),
                   as_var(t, dec_final_ln_.bias));
  }
  Var logits = add_bias(t, matmul(t, x, as_var(t, out_w_)),
                        as_var(t, out_b_));
  Var probs = softmax_rows(t, logits);
  stats_.decoder_passes += 1;
  stats_.decoder_block_calls += static_cast<std::uint64_t>(dec_blocks_.size());
  return probs;
}

Tensor ArBaselineModel::step_probs(const std::vector<int>& prefix_ids,
                                   const EncodeResult& enc) {
  RunOpts opts;
  Var probs = decode_train(nullptr, prefix_ids, enc, opts);
  int n = probs.v().shape[0];
  int v = probs.v().shape[1];
  Tensor row({v});
  std::copy(probs.v().data.begin() + static_cast<std::size_t>(n - 1) * v,
            probs.v().data.end(), row.data.begin());
  return row;
}

namespace {

int argmax_lowest(const Tensor& p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.data.size()); ++i) {
    // strict > keeps the lowest id on ties
    if (p.data[i] > p.data[best]) best = i;
  }
  return best;
}

std::vector<int> strip_specials(const std::vector<int>& prefix) {
  std::vector<int> tokens;
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (prefix[i] == kSosId) continue;
    if (prefix[i] == kEosId) break;
    tokens.push_back(prefix[i]);
  }
  return tokens;
}

}  // namespace

ArDecodeResult ar_greedy_decode(ArBaselineModel& model, const Tensor& features,
                                int max_len) {
  if (max_len < 1 || max_len > model.config().max_len) {
    throw ConfigError("greedy_decode: max_len " + std::to_string(max_len) +
                      " outside [1, " + std::to_string(model.config().max_len) +
                      "]");
  }
  RunOpts opts;
  EncodeResult enc = model.encode(nullptr, features, opts);
  std::uint64_t passes0 = model.stats().decoder_passes;
  std::vector<int> prefix{kSosId};
  double logp = 0.0;
  for (int step = 0; step < max_len; ++step) {
    Tensor p = model.step_probs(prefix, enc);
    int best = argmax_lowest(p);
    logp += std::log(p.data[best]);
    prefix.push_back(best);
    if (best == kEosId) break;
  }
  ArDecodeResult r;
  r.tokens = strip_specials(prefix);
  r.logp = logp;
  r.decoder_passes = model.stats().decoder_passes - passes0;
  return r;
}

ArDecodeResult ar_beam_decode(ArBaselineModel& model, const Tensor& features,
                              int beam, int max_len) {
  if (beam < 1) {
    throw ConfigError("beam_decode: beam must be >= 1, got " +
                      std::to_string(beam));
  }
  if (max_len < 1 || max_len > model.config().max_len) {
    throw ConfigError("beam_decode: max_len " + std::to_string(max_len) +
                      " outside [1, " + std::to_string(model.config().max_len) +
                      "]");
  }
  struct Hyp {
    std::vector<int> prefix;
    double logp;
  };
  RunOpts opts;
  EncodeResult enc = model.encode(nullptr, features, opts);
  std::uint64_t passes0 = model.stats().decoder_passes;
  std::vector<Hyp> live{{std::vector<int>{kSosId}, 0.0}};
  std::vector<Hyp> done;
  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hyp> cand;
    cand.reserve(live.size() * model.config().vocab_size);
    for (const Hyp& h : live) {
      Tensor p = model.step_probs(h.prefix, enc);
      for (int tok = 0; tok < static_cast<int>(p.data.size()); ++tok) {
        Hyp c{h.prefix, h.logp + std::log(p.data[tok])};
        c.prefix.push_back(tok);
        cand.push_back(std::move(c));
      }
    }
    // Stable sort: ties resolve to the earlier candidate, which is the
    // lower-id token of the earlier-ranked hypothesis. With beam == 1 this
    // reproduces greedy decoding tie for tie.
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Hyp& a, const Hyp& b) { return a.logp > b.logp; });
    if (static_cast<int>(cand.size()) > beam) cand.resize(beam);
    live.clear();
    for (Hyp& c : cand) {
      if (c.prefix.back() == kEosId) {
        done.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
  }
  // anything still open at max_len is terminated as-is
  for (Hyp& h : live) done.push_back(std::move(h));
  const Hyp* best = &done.front();
  for (const Hyp& h : done) {
    if (h.logp > best->logp) best = &h;
  }
  ArDecodeResult r;
  r.tokens = strip_specials(best->prefix);
  r.logp = best->logp;
  r.decoder_passes = model.stats().decoder_passes - passes0;
  return r;
}

}  // namespace laso
