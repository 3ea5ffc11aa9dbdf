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

#include "laso/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <utility>

#include "laso/attention.h"
#include "laso/checkpoint.h"
#include "laso/error.h"
#include "laso/ops.h"
#include "laso/rng.h"
#include "laso/vocab_ids.h"

namespace laso {

namespace {

const Tensor& out_grad(Tape& t, const Tape::Record& r) {
  return *t.grad_if_any(r.out);
}

}  // namespace

void TrainConfig::validate() const {
  if (warmup_steps < 1) {
    throw ConfigError("train config: warmup_steps must be >= 1");
  }
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("train config: label_smoothing must be in [0, 1)");
  }
  if (lambda < 0.0) {
    throw ConfigError("train config: lambda must be >= 0");
  }
  if (accum_steps < 1) {
    throw ConfigError("train config: accum_steps must be >= 1");
  }
  if (epochs < 1) {
    throw ConfigError("train config: epochs must be >= 1");
  }
  if (!(batch_seconds > 0.0)) {
    throw ConfigError("train config: batch_seconds must be positive");
  }
  if (avg_last_k < 1) {
    throw ConfigError("train config: avg_last_k must be >= 1");
  }
  if (specaug.freq_width < 0 || specaug.time_width < 0 ||
      specaug.n_freq_masks < 0 || specaug.n_time_masks < 0) {
    throw ConfigError("train config: specaug widths and counts must be >= 0");
  }
}

Var nll_loss(Tape* t, const Var& probs, const std::vector<int>& target_ids,
             double label_smoothing) {
  check_ndim(probs.v(), 2, "nll_loss");
  const int rows = probs.v().dim(0);
  const int vocab = probs.v().dim(1);
  if (static_cast<int>(target_ids.size()) != rows) {
    throw ShapeError("nll_loss: " + std::to_string(target_ids.size()) +
                     " targets for " + std::to_string(rows) + " rows");
  }
  if (vocab < 2) {
    throw ShapeError("nll_loss: need at least 2 classes, got " +
                     std::to_string(vocab));
  }
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("nll_loss: label smoothing " +
                      std::to_string(label_smoothing) + " outside [0, 1)");
  }
  for (int i = 0; i < rows; ++i) {
    if (target_ids[i] < 0 || target_ids[i] >= vocab) {
      throw DataError("nll_loss: target id " + std::to_string(target_ids[i]) +
                      " at position " + std::to_string(i) +
                      " outside vocabulary of " + std::to_string(vocab));
    }
  }
  // smoothed target distribution: 1 - eps on gold, eps split over the rest
  const double on = 1.0 - label_smoothing;
  const double off = label_smoothing / (vocab - 1);
  const Tensor& p = probs.v();
  double sum = 0.0;
  for (int i = 0; i < rows; ++i) {
    for (int v = 0; v < vocab; ++v) {
      double q = v == target_ids[i] ? on : off;
      // q == 0 terms are skipped so eps = 0 never evaluates log(0) * 0
      if (q > 0.0) sum += q * std::log(p.at(i, v));
    }
  }
  Tensor out({1});
  out.data[0] = -sum / rows;
  if (!t) return own_var(std::move(out));
  const int ip = t->intern(probs);
  std::vector<int> targets = target_ids;
  return t->emit(
      "nll_loss", std::move(out), {ip},
      [ip, targets = std::move(targets), on, off, rows,
       vocab](Tape& tp, const Tape::Record& r) {
        Tensor* gp = tp.grad_accum(ip);
        if (!gp) return;
        const double g = out_grad(tp, r).data[0];
        const Tensor& pv = tp.value(ip);
        for (int i = 0; i < rows; ++i) {
          for (int v = 0; v < vocab; ++v) {
            double q = v == targets[i] ? on : off;
            if (q > 0.0) {
              gp->at(i, v) -= g * q / (pv.at(i, v) * rows);
            }
          }
        }
      });
}

Var distill_mse(Tape* t, const Var& dec_hidden, const TeacherOutputs& teacher,
                Parameter* projection) {
  check_ndim(dec_hidden.v(), 2, "distill_mse");
  check_ndim(teacher.hidden, 2, "distill_mse");
  const int slots = dec_hidden.v().dim(0);
  const int d_student = dec_hidden.v().dim(1);
  const int valid = teacher.valid_len;
  const int d_teacher = teacher.hidden.dim(1);
  if (teacher.hidden.dim(0) != valid) {
    throw DataError("distill_mse: teacher hidden has " +
                    std::to_string(teacher.hidden.dim(0)) +
                    " rows but valid_len is " + std::to_string(valid));
  }
  if (valid < 1 || valid > slots) {
    throw DataError("distill_mse: teacher valid length " +
                    std::to_string(valid) + " outside [1, " +
                    std::to_string(slots) + "]");
  }
  // only the valid span participates; gradient past it is exactly zero
  Var h = slice_rows(t, dec_hidden, 0, valid);
  Var x;
  if (projection) {
    if (projection->value.shape != std::vector<int>{d_student, d_teacher}) {
      throw ShapeError("distill_mse: projection " +
                       shape_str(projection->value.shape) + " cannot map " +
                       std::to_string(d_student) + " -> " +
                       std::to_string(d_teacher));
    }
    x = matmul(t, h, as_var(t, *projection));
  } else {
    if (d_student != d_teacher) {
      throw ShapeError("distill_mse: decoder width " +
                       std::to_string(d_student) +
                       " differs from teacher width " +
                       std::to_string(d_teacher) +
                       " and no projection was given");
    }
    x = h;
  }
  Var diff = sub(t, x, own_var(teacher.hidden));
  Var sq = hadamard(t, diff, diff);
  return scale(t, sum_all(t, sq), 1.0 / valid);
}

Var combined_loss(Tape* t, const Var& nll, const Var& mse, double lambda) {
  if (lambda < 0.0) {
    throw ConfigError("combined_loss: lambda must be >= 0, got " +
                      std::to_string(lambda));
  }
  if (lambda == 0.0) return nll;
  return add(t, nll, scale(t, mse, lambda));
}

double lr_schedule(std::int64_t step, int d_model, int warmup_steps) {
  if (step < 1) {
    throw ConfigError("lr_schedule: step must be >= 1, got " +
                      std::to_string(step));
  }
  if (d_model < 1 || warmup_steps < 1) {
    throw ConfigError("lr_schedule: d_model and warmup_steps must be positive");
  }
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.shape);
    v_.emplace_back(p->value.shape);
  }
}

void AdamOptimizer::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.value.data.size(); ++j) {
      const double g = p.grad.data[j];
      m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g;
      v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g * g;
      p.value.data[j] -=
          lr * (m.data[j] / bc1) / (std::sqrt(v.data[j] / bc2) + cfg_.eps);
    }
  }
}

Tensor spec_augment(const Tensor& features, const SpecAugmentConfig& cfg,
                    RngStream* rng) {
  check_ndim(features, 2, "spec_augment");
  Tensor out = features;
  if (!cfg.enabled) return out;
  if (!rng) {
    throw ConfigError("spec_augment: enabled but no rng given");
  }
  const int t0 = out.dim(0);
  const int d = out.dim(1);
  for (int k = 0; k < cfg.n_freq_masks; ++k) {
    int w = rng->uniform_int(0, std::min(cfg.freq_width, d));
    int start = w < d ? rng->uniform_int(0, d - w) : 0;
    for (int r = 0; r < t0; ++r) {
      for (int c = start; c < start + w; ++c) out.at(r, c) = 0.0;
    }
  }
  for (int k = 0; k < cfg.n_time_masks; ++k) {
    int w = rng->uniform_int(0, std::min(cfg.time_width, t0));
    int start = w < t0 ? rng->uniform_int(0, t0 - w) : 0;
    for (int r = start; r < start + w; ++r) {
      for (int c = 0; c < d; ++c) out.at(r, c) = 0.0;
    }
  }
  return out;
}

void TeacherConfig::validate() const {
  if (vocab_size < kNumReservedIds + 1) {
    throw ConfigError("teacher config: vocab_size must exceed the reserved ids");
  }
  if (max_len < 3) {
    throw ConfigError("teacher config: max_len must fit <sos> token <eos>");
  }
  if (mask_prob <= 0.0 || mask_prob > 1.0) {
    throw ConfigError("teacher config: mask_prob must be in (0, 1]");
  }
  if (epochs < 0 || batch_size < 1 || warmup_steps < 1) {
    throw ConfigError("teacher config: invalid pretraining schedule");
  }
  AttentionConfig att{d_model, n_heads, d_inner,
                      AttentionConfig::Activation::kRelu, dropout};
  att.validate();
}

ToyTeacher::ToyTeacher(const TeacherConfig& cfg, RngStream* init_rng)
    : cfg_(cfg) {
  cfg_.validate();
  att_ = AttentionConfig{cfg_.d_model, cfg_.n_heads, cfg_.d_inner,
                         AttentionConfig::Activation::kRelu, cfg_.dropout};
  embed_ = Parameter("teacher.embed",
                     xavier_uniform({cfg_.vocab_size, cfg_.d_model},
                                    cfg_.vocab_size, cfg_.d_model, init_rng));
  blocks_.resize(cfg_.n_blocks);
  for (int i = 0; i < cfg_.n_blocks; ++i) {
    blocks_[i].init(att_, "teacher.block" + std::to_string(i), init_rng);
  }
  final_ln_.init(cfg_.d_model, "teacher.final_ln");
  out_w_ = Parameter("teacher.out.w",
                     xavier_uniform({cfg_.d_model, cfg_.vocab_size},
                                    cfg_.d_model, cfg_.vocab_size, init_rng));
  out_b_ = Parameter("teacher.out.b", Tensor::zeros({cfg_.vocab_size}));
  params_.push_back(&embed_);
  for (BlockParams& b : blocks_) b.collect(&params_);
  final_ln_.collect(&params_);
  params_.push_back(&out_w_);
  params_.push_back(&out_b_);
}

void ToyTeacher::zero_grads() {
  for (Parameter* p : params_) p->zero_grad();
}

Var ToyTeacher::encode_ids(Tape* t, const std::vector<int>& ids,
                           const DropoutCtx& drop) {
  const int n = static_cast<int>(ids.size());
  if (n < 1 || n > cfg_.max_len) {
    throw DataError("teacher: sequence of " + std::to_string(n) +
                    " outside [1, " + std::to_string(cfg_.max_len) + "]");
  }
  Var x = embedding_lookup(t, as_var(t, embed_), ids);
  x = add(t, x, own_var(sinusoidal_pe(n, cfg_.d_model)));
  for (BlockParams& b : blocks_) {
    x = attention_block(t, x, x, true, b, att_, nullptr, drop);
  }
  return layer_norm(t, x, as_var(t, final_ln_.gain), as_var(t, final_ln_.bias));
}

TeacherOutputs ToyTeacher::hidden(const std::vector<int>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kSosId);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  ids.push_back(kEosId);
  DropoutCtx drop{0.0, nullptr};
  Var h = encode_ids(nullptr, ids, drop);
  return TeacherOutputs{h.v(), static_cast<int>(ids.size())};
}

Var ToyTeacher::predict(Tape* t, const std::vector<int>& input_ids,
                        bool training, RngStream* dropout_rng) {
  DropoutCtx drop{training ? cfg_.dropout : 0.0, dropout_rng};
  Var h = encode_ids(t, input_ids, drop);
  Var logits = add_bias(t, matmul(t, h, as_var(t, out_w_)), as_var(t, out_b_));
  return softmax_rows(t, logits);
}

ToyTeacher pretrain_toy_teacher(const Corpus& corpus, const TeacherConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) {
    throw DataError("pretrain_toy_teacher: empty corpus");
  }
  RngStream root(cfg.seed);
  RngStream init_rng = root.fork(1);
  ToyTeacher teacher(cfg, &init_rng);
  RngStream shuffle_rng = root.fork(2);
  RngStream mask_rng = root.fork(3);
  RngStream drop_rng = root.fork(4);
  AdamOptimizer opt(teacher.parameters());
  teacher.zero_grads();
  std::int64_t step = 0;
  std::vector<int> indices(corpus.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = indices.size(); i > 1; --i) {
      std::swap(indices[i - 1],
                indices[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);
    }
    for (std::size_t at = 0; at < indices.size(); at += cfg.batch_size) {
      std::size_t end = std::min(at + cfg.batch_size, indices.size());
      const double inv_batch = 1.0 / static_cast<double>(end - at);
      for (std::size_t b = at; b < end; ++b) {
        const std::vector<int>& tokens = corpus[indices[b]].tokens;
        if (tokens.empty()) continue;
        std::vector<int> ids;
        ids.reserve(tokens.size() + 2);
        ids.push_back(kSosId);
        ids.insert(ids.end(), tokens.begin(), tokens.end());
        ids.push_back(kEosId);
        std::vector<int> masked = ids;
        std::vector<int> positions;
        for (std::size_t p = 1; p + 1 < ids.size(); ++p) {
          if (mask_rng.uniform() < cfg.mask_prob) {
            masked[p] = kUnkId;
            positions.push_back(static_cast<int>(p));
          }
        }
        if (positions.empty()) {
          int p = 1 + mask_rng.uniform_int(0, static_cast<int>(tokens.size()) - 1);
          masked[p] = kUnkId;
          positions.push_back(p);
        }
        Tape tape;
        Var probs = teacher.predict(&tape, masked, true, &drop_rng);
        // loss over the masked rows only, via per-row slices
        Var total;
        for (std::size_t p = 0; p < positions.size(); ++p) {
          Var row = slice_rows(&tape, probs, positions[p], 1);
          Var li = nll_loss(&tape, row, {ids[positions[p]]}, 0.0);
          total = p == 0 ? li : add(&tape, total, li);
        }
        Var loss = scale(&tape, total,
                         inv_batch / static_cast<double>(positions.size()));
        if (!std::isfinite(loss.v().data[0])) {
          throw TrainError("teacher pretraining diverged at step " +
                           std::to_string(step + 1));
        }
        tape.backward(loss);
      }
      ++step;
      opt.step(lr_schedule(step, cfg.d_model, cfg.warmup_steps));
      teacher.zero_grads();
    }
  }
  return teacher;
}

double teacher_masked_accuracy(ToyTeacher& teacher,
                               const std::vector<std::vector<int>>& transcripts,
                               RngStream* rng) {
  int correct = 0, total = 0;
  for (const std::vector<int>& tokens : transcripts) {
    if (tokens.empty()) continue;
    std::vector<int> ids;
    ids.reserve(tokens.size() + 2);
    ids.push_back(kSosId);
    ids.insert(ids.end(), tokens.begin(), tokens.end());
    ids.push_back(kEosId);
    int p = 1 + rng->uniform_int(0, static_cast<int>(tokens.size()) - 1);
    std::vector<int> masked = ids;
    masked[p] = kUnkId;
    Var probs = teacher.predict(nullptr, masked, false, nullptr);
    const Tensor& pv = probs.v();
    int best = 0;
    for (int v = 1; v < pv.dim(1); ++v) {
      if (pv.at(p, v) > pv.at(p, best)) best = v;
    }
    if (best == ids[p]) ++correct;
    ++total;
  }
  if (total == 0) {
    throw DataError("teacher_masked_accuracy: no non-empty transcripts");
  }
  return static_cast<double>(correct) / total;
}

namespace {

struct UttLossOut {
  Var loss;  // combined objective for this utterance, unscaled
  double nll = 0.0;
  double mse = 0.0;
};

using UttLossFn =
    std::function<UttLossOut(Tape*, int, RngStream*, RngStream*)>;

std::string epoch_path(const std::string& out_dir, int epoch) {
  std::ostringstream s;
  s << out_dir << "/epoch_" << std::setw(3) << std::setfill('0') << epoch
    << ".ckpt";
  return s.str();
}

// Shared training loop: duration-packed shuffled batches, gradient
// accumulation over accum_steps batches per optimizer step, a checkpoint per
// epoch, then checkpoint averaging restored into the live parameters.
FitResult run_fit_loop(const Corpus& corpus, const TrainConfig& cfg,
                       const std::vector<Parameter*>& params, int d_model,
                       const UttLossFn& utt_loss, const std::string& out_dir,
                       const std::string& config_json) {
  cfg.validate();
  if (corpus.empty()) {
    throw DataError("fit: empty corpus");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("fit: cannot create output directory " + out_dir + ": " +
                  ec.message());
  }
  FitResult result;
  result.trace_path = out_dir + "/trace.csv";
  std::ofstream trace_file(result.trace_path);
  if (!trace_file) {
    throw IoError("fit: cannot open " + result.trace_path);
  }
  trace_file << "step,nll,mse,combined,lr\n";

  RngStream root(cfg.seed);
  AdamOptimizer opt(params);
  for (Parameter* p : params) p->zero_grad();
  std::int64_t step = 0;
  std::vector<int> indices(corpus.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_rng = root.fork(100 + epoch);
    RngStream drop_rng = root.fork(200 + epoch);
    RngStream aug_rng = root.fork(300 + epoch);
    for (std::size_t i = indices.size(); i > 1; --i) {
      std::swap(indices[i - 1],
                indices[shuffle_rng.uniform_int(0, static_cast<int>(i) - 1)]);
    }
    // pack shuffled utterances into batches of about batch_seconds audio
    std::vector<std::vector<int>> batches;
    std::vector<int> cur;
    double cur_seconds = 0.0;
    for (int idx : indices) {
      double d = corpus[idx].duration_seconds;
      if (!cur.empty() && cur_seconds + d > cfg.batch_seconds) {
        batches.push_back(std::move(cur));
        cur.clear();
        cur_seconds = 0.0;
      }
      cur.push_back(idx);
      cur_seconds += d;
    }
    if (!cur.empty()) batches.push_back(std::move(cur));

    for (std::size_t group = 0; group < batches.size();
         group += cfg.accum_steps) {
      std::size_t group_end =
          std::min(group + cfg.accum_steps, batches.size());
      const int group_batches = static_cast<int>(group_end - group);
      double nll_sum = 0.0, mse_sum = 0.0, comb_sum = 0.0;
      int n_utts = 0;
      for (std::size_t b = group; b < group_end; ++b) {
        const std::vector<int>& batch = batches[b];
        const double inv =
            1.0 / (static_cast<double>(batch.size()) * group_batches);
        for (int idx : batch) {
          Tape tape;
          UttLossOut out = utt_loss(&tape, idx, &drop_rng, &aug_rng);
          const double lval = out.loss.v().data[0];
          if (!std::isfinite(lval)) {
            throw TrainError("training diverged: non-finite loss at step " +
                             std::to_string(step + 1) + " on utterance " +
                             corpus[idx].id);
          }
          tape.backward(scale(&tape, out.loss, inv));
          nll_sum += out.nll;
          mse_sum += out.mse;
          comb_sum += lval;
          ++n_utts;
        }
      }
      ++step;
      const double lr = lr_schedule(step, d_model, cfg.warmup_steps);
      opt.step(lr);
      for (Parameter* p : params) p->zero_grad();
      TraceRow row{step, nll_sum / n_utts, mse_sum / n_utts,
                   comb_sum / n_utts, lr};
      result.trace.push_back(row);
      char line[256];
      std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(row.step), row.nll, row.mse,
                    row.combined, row.lr);
      trace_file << line;
    }
    std::string path = epoch_path(out_dir, epoch + 1);
    save_checkpoint(snapshot(params, config_json, step), path);
    result.checkpoint_paths.push_back(path);
  }
  trace_file.flush();
  if (!trace_file) {
    throw IoError("fit: write failed for " + result.trace_path);
  }

  const int k = std::min<int>(cfg.avg_last_k,
                              static_cast<int>(result.checkpoint_paths.size()));
  std::vector<std::string> last(result.checkpoint_paths.end() - k,
                                result.checkpoint_paths.end());
  Checkpoint avg = average_checkpoints(last);
  restore(avg, params);
  result.final_path = out_dir + "/final.ckpt";
  save_checkpoint(avg, result.final_path);
  return result;
}

}  // namespace

FitResult fit(LasoModel& model, const Corpus& corpus, const Vocabulary& vocab,
              const TrainConfig& cfg, ToyTeacher* teacher,
              const std::string& out_dir, const std::string& config_json) {
  cfg.validate();
  const bool distill = cfg.lambda > 0.0;
  if (distill && !teacher) {
    throw ConfigError("fit: lambda > 0 requires a teacher");
  }
  if (distill &&
      model.config().teacher_dim != teacher->config().d_model) {
    throw ConfigError("fit: model teacher_dim " +
                      std::to_string(model.config().teacher_dim) +
                      " does not match teacher width " +
                      std::to_string(teacher->config().d_model));
  }
  const int slots = model.config().max_len;
  const int vocab_size = model.config().vocab_size;
  if (vocab.size() != vocab_size) {
    throw ConfigError("fit: vocabulary of " + std::to_string(vocab.size()) +
                      " does not match model vocab_size " +
                      std::to_string(vocab_size));
  }
  // the teacher is frozen, so its hidden states per utterance never change
  std::vector<TeacherOutputs> teacher_cache;
  std::vector<char> teacher_cached;
  if (distill) {
    teacher_cache.resize(corpus.size());
    teacher_cached.assign(corpus.size(), 0);
  }
  UttLossFn utt_loss = [&](Tape* t, int idx, RngStream* drop,
                           RngStream* aug) -> UttLossOut {
    const Utterance& utt = corpus[idx];
    Tensor feats = cfg.specaug.enabled
                       ? spec_augment(utt.features, cfg.specaug, aug)
                       : utt.features;
    std::vector<int> targets = pad_targets(utt.tokens, slots, distill);
    RunOpts opts{true, drop, false};
    ForwardResult f = model.forward(t, feats, opts);
    Var nll = nll_loss(t, f.probs, targets, cfg.label_smoothing);
    UttLossOut out;
    out.nll = nll.v().data[0];
    if (!distill) {
      out.loss = nll;
      return out;
    }
    if (!teacher_cached[idx]) {
      teacher_cache[idx] = teacher->hidden(utt.tokens);
      teacher_cached[idx] = 1;
    }
    Var mse = distill_mse(t, f.dec_hidden, teacher_cache[idx],
                          model.teacher_projection());
    out.mse = mse.v().data[0];
    out.loss = combined_loss(t, nll, mse, cfg.lambda);
    return out;
  };
  return run_fit_loop(corpus, cfg, model.parameters(),
                      model.config().attention.d_model, utt_loss, out_dir,
                      config_json);
}

FitResult fit_ar(ArBaselineModel& model, const Corpus& corpus,
                 const Vocabulary& vocab, const TrainConfig& cfg,
                 const std::string& out_dir, const std::string& config_json) {
  cfg.validate();
  if (vocab.size() != model.config().vocab_size) {
    throw ConfigError("fit_ar: vocabulary of " + std::to_string(vocab.size()) +
                      " does not match model vocab_size " +
                      std::to_string(model.config().vocab_size));
  }
  UttLossFn utt_loss = [&](Tape* t, int idx, RngStream* drop,
                           RngStream* aug) -> UttLossOut {
    const Utterance& utt = corpus[idx];
    Tensor feats = cfg.specaug.enabled
                       ? spec_augment(utt.features, cfg.specaug, aug)
                       : utt.features;
    std::vector<int> input{kSosId};
    input.insert(input.end(), utt.tokens.begin(), utt.tokens.end());
    std::vector<int> gold = utt.tokens;
    gold.push_back(kEosId);
    RunOpts opts{true, drop, false};
    EncodeResult enc = model.encode(t, feats, opts);
    Var probs = model.decode_train(t, input, enc, opts);
    Var nll = nll_loss(t, probs, gold, cfg.label_smoothing);
    UttLossOut out;
    out.nll = nll.v().data[0];
    out.loss = nll;
    return out;
  };
  return run_fit_loop(corpus, cfg, model.parameters(),
                      model.config().attention.d_model, utt_loss, out_dir,
                      config_json);
}

double evaluate_distill_mse(LasoModel& model, const Corpus& corpus,
                            ToyTeacher& teacher) {
  if (corpus.empty()) {
    throw DataError("evaluate_distill_mse: empty corpus");
  }
  RunOpts opts;
  double sum = 0.0;
  for (const Utterance& utt : corpus) {
    ForwardResult f = model.forward(nullptr, utt.features, opts);
    TeacherOutputs th = teacher.hidden(utt.tokens);
    Var mse = distill_mse(nullptr, f.dec_hidden, th,
                          model.teacher_projection());
    sum += mse.v().data[0];
  }
  return sum / static_cast<double>(corpus.size());
}

}  // namespace laso
