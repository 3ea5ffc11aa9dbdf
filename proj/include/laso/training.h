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
#include "laso/tape.h"
#include "laso/tensor.h"

namespace laso {

struct SpecAugmentConfig {
  bool enabled = true;
  int freq_width = 8;   // max channels zeroed per frequency mask
  int time_width = 10;  // max frames zeroed per time mask
  int n_freq_masks = 2;
  int n_time_masks = 2;
};

struct TrainConfig {
  int warmup_steps = 200;
  double label_smoothing = 0.1;
  double lambda = 0.0;  // distillation weight; 0 disables the teacher term
  int accum_steps = 1;  // batches accumulated per optimizer step
  int epochs = 10;
  double batch_seconds = 8.0;  // approximate audio per batch
  std::uint64_t seed = 0;
  SpecAugmentConfig specaug;
  int avg_last_k = 1;  // checkpoints averaged into the final model

  void validate() const;  // throws ConfigError
};

// Mean over all rows of the smoothed cross-entropy between probs [L, V] and
// the padded target ids: mass 1 - eps on the gold id, eps / (V - 1) spread
// over the rest. Padded positions count like any other row.
Var nll_loss(Tape* t, const Var& probs, const std::vector<int>& target_ids,
             double label_smoothing);

// Teacher hidden states over the valid token span: <sos> through the first
// <eos>, one row each.
struct TeacherOutputs {
  Tensor hidden;  // [valid_len, d_teacher]
  int valid_len = 0;
};

// (1 / L_v) * sum of squared differences between the first L_v decoder rows
// (optionally projected) and the teacher rows. Rows at or past L_v do not
// participate at all, in value or in gradient.
Var distill_mse(Tape* t, const Var& dec_hidden, const TeacherOutputs& teacher,
                Parameter* projection);

// nll + lambda * mse. With lambda == 0 the result is bit-equal to nll.
Var combined_loss(Tape* t, const Var& nll, const Var& mse, double lambda);

// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5); peaks at step == warmup.
double lr_schedule(std::int64_t step, int d_model, int warmup_steps);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Bias-corrected Adam over a fixed parameter registry. Consumes the grads
// accumulated on the parameters; callers zero them afterwards.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Parameter*> params, AdamConfig cfg = {});

  void step(double lr);
  std::int64_t steps_taken() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

// Zeroes up-to-n_freq_masks random channel bands and up-to-n_time_masks
// random frame bands. Widths are drawn uniformly from [0, width] and clipped
// to the input size; nothing but zeroing ever happens.
Tensor spec_augment(const Tensor& features, const SpecAugmentConfig& cfg,
                    RngStream* rng);

// Frozen bidirectional stand-in for a pretrained language model. Pretrained
// once on corpus transcripts with masked-token prediction, then used only
// through hidden().
struct TeacherConfig {
  int d_model = 48;  // deliberately different from the student width so the
                     // distillation projection has something to do
  int n_heads = 4;
  int d_inner = 96;
  int n_blocks = 2;
  double dropout = 0.0;
  int vocab_size = 32;
  int max_len = 24;
  double mask_prob = 0.15;
  int epochs = 8;
  int batch_size = 16;
  int warmup_steps = 100;
  std::uint64_t seed = 7;

  void validate() const;
};

class ToyTeacher {
 public:
  ToyTeacher(const TeacherConfig& cfg, RngStream* init_rng);

  const TeacherConfig& config() const { return cfg_; }
  const std::vector<Parameter*>& parameters() { return params_; }
  void zero_grads();

  // Hidden states for <sos>, tokens..., <eos>: [n + 2, d_model] rows.
  // Deterministic; dropout never applies here.
  TeacherOutputs hidden(const std::vector<int>& tokens);

  // Token distributions for a (possibly masked) id sequence, for
  // pretraining and its evaluation.
  Var predict(Tape* t, const std::vector<int>& input_ids, bool training,
              RngStream* dropout_rng);

 private:
  Var encode_ids(Tape* t, const std::vector<int>& ids, const DropoutCtx& drop);

  TeacherConfig cfg_;
  AttentionConfig att_;
  Parameter embed_;
  std::vector<BlockParams> blocks_;
  LnParams final_ln_;
  Parameter out_w_, out_b_;
  std::vector<Parameter*> params_;
};

// Masked-token pretraining on the corpus transcripts (specials added, 15% of
// real tokens replaced by <unk>, loss on the masked positions only).
ToyTeacher pretrain_toy_teacher(const Corpus& corpus, const TeacherConfig& cfg);

// Fraction of single-token masked predictions recovered exactly, one masked
// position per transcript.
double teacher_masked_accuracy(ToyTeacher& teacher,
                               const std::vector<std::vector<int>>& transcripts,
                               RngStream* rng);

struct TraceRow {
  std::int64_t step = 0;
  double nll = 0.0;
  double mse = 0.0;
  double combined = 0.0;
  double lr = 0.0;
};

struct FitResult {
  std::vector<std::string> checkpoint_paths;  // one per epoch, in order
  std::string final_path;                     // averaged model
  std::string trace_path;                     // CSV: step,nll,mse,combined,lr
  std::vector<TraceRow> trace;
};

// Full training loop: duration-bucketed shuffled batches, per-utterance
// backward passes with gradient accumulation, warmup Adam, a checkpoint per
// epoch and an averaged final model. teacher may be null when cfg.lambda is
// 0. Aborts with TrainError naming the step if the loss goes non-finite.
FitResult fit(LasoModel& model, const Corpus& corpus, const Vocabulary& vocab,
              const TrainConfig& cfg, ToyTeacher* teacher,
              const std::string& out_dir, const std::string& config_json);

// Same loop for the autoregressive baseline (teacher forcing, no
// distillation).
FitResult fit_ar(ArBaselineModel& model, const Corpus& corpus,
                 const Vocabulary& vocab, const TrainConfig& cfg,
                 const std::string& out_dir, const std::string& config_json);

// Corpus-mean distillation MSE of the model against the teacher, dropout off.
double evaluate_distill_mse(LasoModel& model, const Corpus& corpus,
                            ToyTeacher& teacher);

}  // namespace laso
