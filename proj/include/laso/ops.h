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
#include <vector>

#include "laso/tape.h"
#include "laso/tensor.h"

namespace laso {

class RngStream;

// Differentiable primitives. Every function computes the forward value and,
// when `t` is non-null, registers exactly one tape record whose VJP
// accumulates into the gradients of tracked inputs. With `t == nullptr` they
// are plain functions on tensor values (the inference path).

Var matmul(Tape* t, const Var& a, const Var& b);
Var add(Tape* t, const Var& a, const Var& b);
Var sub(Tape* t, const Var& a, const Var& b);
// x is [m, n], bias is [n]; bias is added to every row.
Var add_bias(Tape* t, const Var& x, const Var& bias);
Var scale(Tape* t, const Var& x, double c);
Var hadamard(Tape* t, const Var& a, const Var& b);
Var relu(Tape* t, const Var& x);
Var sigmoid(Tape* t, const Var& x);
// Gated linear unit over the last dim: x is [m, 2d]; out = x[:, :d] * sigmoid(x[:, d:]).
Var glu(Tape* t, const Var& x);
// Row-wise softmax of a 2-D tensor, max-subtracted for stability.
Var softmax_rows(Tape* t, const Var& x);
// Normalizes each row of x [m, d] to zero mean / unit variance, then applies
// gain and bias (both [d]).
Var layer_norm(Tape* t, const Var& x, const Var& gain, const Var& bias,
               double eps = 1e-5);
Var transpose_2d(Tape* t, const Var& x);
Var concat_cols(Tape* t, const std::vector<Var>& parts);
Var slice_cols(Tape* t, const Var& x, int start, int len);
Var slice_rows(Tape* t, const Var& x, int start, int len);
Var reshape(Tape* t, const Var& x, std::vector<int> new_shape);
// rows picked from table [V, d] by id; repeated ids accumulate gradient.
Var embedding_lookup(Tape* t, const Var& table, const std::vector<int>& ids);
// out[i] = keep[i] ? x[i] : fill. keep is flat over x, 0/1.
Var masked_fill(Tape* t, const Var& x, const std::vector<std::uint8_t>& keep,
                double fill);
Var sum_all(Tape* t, const Var& x);  // scalar of shape [1]

// 2-D convolution over x [c_in, h, w] with kernels w [c_out, c_in, k, k],
// bias [c_out], square stride and zero padding.
Var conv2d(Tape* t, const Var& x, const Var& weight, const Var& bias,
           int stride, int pad);
// Zeros rows r >= row_start of a 2-D tensor (gradient is zeroed there too).
Var zero_rows_from(Tape* t, const Var& x, int row_start);
// Zeros frames h >= frame_start of a 3-D [c, h, w] tensor.
Var zero_frames_from(Tape* t, const Var& x, int frame_start);
// [c, h, w] -> [h, c*w] with out(h, c*w_dim + w) = x(c, h, w).
Var flatten_frames(Tape* t, const Var& x);

// Column-slices a [T, h*d] tensor into h heads of [T, d] each.
std::vector<Var> split_heads(Tape* t, const Var& x, int n_heads);
// Inverse of split_heads (exact, bit for bit).
Var merge_heads(Tape* t, const std::vector<Var>& heads);

// Inverted-dropout keep mask: entries are 0 with probability p, else 1/(1-p).
// Multiplying by it keeps activations unbiased in expectation.
Tensor make_dropout_mask(const std::vector<int>& shape, double p,
                         RngStream* rng);

// Output length of one kernel-3 stride-2 pad-1 conv layer along an axis.
int conv_out_len(int n);

// Two stacked stride-2 conv layers. The smallest input this frontend accepts.
inline constexpr int kMinFrontendFrames = 4;

// Conv frontend parameters: 1 -> c -> c channels of 3x3 stride-2 convs, then
// a linear projection of the flattened channels to d_model.
struct ConvFrontendParams {
  static constexpr int kChannels = 32;
  static constexpr int kKernel = 3;
  static constexpr int kStride = 2;
  static constexpr int kPad = 1;

  Parameter conv1_w, conv1_b;
  Parameter conv2_w, conv2_b;
  Parameter proj_w, proj_b;

  // Xavier-uniform weights, zero biases.
  void init(int d_feat, int d_model, RngStream* rng);
  void collect(std::vector<Parameter*>* out);
  static std::int64_t param_count(int d_feat, int d_model);
  // Width of the flattened channel axis fed to the projection.
  static int flat_width(int d_feat);
};

// Subsamples features [t0, d_feat] by 4x in time and projects to d_model,
// giving [conv_out_len(conv_out_len(t0)), d_model]. If valid_t0 >= 0 the
// input is treated as right-padded with zeros beyond valid_t0 frames and
// activations in the padded region are zeroed after each layer, so the valid
// rows match an unpadded run exactly. Throws DataError for inputs shorter
// than kMinFrontendFrames.
Var conv_subsample(Tape* t, const Var& features, ConvFrontendParams& p,
                   int valid_t0 = -1);

// Xavier-uniform init over [-sqrt(6/(fan_in+fan_out)), +...].
Tensor xavier_uniform(std::vector<int> shape, int fan_in, int fan_out,
                      RngStream* rng);

}  // namespace laso
