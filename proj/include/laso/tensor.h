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

namespace laso {

class RngStream;

// Dense row-major tensor of doubles. Everything in this codebase (model
// parameters, activations, gradients) is f64; files that store f32 convert at
// the I/O boundary.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  // Zero-filled tensor of the given shape. Extents must be positive.
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v);
  static Tensor from(std::vector<int> s, std::vector<double> d);
  // Entries drawn i.i.d. N(0, sigma^2).
  static Tensor randn(std::vector<int> s, RngStream* rng, double sigma = 1.0);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const;

  // 2-D accessors.
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  // 3-D accessors.
  double& at3(int a, int b, int c) {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }
  double at3(int a, int b, int c) const {
    return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "[3, 4]"
};

std::string shape_str(const std::vector<int>& shape);

// Throws ShapeError naming both shapes unless a and b match exactly.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);
// Throws ShapeError unless t has the given rank.
void check_ndim(const Tensor& t, int ndim, const char* op);

// c = a * b (or c += with accumulate), a is m x k, b is k x n.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor* c, bool accumulate);
// c = a * b^T, a is m x k, b is n x k -> c is m x n.
void gemm_nt(const Tensor& a, const Tensor& b, Tensor* c, bool accumulate);
// c = a^T * b, a is m x k, b is m x n -> c is k x n.
void gemm_tn(const Tensor& a, const Tensor& b, Tensor* c, bool accumulate);

// Fresh-result convenience wrapper over gemm_nn.
Tensor matmul_value(const Tensor& a, const Tensor& b);

// Elementwise max-abs difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Sinusoidal position encodings, L rows by d_model columns. Positions are
// 1-based: row r holds sin((r+1) * w_j) in even columns and cos((r+1) * w_j)
// in odd columns, with w_j = 10000^(-2j / d_model). d_model must be even.
Tensor sinusoidal_pe(int length, int d_model);

}  // namespace laso
