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

#include "laso/tensor.h"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "laso/error.h"
#include "laso/rng.h"

namespace laso {

namespace {
std::size_t checked_numel(const std::vector<int>& shape) {
  if (shape.empty()) {
    throw ShapeError("tensor: empty shape");
  }
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw ShapeError("tensor: non-positive extent in " + shape_str(shape));
    }
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  data.assign(checked_numel(shape), 0.0);
}

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

Tensor Tensor::from(std::vector<int> s, std::vector<double> d) {
  const std::size_t n = checked_numel(s);
  if (n != d.size()) {
    throw ShapeError("tensor: " + std::to_string(d.size()) +
                     " values for shape " + laso::shape_str(s));
  }
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(d);
  return t;
}

Tensor Tensor::randn(std::vector<int> s, RngStream* rng, double sigma) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = sigma * rng->normal();
  return t;
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= ndim()) {
    throw ShapeError("tensor: axis " + std::to_string(i) + " out of range for " +
                     shape_str());
  }
  return shape[static_cast<std::size_t>(i)];
}

bool Tensor::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return laso::shape_str(shape); }

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

void check_ndim(const Tensor& t, int ndim, const char* op) {
  if (t.ndim() != ndim) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(ndim) + ", got " + t.shape_str());
  }
}

namespace {
void check_gemm_out(const Tensor& a, const Tensor& b, Tensor* c, int m, int n,
                    const char* op) {
  if (c->ndim() != 2 || c->rows() != m || c->cols() != n) {
    throw ShapeError(std::string(op) + ": output " + c->shape_str() +
                     " for inputs " + a.shape_str() + " x " + b.shape_str());
  }
}
}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor* c, bool accumulate) {
  check_ndim(a, 2, "gemm_nn");
  check_ndim(b, 2, "gemm_nn");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("gemm_nn: inner dim mismatch " + a.shape_str() + " x " +
                     b.shape_str());
  }
  check_gemm_out(a, b, c, m, n, "gemm_nn");
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c->data.data();
  if (!accumulate) {
    for (std::size_t i = 0; i < c->data.size(); ++i) pc[i] = 0.0;
  }
  // i-k-j order streams b and c rows, which vectorizes well.
  for (int i = 0; i < m; ++i) {
    const double* ar = pa + static_cast<std::size_t>(i) * k;
    double* cr = pc + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = ar[l];
      const double* br = pb + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor* c, bool accumulate) {
  check_ndim(a, 2, "gemm_nt");
  check_ndim(b, 2, "gemm_nt");
  const int m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("gemm_nt: inner dim mismatch " + a.shape_str() +
                     " x " + b.shape_str() + "^T");
  }
  check_gemm_out(a, b, c, m, n, "gemm_nt");
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c->data.data();
  for (int i = 0; i < m; ++i) {
    const double* ar = pa + static_cast<std::size_t>(i) * k;
    double* cr = pc + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* br = pb + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int l = 0; l < k; ++l) s += ar[l] * br[l];
      if (accumulate) {
        cr[j] += s;
      } else {
        cr[j] = s;
      }
    }
  }
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor* c, bool accumulate) {
  check_ndim(a, 2, "gemm_tn");
  check_ndim(b, 2, "gemm_tn");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != m) {
    throw ShapeError("gemm_tn: inner dim mismatch " + a.shape_str() +
                     "^T x " + b.shape_str());
  }
  check_gemm_out(a, b, c, k, n, "gemm_tn");
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c->data.data();
  if (!accumulate) {
    for (std::size_t i = 0; i < c->data.size(); ++i) pc[i] = 0.0;
  }
  for (int i = 0; i < m; ++i) {
    const double* ar = pa + static_cast<std::size_t>(i) * k;
    const double* br = pb + static_cast<std::size_t>(i) * n;
    for (int l = 0; l < k; ++l) {
      const double av = ar[l];
      double* cr = pc + static_cast<std::size_t>(l) * n;
      for (int j = 0; j < n; ++j) cr[j] += av * br[j];
    }
  }
}

Tensor matmul_value(const Tensor& a, const Tensor& b) {
  check_ndim(a, 2, "matmul");
  check_ndim(b, 2, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dim mismatch " + a.shape_str() + " x " +
                     b.shape_str());
  }
  Tensor c({a.rows(), b.cols()});
  gemm_nn(a, b, &c, /*accumulate=*/false);
  return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  }
  return m;
}

Tensor sinusoidal_pe(int length, int d_model) {
  if (length <= 0) {
    throw ShapeError("sinusoidal_pe: non-positive length " +
                     std::to_string(length));
  }
  if (d_model <= 0 || d_model % 2 != 0) {
    throw ShapeError("sinusoidal_pe: d_model must be positive and even, got " +
                     std::to_string(d_model));
  }
  Tensor pe({length, d_model});
  for (int r = 0; r < length; ++r) {
    const double pos = static_cast<double>(r + 1);
    for (int j = 0; 2 * j < d_model; ++j) {
      const double w = std::pow(10000.0, -2.0 * j / d_model);
      pe.at(r, 2 * j) = std::sin(pos * w);
      pe.at(r, 2 * j + 1) = std::cos(pos * w);
    }
  }
  return pe;
}

}  // namespace laso
