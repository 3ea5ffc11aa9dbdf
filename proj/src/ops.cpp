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

#include "laso/ops.h"

#include <cmath>

#include "laso/error.h"
#include "laso/rng.h"

namespace laso {

namespace {

// Gradient of the record's output; only called when backward() has already
// established that it exists.
const Tensor& out_grad(Tape& t, const Tape::Record& r) {
  return *t.grad_if_any(r.out);
}

}  // namespace

Var matmul(Tape* t, const Var& a, const Var& b) {
  Tensor out = matmul_value(a.v(), b.v());
  if (!t) return own_var(std::move(out));
  const int ia = t->intern(a), ib = t->intern(b);
  return t->emit("matmul", std::move(out), {ia, ib},
                 [ia, ib](Tape& tp, const Tape::Record& r) {
                   const Tensor& g = out_grad(tp, r);
                   if (Tensor* ga = tp.grad_accum(ia)) {
                     gemm_nt(g, tp.value(ib), ga, /*accumulate=*/true);
                   }
                   if (Tensor* gb = tp.grad_accum(ib)) {
                     gemm_tn(tp.value(ia), g, gb, /*accumulate=*/true);
                   }
                 });
}

namespace {

Var binary_elementwise(Tape* t, const char* name, const Var& a, const Var& b,
                       double (*fwd)(double, double),
                       void (*bwd)(double, double, double, double*, double*)) {
  check_same_shape(a.v(), b.v(), name);
  Tensor out(a.v().shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = fwd(a.v().data[i], b.v().data[i]);
  }
  if (!t) return own_var(std::move(out));
  const int ia = t->intern(a), ib = t->intern(b);
  return t->emit(name, std::move(out), {ia, ib},
                 [ia, ib, bwd](Tape& tp, const Tape::Record& r) {
                   const Tensor& g = out_grad(tp, r);
                   Tensor* ga = tp.grad_accum(ia);
                   Tensor* gb = tp.grad_accum(ib);
                   if (!ga && !gb) return;
                   const Tensor& av = tp.value(ia);
                   const Tensor& bv = tp.value(ib);
                   for (std::size_t i = 0; i < g.data.size(); ++i) {
                     double da = 0.0, db = 0.0;
                     bwd(av.data[i], bv.data[i], g.data[i], &da, &db);
                     if (ga) ga->data[i] += da;
                     if (gb) gb->data[i] += db;
                   }
                 });
}

}  // namespace

Var add(Tape* t, const Var& a, const Var& b) {
  return binary_elementwise(
      t, "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double* da, double* db) {
        *da = g;
        *db = g;
      });
}

Var sub(Tape* t, const Var& a, const Var& b) {
  return binary_elementwise(
      t, "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double* da, double* db) {
        *da = g;
        *db = -g;
      });
}

Var hadamard(Tape* t, const Var& a, const Var& b) {
  return binary_elementwise(
      t, "hadamard", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double* da, double* db) {
        *da = g * y;
        *db = g * x;
      });
}

Var add_bias(Tape* t, const Var& x, const Var& bias) {
  check_ndim(x.v(), 2, "add_bias");
  check_ndim(bias.v(), 1, "add_bias");
  const int m = x.v().rows(), n = x.v().cols();
  if (bias.v().dim(0) != n) {
    throw ShapeError("add_bias: bias " + bias.v().shape_str() + " vs input " +
                     x.v().shape_str());
  }
  Tensor out(x.v().shape);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out.at(i, j) = x.v().at(i, j) + bias.v().data[j];
    }
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x), ib = t->intern(bias);
  return t->emit("add_bias", std::move(out), {ix, ib},
                 [ix, ib, m, n](Tape& tp, const Tape::Record& r) {
                   const Tensor& g = out_grad(tp, r);
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     for (std::size_t i = 0; i < g.data.size(); ++i) {
                       gx->data[i] += g.data[i];
                     }
                   }
                   if (Tensor* gb = tp.grad_accum(ib)) {
                     for (int i = 0; i < m; ++i) {
                       for (int j = 0; j < n; ++j) {
                         gb->data[j] += g.at(i, j);
                       }
                     }
                   }
                 });
}

Var scale(Tape* t, const Var& x, double c) {
  Tensor out(x.v().shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = c * x.v().data[i];
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("scale", std::move(out), {ix},
                 [ix, c](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (std::size_t i = 0; i < g.data.size(); ++i) {
                       gx->data[i] += c * g.data[i];
                     }
                   }
                 });
}

Var relu(Tape* t, const Var& x) {
  Tensor out(x.v().shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = x.v().data[i];
    out.data[i] = v > 0.0 ? v : 0.0;
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("relu", std::move(out), {ix},
                 [ix](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     const Tensor& xv = tp.value(ix);
                     for (std::size_t i = 0; i < g.data.size(); ++i) {
                       if (xv.data[i] > 0.0) gx->data[i] += g.data[i];
                     }
                   }
                 });
}

namespace {
double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

Var sigmoid(Tape* t, const Var& x) {
  Tensor out(x.v().shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = sigmoid_scalar(x.v().data[i]);
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("sigmoid", std::move(out), {ix},
                 [ix](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     const Tensor& s = tp.value(r.out);
                     for (std::size_t i = 0; i < g.data.size(); ++i) {
                       gx->data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
                     }
                   }
                 });
}

Var glu(Tape* t, const Var& x) {
  check_ndim(x.v(), 2, "glu");
  const int m = x.v().rows(), n2 = x.v().cols();
  if (n2 % 2 != 0) {
    throw ShapeError("glu: last dim must be even, got " + x.v().shape_str());
  }
  const int n = n2 / 2;
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      out.at(i, j) = x.v().at(i, j) * sigmoid_scalar(x.v().at(i, j + n));
    }
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("glu", std::move(out), {ix},
                 [ix, m, n](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     const Tensor& xv = tp.value(ix);
                     for (int i = 0; i < m; ++i) {
                       for (int j = 0; j < n; ++j) {
                         const double a = xv.at(i, j);
                         const double s = sigmoid_scalar(xv.at(i, j + n));
                         const double gv = g.at(i, j);
                         gx->at(i, j) += gv * s;
                         gx->at(i, j + n) += gv * a * s * (1.0 - s);
                       }
                     }
                   }
                 });
}

Var softmax_rows(Tape* t, const Var& x) {
  check_ndim(x.v(), 2, "softmax_rows");
  const int m = x.v().rows(), n = x.v().cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double mx = x.v().at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, x.v().at(i, j));
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      const double e = std::exp(x.v().at(i, j) - mx);
      out.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= z;
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("softmax_rows", std::move(out), {ix},
                 [ix, m, n](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     const Tensor& y = tp.value(r.out);
                     for (int i = 0; i < m; ++i) {
                       double dot = 0.0;
                       for (int j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
                       for (int j = 0; j < n; ++j) {
                         gx->at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
                       }
                     }
                   }
                 });
}

Var layer_norm(Tape* t, const Var& x, const Var& gain, const Var& bias,
               double eps) {
  check_ndim(x.v(), 2, "layer_norm");
  check_ndim(gain.v(), 1, "layer_norm");
  check_ndim(bias.v(), 1, "layer_norm");
  const int m = x.v().rows(), d = x.v().cols();
  if (gain.v().dim(0) != d || bias.v().dim(0) != d) {
    throw ShapeError("layer_norm: gain " + gain.v().shape_str() + " / bias " +
                     bias.v().shape_str() + " vs input " + x.v().shape_str());
  }
  Tensor out({m, d});
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x.v().at(i, j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = x.v().at(i, j) - mu;
      var += c * c;
    }
    var /= d;
    const double istd = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) {
      out.at(i, j) =
          gain.v().data[j] * ((x.v().at(i, j) - mu) * istd) + bias.v().data[j];
    }
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x), ig = t->intern(gain), ib = t->intern(bias);
  return t->emit(
      "layer_norm", std::move(out), {ix, ig, ib},
      [ix, ig, ib, m, d, eps](Tape& tp, const Tape::Record& r) {
        const Tensor& g = out_grad(tp, r);
        const Tensor& xv = tp.value(ix);
        const Tensor& gv = tp.value(ig);
        Tensor* gx = tp.grad_accum(ix);
        Tensor* gg = tp.grad_accum(ig);
        Tensor* gb = tp.grad_accum(ib);
        if (!gx && !gg && !gb) return;
        for (int i = 0; i < m; ++i) {
          double mu = 0.0;
          for (int j = 0; j < d; ++j) mu += xv.at(i, j);
          mu /= d;
          double var = 0.0;
          for (int j = 0; j < d; ++j) {
            const double c = xv.at(i, j) - mu;
            var += c * c;
          }
          var /= d;
          const double istd = 1.0 / std::sqrt(var + eps);
          if (gg || gb) {
            for (int j = 0; j < d; ++j) {
              if (gg) gg->data[j] += g.at(i, j) * (xv.at(i, j) - mu) * istd;
              if (gb) gb->data[j] += g.at(i, j);
            }
          }
          if (gx) {
            double dvar = 0.0, dmu_a = 0.0;
            for (int j = 0; j < d; ++j) {
              const double dxh = g.at(i, j) * gv.data[j];
              dvar += dxh * (xv.at(i, j) - mu);
              dmu_a += dxh;
            }
            dvar *= -0.5 * istd * istd * istd;
            const double dmu = -dmu_a * istd;
            for (int j = 0; j < d; ++j) {
              const double dxh = g.at(i, j) * gv.data[j];
              gx->at(i, j) += dxh * istd +
                              dvar * 2.0 * (xv.at(i, j) - mu) / d + dmu / d;
            }
          }
        }
      });
}

Var transpose_2d(Tape* t, const Var& x) {
  check_ndim(x.v(), 2, "transpose_2d");
  const int m = x.v().rows(), n = x.v().cols();
  Tensor out({n, m});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(j, i) = x.v().at(i, j);
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("transpose_2d", std::move(out), {ix},
                 [ix, m, n](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (int i = 0; i < m; ++i) {
                       for (int j = 0; j < n; ++j) {
                         gx->at(i, j) += g.at(j, i);
                       }
                     }
                   }
                 });
}

Var concat_cols(Tape* t, const std::vector<Var>& parts) {
  if (parts.empty()) {
    throw ShapeError("concat_cols: no inputs");
  }
  const int m = parts[0].v().rows();
  int total = 0;
  for (const Var& p : parts) {
    check_ndim(p.v(), 2, "concat_cols");
    if (p.v().rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + parts[0].v().shape_str() +
                       " vs " + p.v().shape_str());
    }
    total += p.v().cols();
  }
  Tensor out({m, total});
  int off = 0;
  for (const Var& p : parts) {
    const int n = p.v().cols();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) out.at(i, off + j) = p.v().at(i, j);
    }
    off += n;
  }
  if (!t) return own_var(std::move(out));
  std::vector<int> ids;
  std::vector<int> widths;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    ids.push_back(t->intern(p));
    widths.push_back(p.v().cols());
  }
  return t->emit("concat_cols", std::move(out), ids,
                 [ids, widths, m](Tape& tp, const Tape::Record& r) {
                   const Tensor& g = out_grad(tp, r);
                   int off = 0;
                   for (std::size_t k = 0; k < ids.size(); ++k) {
                     const int n = widths[k];
                     if (Tensor* gp = tp.grad_accum(ids[k])) {
                       for (int i = 0; i < m; ++i) {
                         for (int j = 0; j < n; ++j) {
                           gp->at(i, j) += g.at(i, off + j);
                         }
                       }
                     }
                     off += n;
                   }
                 });
}

namespace {
void check_slice(int extent, int start, int len, const char* op) {
  if (start < 0 || len <= 0 || start + len > extent) {
    throw ShapeError(std::string(op) + ": range [" + std::to_string(start) +
                     ", " + std::to_string(start + len) + ") of extent " +
                     std::to_string(extent));
  }
}
}  // namespace

Var slice_cols(Tape* t, const Var& x, int start, int len) {
  check_ndim(x.v(), 2, "slice_cols");
  const int m = x.v().rows();
  check_slice(x.v().cols(), start, len, "slice_cols");
  Tensor out({m, len});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < len; ++j) out.at(i, j) = x.v().at(i, start + j);
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("slice_cols", std::move(out), {ix},
                 [ix, start, len, m](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (int i = 0; i < m; ++i) {
                       for (int j = 0; j < len; ++j) {
                         gx->at(i, start + j) += g.at(i, j);
                       }
                     }
                   }
                 });
}

Var slice_rows(Tape* t, const Var& x, int start, int len) {
  check_ndim(x.v(), 2, "slice_rows");
  const int n = x.v().cols();
  check_slice(x.v().rows(), start, len, "slice_rows");
  Tensor out({len, n});
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < n; ++j) out.at(i, j) = x.v().at(start + i, j);
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("slice_rows", std::move(out), {ix},
                 [ix, start, len, n](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (int i = 0; i < len; ++i) {
                       for (int j = 0; j < n; ++j) {
                         gx->at(start + i, j) += g.at(i, j);
                       }
                     }
                   }
                 });
}

Var reshape(Tape* t, const Var& x, std::vector<int> new_shape) {
  Tensor out = Tensor::from(std::move(new_shape), x.v().data);
  if (out.numel() != x.v().numel()) {
    throw ShapeError("reshape: " + x.v().shape_str() + " to " +
                     out.shape_str());
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("reshape", std::move(out), {ix},
                 [ix](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (std::size_t i = 0; i < g.data.size(); ++i) {
                       gx->data[i] += g.data[i];
                     }
                   }
                 });
}

Var embedding_lookup(Tape* t, const Var& table, const std::vector<int>& ids) {
  check_ndim(table.v(), 2, "embedding_lookup");
  if (ids.empty()) {
    throw ShapeError("embedding_lookup: empty id list");
  }
  const int v = table.v().rows(), d = table.v().cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw DataError("embedding_lookup: id " + std::to_string(id) +
                      " outside table of " + std::to_string(v) + " rows");
    }
  }
  Tensor out({static_cast<int>(ids.size()), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      out.at(static_cast<int>(i), j) = table.v().at(ids[i], j);
    }
  }
  if (!t) return own_var(std::move(out));
  const int it = t->intern(table);
  return t->emit("embedding_lookup", std::move(out), {it},
                 [it, ids, d](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gt = tp.grad_accum(it)) {
                     const Tensor& g = out_grad(tp, r);
                     for (std::size_t i = 0; i < ids.size(); ++i) {
                       for (int j = 0; j < d; ++j) {
                         gt->at(ids[i], j) += g.at(static_cast<int>(i), j);
                       }
                     }
                   }
                 });
}

Var masked_fill(Tape* t, const Var& x, const std::vector<std::uint8_t>& keep,
                double fill) {
  if (keep.size() != x.v().data.size()) {
    throw ShapeError("masked_fill: mask of " + std::to_string(keep.size()) +
                     " entries for input " + x.v().shape_str());
  }
  Tensor out(x.v().shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = keep[i] ? x.v().data[i] : fill;
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("masked_fill", std::move(out), {ix},
                 [ix, keep](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (std::size_t i = 0; i < g.data.size(); ++i) {
                       if (keep[i]) gx->data[i] += g.data[i];
                     }
                   }
                 });
}

Var sum_all(Tape* t, const Var& x) {
  double s = 0.0;
  for (double v : x.v().data) s += v;
  Tensor out = Tensor::from({1}, {s});
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("sum_all", std::move(out), {ix},
                 [ix](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const double g = out_grad(tp, r).data[0];
                     for (double& v : gx->data) v += g;
                   }
                 });
}

namespace {

// Unrolls conv windows: x [c_in, h, w] -> cols [ho*wo, c_in*k*k], zero-filled
// where a window hangs over the input border.
Tensor im2col(const Tensor& x, int k, int stride, int pad, int ho, int wo) {
  const int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor cols({ho * wo, ci * k * k});
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      double* row = cols.data.data() +
                    static_cast<std::size_t>(oy * wo + ox) * (ci * k * k);
      for (int c = 0; c < ci; ++c) {
        for (int dy = 0; dy < k; ++dy) {
          const int iy = oy * stride - pad + dy;
          for (int dx = 0; dx < k; ++dx) {
            const int ix = ox * stride - pad + dx;
            double v = 0.0;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
              v = x.at3(c, iy, ix);
            }
            row[(c * k + dy) * k + dx] = v;
          }
        }
      }
    }
  }
  return cols;
}

void col2im_accum(const Tensor& dcols, int ci, int h, int w, int k, int stride,
                  int pad, int ho, int wo, Tensor* dst) {
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const double* row = dcols.data.data() +
                          static_cast<std::size_t>(oy * wo + ox) * (ci * k * k);
      for (int c = 0; c < ci; ++c) {
        for (int dy = 0; dy < k; ++dy) {
          const int iy = oy * stride - pad + dy;
          if (iy < 0 || iy >= h) continue;
          for (int dx = 0; dx < k; ++dx) {
            const int ix = ox * stride - pad + dx;
            if (ix < 0 || ix >= w) continue;
            dst->at3(c, iy, ix) += row[(c * k + dy) * k + dx];
          }
        }
      }
    }
  }
}

int conv_axis_out(int n, int k, int stride, int pad) {
  return (n + 2 * pad - k) / stride + 1;
}

}  // namespace

int conv_out_len(int n) {
  return conv_axis_out(n, ConvFrontendParams::kKernel,
                       ConvFrontendParams::kStride, ConvFrontendParams::kPad);
}

Var conv2d(Tape* t, const Var& x, const Var& weight, const Var& bias,
           int stride, int pad) {
  check_ndim(x.v(), 3, "conv2d");
  if (weight.v().ndim() != 4) {
    throw ShapeError("conv2d: weight must be rank 4, got " +
                     weight.v().shape_str());
  }
  const int ci = x.v().dim(0), h = x.v().dim(1), w = x.v().dim(2);
  const int co = weight.v().dim(0), k = weight.v().dim(2);
  if (weight.v().dim(1) != ci || weight.v().dim(3) != k) {
    throw ShapeError("conv2d: weight " + weight.v().shape_str() +
                     " vs input " + x.v().shape_str());
  }
  check_ndim(bias.v(), 1, "conv2d");
  if (bias.v().dim(0) != co) {
    throw ShapeError("conv2d: bias " + bias.v().shape_str() + " for " +
                     std::to_string(co) + " output channels");
  }
  const int ho = conv_axis_out(h, k, stride, pad);
  const int wo = conv_axis_out(w, k, stride, pad);
  if (ho <= 0 || wo <= 0) {
    throw ShapeError("conv2d: input " + x.v().shape_str() +
                     " too small for kernel " + std::to_string(k));
  }

  auto cols = std::make_shared<Tensor>(im2col(x.v(), k, stride, pad, ho, wo));
  // weight viewed as [co, ci*k*k]; out_mat [ho*wo, co] = cols * weight^T.
  Tensor wmat = Tensor::from({co, ci * k * k}, weight.v().data);
  Tensor out_mat({ho * wo, co});
  gemm_nt(*cols, wmat, &out_mat, /*accumulate=*/false);
  Tensor out({co, ho, wo});
  for (int c = 0; c < co; ++c) {
    const double b = bias.v().data[c];
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        out.at3(c, oy, ox) = out_mat.at(oy * wo + ox, c) + b;
      }
    }
  }
  if (!t) return own_var(std::move(out));
  const int ixn = t->intern(x), iw = t->intern(weight), ib = t->intern(bias);
  return t->emit(
      "conv2d", std::move(out), {ixn, iw, ib},
      [ixn, iw, ib, cols, ci, h, w, co, k, stride, pad, ho,
       wo](Tape& tp, const Tape::Record& r) {
        const Tensor& g = out_grad(tp, r);
        // g as [ho*wo, co].
        Tensor gmat({ho * wo, co});
        for (int c = 0; c < co; ++c) {
          for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
              gmat.at(oy * wo + ox, c) = g.at3(c, oy, ox);
            }
          }
        }
        if (Tensor* gb = tp.grad_accum(ib)) {
          for (int c = 0; c < co; ++c) {
            double s = 0.0;
            for (int i = 0; i < ho * wo; ++i) s += gmat.at(i, c);
            gb->data[c] += s;
          }
        }
        if (Tensor* gw = tp.grad_accum(iw)) {
          Tensor gwmat({co, ci * k * k});
          gemm_tn(gmat, *cols, &gwmat, /*accumulate=*/false);
          for (std::size_t i = 0; i < gwmat.data.size(); ++i) {
            gw->data[i] += gwmat.data[i];
          }
        }
        if (Tensor* gx = tp.grad_accum(ixn)) {
          const Tensor& wv = tp.value(iw);
          Tensor wmat2 = Tensor::from({co, ci * k * k}, wv.data);
          Tensor dcols({ho * wo, ci * k * k});
          gemm_nn(gmat, wmat2, &dcols, /*accumulate=*/false);
          col2im_accum(dcols, ci, h, w, k, stride, pad, ho, wo, gx);
        }
      });
}

Var zero_rows_from(Tape* t, const Var& x, int row_start) {
  check_ndim(x.v(), 2, "zero_rows_from");
  const int m = x.v().rows(), n = x.v().cols();
  if (row_start < 0 || row_start > m) {
    throw ShapeError("zero_rows_from: row " + std::to_string(row_start) +
                     " outside " + x.v().shape_str());
  }
  Tensor out = x.v();
  for (int i = row_start; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(i, j) = 0.0;
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("zero_rows_from", std::move(out), {ix},
                 [ix, row_start, n](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (int i = 0; i < row_start; ++i) {
                       for (int j = 0; j < n; ++j) {
                         gx->at(i, j) += g.at(i, j);
                       }
                     }
                   }
                 });
}

Var zero_frames_from(Tape* t, const Var& x, int frame_start) {
  check_ndim(x.v(), 3, "zero_frames_from");
  const int c = x.v().dim(0), h = x.v().dim(1), w = x.v().dim(2);
  if (frame_start < 0 || frame_start > h) {
    throw ShapeError("zero_frames_from: frame " + std::to_string(frame_start) +
                     " outside " + x.v().shape_str());
  }
  Tensor out = x.v();
  for (int a = 0; a < c; ++a) {
    for (int b = frame_start; b < h; ++b) {
      for (int d = 0; d < w; ++d) out.at3(a, b, d) = 0.0;
    }
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("zero_frames_from", std::move(out), {ix},
                 [ix, c, frame_start, w](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (int a = 0; a < c; ++a) {
                       for (int b = 0; b < frame_start; ++b) {
                         for (int d = 0; d < w; ++d) {
                           gx->at3(a, b, d) += g.at3(a, b, d);
                         }
                       }
                     }
                   }
                 });
}

Var flatten_frames(Tape* t, const Var& x) {
  check_ndim(x.v(), 3, "flatten_frames");
  const int c = x.v().dim(0), h = x.v().dim(1), w = x.v().dim(2);
  Tensor out({h, c * w});
  for (int a = 0; a < c; ++a) {
    for (int b = 0; b < h; ++b) {
      for (int d = 0; d < w; ++d) out.at(b, a * w + d) = x.v().at3(a, b, d);
    }
  }
  if (!t) return own_var(std::move(out));
  const int ix = t->intern(x);
  return t->emit("flatten_frames", std::move(out), {ix},
                 [ix, c, h, w](Tape& tp, const Tape::Record& r) {
                   if (Tensor* gx = tp.grad_accum(ix)) {
                     const Tensor& g = out_grad(tp, r);
                     for (int a = 0; a < c; ++a) {
                       for (int b = 0; b < h; ++b) {
                         for (int d = 0; d < w; ++d) {
                           gx->at3(a, b, d) += g.at(b, a * w + d);
                         }
                       }
                     }
                   }
                 });
}

std::vector<Var> split_heads(Tape* t, const Var& x, int n_heads) {
  check_ndim(x.v(), 2, "split_heads");
  const int d = x.v().cols();
  if (n_heads <= 0 || d % n_heads != 0) {
    throw ShapeError("split_heads: " + std::to_string(n_heads) +
                     " heads do not divide " + x.v().shape_str());
  }
  const int dk = d / n_heads;
  std::vector<Var> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    heads.push_back(slice_cols(t, x, h * dk, dk));
  }
  return heads;
}

Var merge_heads(Tape* t, const std::vector<Var>& heads) {
  return concat_cols(t, heads);
}

Tensor make_dropout_mask(const std::vector<int>& shape, double p,
                         RngStream* rng) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout: probability " + std::to_string(p) +
                      " outside [0, 1)");
  }
  Tensor mask(shape);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& v : mask.data) {
    v = rng->uniform() < p ? 0.0 : keep_scale;
  }
  return mask;
}

Tensor xavier_uniform(std::vector<int> shape, int fan_in, int fan_out,
                      RngStream* rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.data) v = (2.0 * rng->uniform() - 1.0) * limit;
  return t;
}

void ConvFrontendParams::init(int d_feat, int d_model, RngStream* rng) {
  const int c = kChannels, k = kKernel;
  conv1_w = Parameter("frontend.conv1.w",
                      xavier_uniform({c, 1, k, k}, 1 * k * k, c * k * k, rng));
  conv1_b = Parameter("frontend.conv1.b", Tensor({c}));
  conv2_w = Parameter("frontend.conv2.w",
                      xavier_uniform({c, c, k, k}, c * k * k, c * k * k, rng));
  conv2_b = Parameter("frontend.conv2.b", Tensor({c}));
  const int fw = flat_width(d_feat);
  proj_w = Parameter("frontend.proj.w",
                     xavier_uniform({fw, d_model}, fw, d_model, rng));
  proj_b = Parameter("frontend.proj.b", Tensor({d_model}));
}

void ConvFrontendParams::collect(std::vector<Parameter*>* out) {
  out->push_back(&conv1_w);
  out->push_back(&conv1_b);
  out->push_back(&conv2_w);
  out->push_back(&conv2_b);
  out->push_back(&proj_w);
  out->push_back(&proj_b);
}

int ConvFrontendParams::flat_width(int d_feat) {
  return kChannels * conv_out_len(conv_out_len(d_feat));
}

std::int64_t ConvFrontendParams::param_count(int d_feat, int d_model) {
  const std::int64_t c = kChannels, k = kKernel;
  std::int64_t n = c * 1 * k * k + c;        // conv1
  n += c * c * k * k + c;                    // conv2
  n += static_cast<std::int64_t>(flat_width(d_feat)) * d_model + d_model;
  return n;
}

Var conv_subsample(Tape* t, const Var& features, ConvFrontendParams& p,
                   int valid_t0) {
  check_ndim(features.v(), 2, "conv_subsample");
  const int t0 = features.v().rows(), d_feat = features.v().cols();
  const int effective = valid_t0 >= 0 ? valid_t0 : t0;
  if (effective < kMinFrontendFrames || effective > t0) {
    throw DataError("conv_subsample: " + std::to_string(effective) +
                    " frames; need at least " +
                    std::to_string(kMinFrontendFrames) +
                    " and no more than the stored " + std::to_string(t0));
  }
  const int stride = ConvFrontendParams::kStride;
  const int pad = ConvFrontendParams::kPad;

  Var x3 = reshape(t, features, {1, t0, d_feat});
  Var h1 = relu(t, conv2d(t, x3, as_var(t, p.conv1_w), as_var(t, p.conv1_b),
                          stride, pad));
  if (valid_t0 >= 0 && valid_t0 < t0) {
    // Zero the frames that only exist because of batch padding, so they feed
    // the next layer the same zeros an unpadded input would.
    h1 = zero_frames_from(t, h1, conv_out_len(valid_t0));
  }
  Var h2 = relu(t, conv2d(t, h1, as_var(t, p.conv2_w), as_var(t, p.conv2_b),
                          stride, pad));
  if (valid_t0 >= 0 && valid_t0 < t0) {
    h2 = zero_frames_from(t, h2, conv_out_len(conv_out_len(valid_t0)));
  }
  Var flat = flatten_frames(t, h2);
  return add_bias(t, matmul(t, flat, as_var(t, p.proj_w)),
                  as_var(t, p.proj_b));
}

}  // namespace laso
