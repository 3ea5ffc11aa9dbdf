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

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "laso/tensor.h"

namespace laso {

// Trainable tensor. `grad` accumulates across backward passes until
// zero_grad() is called, which is what makes gradient accumulation work.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}

  void zero_grad() {
    for (double& g : grad.data) g = 0.0;
  }
};

// Value flowing through a differentiable computation. The tensor is held by
// shared pointer so passing activations and parameters around never copies
// their storage. `id` indexes the tape node that produced the value; -1 marks
// a value outside any tape (the pure inference path, or a constant that has
// not been interned yet).
struct Var {
  std::shared_ptr<const Tensor> vp;
  int id = -1;

  const Tensor& v() const { return *vp; }
  bool tracked() const { return id >= 0; }
};

// Var owning a fresh tensor.
inline Var own_var(Tensor t) {
  return Var{std::make_shared<const Tensor>(std::move(t)), -1};
}

// Var aliasing storage owned elsewhere; the referent must outlive the Var.
inline Var borrow_var(const Tensor& t) {
  return Var{std::shared_ptr<const Tensor>(std::shared_ptr<void>(), &t), -1};
}

// Reverse-mode tape. A forward pass appends one record per primitive, in
// execution order; backward() replays the records in exact reverse order,
// calling each record's vector-Jacobian product. Strictly single-threaded.
class Tape {
 public:
  struct Record {
    const char* op;
    int out;
    std::vector<int> inputs;
    std::function<void(Tape&, const Record&)> vjp;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Tracked input node: gradients w.r.t. it are computed.
  Var leaf(Tensor v);
  // Untracked node: participates in the forward pass only.
  Var constant(Tensor v);
  // Tracked leaf bound to a parameter; after backward() the node's gradient
  // is added into p->grad. Aliases p->value, which must stay unchanged for
  // this tape's lifetime.
  Var param(Parameter* p);

  // Re-registers an existing Var on this tape; id >= 0 passes through,
  // id == -1 becomes an untracked node sharing the same storage.
  int intern(const Var& x);

  // Appends one record (the only way records are created). Gradients flow to
  // the output iff some input wants them.
  Var emit(const char* op, Tensor out, std::vector<int> inputs,
           std::function<void(Tape&, const Record&)> vjp);

  const Tensor& value(int id) const { return *values_[check_id(id)]; }
  bool wants_grad(int id) const { return wants_[check_id(id)] != 0; }

  // Gradient accumulation buffer for a node, allocated to zeros on first use.
  // Returns nullptr for nodes that do not want gradients; VJPs use this to
  // skip work for constants.
  Tensor* grad_accum(int id);
  // Gradient if the node was reached during backward, else nullptr.
  const Tensor* grad_if_any(int id) const;
  // Copy of the node's gradient; zeros if it was never reached.
  Tensor grad(int id) const;

  // Seeds d(loss)/d(loss) = 1, replays all records in reverse, then adds each
  // parameter-bound node's gradient into its Parameter::grad. loss must be a
  // tracked scalar. May be called once per tape.
  void backward(const Var& loss);

  std::size_t num_records() const { return records_.size(); }
  std::size_t num_nodes() const { return values_.size(); }
  // Op names in execution order, for introspection and tests.
  std::vector<std::string> op_sequence() const;

 private:
  int check_id(int id) const;
  int add_node(std::shared_ptr<const Tensor> v, bool wants);

  std::vector<std::shared_ptr<const Tensor>> values_;
  std::vector<char> wants_;
  std::vector<Tensor> grads_;  // parallel to values_; empty shape = untouched
  std::vector<Record> records_;
  std::vector<std::pair<Parameter*, int>> bound_;
  bool backward_done_ = false;
};

// Parameter as a Var: bound to the tape when recording, a zero-copy borrow in
// pure inference.
inline Var as_var(Tape* t, Parameter& p) {
  return t ? t->param(&p) : borrow_var(p.value);
}

}  // namespace laso
