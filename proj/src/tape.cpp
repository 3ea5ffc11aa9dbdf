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

#include "laso/tape.h"

#include "laso/error.h"

namespace laso {

int Tape::check_id(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= values_.size()) {
    throw ShapeError("tape: node id " + std::to_string(id) + " out of range");
  }
  return id;
}

int Tape::add_node(std::shared_ptr<const Tensor> v, bool wants) {
  values_.push_back(std::move(v));
  wants_.push_back(wants ? 1 : 0);
  grads_.emplace_back();
  return static_cast<int>(values_.size()) - 1;
}

Var Tape::leaf(Tensor v) {
  auto sp = std::make_shared<const Tensor>(std::move(v));
  const int id = add_node(sp, /*wants=*/true);
  return Var{std::move(sp), id};
}

Var Tape::constant(Tensor v) {
  auto sp = std::make_shared<const Tensor>(std::move(v));
  const int id = add_node(sp, /*wants=*/false);
  return Var{std::move(sp), id};
}

Var Tape::param(Parameter* p) {
  auto sp = std::shared_ptr<const Tensor>(std::shared_ptr<void>(), &p->value);
  const int id = add_node(sp, /*wants=*/true);
  bound_.emplace_back(p, id);
  return Var{std::move(sp), id};
}

int Tape::intern(const Var& x) {
  if (x.id >= 0) return check_id(x.id);
  return add_node(x.vp, /*wants=*/false);
}

Var Tape::emit(const char* op, Tensor out, std::vector<int> inputs,
               std::function<void(Tape&, const Record&)> vjp) {
  bool wants = false;
  for (int id : inputs) wants = wants || wants_grad(id);
  auto sp = std::make_shared<const Tensor>(std::move(out));
  const int out_id = add_node(sp, wants);
  records_.push_back(Record{op, out_id, std::move(inputs), std::move(vjp)});
  return Var{std::move(sp), out_id};
}

Tensor* Tape::grad_accum(int id) {
  check_id(id);
  if (!wants_[id]) return nullptr;
  Tensor& g = grads_[id];
  if (g.shape.empty()) g = Tensor(values_[id]->shape);
  return &g;
}

const Tensor* Tape::grad_if_any(int id) const {
  check_id(id);
  const Tensor& g = grads_[id];
  return g.shape.empty() ? nullptr : &g;
}

Tensor Tape::grad(int id) const {
  if (const Tensor* g = grad_if_any(id)) return *g;
  return Tensor(values_[id]->shape);
}

void Tape::backward(const Var& loss) {
  if (backward_done_) {
    throw ShapeError("tape: backward already run on this tape");
  }
  if (!loss.tracked()) {
    throw ShapeError("tape: backward on an untracked value");
  }
  check_id(loss.id);
  if (values_[loss.id]->numel() != 1) {
    throw ShapeError("tape: backward needs a scalar loss, got " +
                     values_[loss.id]->shape_str());
  }
  // rejected calls above must not consume the tape
  backward_done_ = true;
  if (!wants_[loss.id]) {
    // Loss does not depend on any tracked input; nothing to propagate.
    return;
  }
  grads_[loss.id] = Tensor::full(values_[loss.id]->shape, 1.0);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (grad_if_any(it->out) == nullptr) continue;  // not on a path to loss
    it->vjp(*this, *it);
  }
  for (const auto& [p, id] : bound_) {
    if (const Tensor* g = grad_if_any(id)) {
      for (std::size_t i = 0; i < p->grad.data.size(); ++i) {
        p->grad.data[i] += g->data[i];
      }
    }
  }
}

std::vector<std::string> Tape::op_sequence() const {
  std::vector<std::string> ops;
  ops.reserve(records_.size());
  for (const Record& r : records_) ops.emplace_back(r.op);
  return ops;
}

}  // namespace laso
