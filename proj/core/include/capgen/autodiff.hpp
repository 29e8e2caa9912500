/*
 * Copyright 2026 The capgen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "capgen/tensor.hpp"

namespace capgen {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<T>& tape() const;
  std::size_t id() const { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t i) const { return value().dim(i); }
  std::size_t size() const { return value().size(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run computation record. Nodes are appended in evaluation order, so
/// every node's inputs carry smaller ids and a reverse sweep is a valid
/// topological traversal. A tape is confined to one thread.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {
#ifndef NDEBUG
    check_finite_ = true;
#endif
  }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  void set_check_finite(bool on) { check_finite_ = on; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> value) { return push("constant", std::move(value), false, {}, {}); }

  /// Leaf whose gradient is kept on the tape (read back with grad()).
  Var<T> variable(Tensor<T> value) {
    return push("variable", std::move(value), grad_enabled_, {}, {});
  }

  /// Leaf bound to a persistent parameter; backward() accumulates into p.grad.
  /// Registering the same parameter twice returns the same node.
  Var<T> param(Parameter<T>& p) {
    if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var<T>(this, it->second);
    Var<T> v = push("param", p.value, grad_enabled_, {}, {});
    nodes_[v.id()].param = &p;
    param_ids_.emplace(&p, v.id());
    return v;
  }

  /// Appends an op result. The backward closure is dropped when no input needs a gradient.
  Var<T> record(const char* op, Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn) {
    bool needs = false;
    if (grad_enabled_) {
      for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
    }
    if (check_finite_ && !value.all_finite()) {
      throw NumericError(std::string("non-finite output from op '") + op + "'");
    }
    if (!needs) return push(op, std::move(value), false, {}, {});
    return push(op, std::move(value), true, std::move(inputs), std::move(fn));
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  const char* op(std::size_t id) const { return nodes_.at(id).op; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool has_grad(const Var<T>& v) const { return nodes_.at(v.id()).has_grad; }

  const Tensor<T>& grad(const Var<T>& v) const {
    const Node& n = nodes_.at(v.id());
    if (!n.has_grad) throw UsageError("no gradient recorded for node " + std::to_string(v.id()));
    return n.grad;
  }

  void backward(const Var<T>& loss) {
    if (!loss.valid() || &loss.tape() != this || loss.id() >= nodes_.size()) {
      throw UsageError("backward() called on a tensor not produced by this tape");
    }
    if (!grad_enabled_) throw UsageError("backward() on a tape with gradients disabled");
    if (backward_done_) throw UsageError("backward() already ran on this tape");
    if (loss.size() != 1) {
      throw UsageError("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    backward_done_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    grad_buffer(loss.id())[0] = T{1};
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward(*this, i);
    }
    for (auto& [p, id] : param_ids_) {
      Node& n = nodes_[id];
      if (p->grad.shape() != p->value.shape()) p->grad = Tensor<T>(p->value.shape());
      if (n.has_grad) {
        auto dst = p->grad.data();
        auto src = n.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
      p->has_grad = true;
    }
  }

 private:
  struct Node {
    const char* op = "";
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(const char* op, Tensor<T> value, bool requires_grad, std::vector<std::size_t> inputs,
              BackwardFn fn) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  bool grad_enabled_;
  bool check_finite_ = false;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter<T>*, std::size_t> param_ids_;
};

template <typename T>
Tape<T>& Var<T>::tape() const {
  if (!tape_) throw UsageError("use of an unbound Var");
  return *tape_;
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape().value(id_);
}

}  // namespace capgen
