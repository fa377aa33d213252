// speakerkit/tensor.h

// Copyright 2026  Speakerkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode autodiff over dense tensors.
//
// A Tensor is a cheap handle onto a graph node holding the value, an optional
// gradient, and (when gradients are being recorded) the producing operation's
// backward closure plus handles to its inputs.  backward() on a scalar walks
// the graph in reverse topological order; gradients of intermediate nodes
// live in a per-call scratch map, while LEAF tensors with requires_grad set
// (model parameters) accumulate into their persistent grad buffer until
// zero_grad() is called.
//
// Computations default to single precision; instantiate with double for the
// high-precision mode used by the finite-difference gradient checks.

#ifndef SPEAKERKIT_TENSOR_H_
#define SPEAKERKIT_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "speakerkit/common.h"
#include "speakerkit/errors.h"

namespace speakerkit {

// Thread-local switch: when recording is off (inference), ops skip building
// the graph entirely.
inline bool& grad_recording_flag() {
  thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_recording_flag()) { grad_recording_flag() = false; }
  ~NoGradGuard() { grad_recording_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
class Tensor {
 private:
  struct Node;

 public:
  class GradSink;
  using BackwardFn = std::function<void(const std::vector<T>&, GradSink&)>;

  Tensor() = default;

  static Tensor from(Shape shape, std::vector<T> data,
                     bool requires_grad = false) {
    if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
      throw DimensionError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> d(static_cast<std::size_t>(numel_of(shape)), T(0));
    return from(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> d(static_cast<std::size_t>(numel_of(shape)), value);
    return from(std::move(shape), std::move(d), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from(Shape{}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::vector<T>& data() { return node_->data; }
  const std::vector<T>& data() const { return node_->data; }
  T item() const {
    if (numel() != 1) {
      throw UsageError("item() requires a single-element tensor, got shape " +
                       shape_str(shape()));
    }
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  // A leaf has no producing op.  Only leaves keep persistent gradients.
  bool is_leaf() const { return !node_->backward; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<T>& grad() {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  // Runs reverse-mode accumulation from this scalar.  Gradients of reachable
  // leaf tensors with requires_grad are ADDED to their grad buffers; calling
  // backward twice without zero_grad doubles them.
  void backward() const {
    if (numel() != 1) {
      throw UsageError("backward() requires a scalar loss, got shape " +
                       shape_str(shape()));
    }
    // Iterative post-order DFS over producing nodes.
    std::vector<Node*> order;
    std::unordered_map<Node*, int> state;  // 0 unseen, 1 open, 2 done
    std::vector<Node*> stack{node_.get()};
    while (!stack.empty()) {
      Node* n = stack.back();
      int& st = state[n];
      if (st == 0) {
        st = 1;
        for (const Tensor& p : n->parents) {
          Node* pn = p.node_.get();
          if (pn->backward && state[pn] == 0) stack.push_back(pn);
        }
      } else {
        stack.pop_back();
        if (st == 1) {
          st = 2;
          if (n->backward) order.push_back(n);
        }
      }
    }
    std::unordered_map<Node*, std::vector<T>> transient;
    GradSink sink(&transient);
    transient[node_.get()] = std::vector<T>{T(1)};
    if (!node_->backward) {
      // A bare leaf: d(loss)/d(loss) = 1.
      if (node_->requires_grad) accumulate(node_.get(), {T(1)});
      return;
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      auto g = transient.find(n);
      if (g == transient.end()) continue;
      n->backward(g->second, sink);
      transient.erase(g);  // children all processed; free as we go
    }
  }

  // Hands op closures a place to accumulate each parent's gradient, or
  // nullptr when that parent does not need one.
  class GradSink {
   public:
    explicit GradSink(std::unordered_map<Node*, std::vector<T>>* transient)
        : transient_(transient) {}

    T* grad_for(const Tensor& parent) {
      Node* n = parent.node_.get();
      if (!n->requires_grad) return nullptr;
      if (!n->backward) {  // leaf: persistent accumulation
        if (n->grad.empty()) n->grad.assign(n->data.size(), T(0));
        return n->grad.data();
      }
      auto& buf = (*transient_)[n];
      if (buf.empty()) buf.assign(n->data.size(), T(0));
      return buf.data();
    }

   private:
    std::unordered_map<Node*, std::vector<T>>* transient_;
  };

  // Records the producing operation.  Called by ops after computing data.
  void attach_backward(std::vector<Tensor> parents, BackwardFn fn) {
    node_->parents = std::move(parents);
    node_->backward = std::move(fn);
    node_->requires_grad = true;
  }

  // True if recording is on and any input carries gradient lineage.
  static bool recording(std::initializer_list<const Tensor*> inputs) {
    if (!grad_recording_flag()) return false;
    for (const Tensor* t : inputs)
      if ((*t).node_ && (*t).node_->requires_grad) return true;
    return false;
  }

  const std::string& name() const { return node_->name; }
  void set_name(std::string n) { node_->name = std::move(n); }

  // Deep copy of the value (drops graph and gradient).
  Tensor clone_detached() const {
    return from(node_->shape, node_->data, node_->requires_grad);
  }

 private:
  struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // leaves only; empty means "absent"
    bool requires_grad = false;
    std::string name;
    std::vector<Tensor> parents;
    BackwardFn backward;
  };

  static void accumulate(Node* n, const std::vector<T>& g) {
    if (n->grad.empty()) n->grad.assign(n->data.size(), T(0));
    for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
  }

  std::shared_ptr<Node> node_;
};

// A named trainable tensor.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

}  // namespace speakerkit

#endif  // SPEAKERKIT_TENSOR_H_
