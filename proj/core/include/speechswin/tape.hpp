/* Copyright 2026 The SpeechSwin Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SPEECHSWIN_TAPE_HPP_
#define SPEECHSWIN_TAPE_HPP_

#include <functional>
#include <vector>

#include "speechswin/tensor.hpp"

namespace speechswin {

// Reverse-mode differentiation tape. Operations append nodes in execution
// order, so every node's parents precede it and a single reverse sweep visits
// each node exactly once. A tape is single-use: after backward() it refuses
// further recording until reset(), which also invalidates the node ids held
// by previously tracked tensors (leaves must be watched again).
//
// The tape is confined to one thread; tensors themselves are immutable and
// may be shared read-only across threads.
template <typename T>
class Tape {
 public:
  // Receives the tape and the node id whose output gradient is ready; must
  // accumulate into the parents' gradient buffers.
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf tensor. Idempotent for a tensor already on this tape.
  void watch(Tensor<T>& leaf) {
    if (leaf.tape() == this && leaf.node() >= 0 &&
        leaf.node() < static_cast<int>(nodes_.size())) {
      return;
    }
    if (leaf.tape() != nullptr && leaf.tape() != this) {
      throw std::logic_error("tensor is already tracked by a different tape");
    }
    int id = record({}, leaf.numel(), nullptr);
    leaf.attach_(this, id);
  }

  int record(std::vector<int> parents, int64_t out_numel, BackwardFn fn) {
    if (backward_run_) {
      throw std::logic_error(
          "tape already consumed by backward(); call reset() before recording");
    }
    nodes_.push_back(NodeRec{std::move(parents), out_numel, std::move(fn)});
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Runs the reverse sweep from a scalar loss. May be called once per tape.
  void backward(const Tensor<T>& loss) {
    if (loss.tape() != this || loss.node() < 0) {
      throw std::logic_error("backward(): loss is not recorded on this tape");
    }
    if (loss.numel() != 1) {
      throw ShapeError("backward() requires a scalar loss, got shape " +
                       shape_str(loss.shape()));
    }
    if (backward_run_) {
      throw std::logic_error("backward() already ran; reset() the tape first");
    }
    backward_run_ = true;
    grads_[loss.node()].assign(1, T(1));
    for (int id = loss.node(); id >= 0; --id) {
      if (grads_[id].empty() || !nodes_[id].backward) continue;
      nodes_[id].backward(*this, id);
    }
  }

  // Gradient of the loss w.r.t. a tracked tensor. A tensor with no path to
  // the loss gets a zero gradient.
  Tensor<T> grad(const Tensor<T>& t) const {
    if (t.tape() != this || t.node() < 0) {
      throw std::logic_error("grad(): tensor is not tracked by this tape");
    }
    const std::vector<T>& g = grads_[t.node()];
    if (g.empty()) return Tensor<T>(t.shape());
    return Tensor<T>(t.shape(), g);
  }

  // Zero-initialized gradient buffer for a node, allocated on first use.
  std::vector<T>& grad_buffer(int node) {
    std::vector<T>& g = grads_[node];
    if (g.empty()) g.assign(nodes_[node].numel, T(0));
    return g;
  }

  const std::vector<T>& output_grad(int node) const { return grads_[node]; }

  void accumulate(int node, const T* g, int64_t n) {
    std::vector<T>& buf = grad_buffer(node);
    for (int64_t i = 0; i < n; ++i) buf[i] += g[i];
  }

  void reset() {
    nodes_.clear();
    grads_.clear();
    backward_run_ = false;
  }

  bool consumed() const { return backward_run_; }
  int64_t num_nodes() const { return static_cast<int64_t>(nodes_.size()); }
  const std::vector<int>& parents(int node) const { return nodes_[node].parents; }

 private:
  struct NodeRec {
    std::vector<int> parents;
    int64_t numel;
    BackwardFn backward;  // null for leaves
  };

  std::vector<NodeRec> nodes_;
  std::vector<std::vector<T>> grads_;
  bool backward_run_ = false;
};

}  // namespace speechswin

#endif  // SPEECHSWIN_TAPE_HPP_
