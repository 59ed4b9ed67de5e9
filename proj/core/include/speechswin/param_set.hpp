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

#ifndef SPEECHSWIN_PARAM_SET_HPP_
#define SPEECHSWIN_PARAM_SET_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "speechswin/tape.hpp"
#include "speechswin/tensor.hpp"

namespace speechswin {

// Ordered collection of named tensors. Insertion order is the canonical
// order used for checkpoints and gradient lists.
template <typename T>
class ParamSet {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    if (index_.count(name)) {
      throw std::logic_error("duplicate parameter name: " + name);
    }
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const Tensor<T>& at(const std::string& name) const {
    return tensors_[find(name)];
  }
  Tensor<T>& at(const std::string& name) { return tensors_[find(name)]; }

  // Replaces a tensor (same shape) with a fresh, untracked value.
  void set(const std::string& name, Tensor<T> t) { set(find(name), std::move(t)); }
  void set(size_t i, Tensor<T> t) {
    if (t.shape() != tensors_[i].shape()) {
      throw ShapeError("parameter '" + names_[i] + "' shape " +
                       shape_str(tensors_[i].shape()) + " cannot be replaced by " +
                       shape_str(t.shape()));
    }
    tensors_[i] = std::move(t);
  }

  size_t size() const { return tensors_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  Tensor<T>& tensor(size_t i) { return tensors_[i]; }
  const Tensor<T>& tensor(size_t i) const { return tensors_[i]; }

  int64_t total_elements() const {
    int64_t n = 0;
    for (const Tensor<T>& t : tensors_) n += t.numel();
    return n;
  }

  void watch_all(Tape<T>& tape) {
    for (Tensor<T>& t : tensors_) tape.watch(t);
  }

 private:
  size_t find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::logic_error("unknown parameter name: " + name);
    }
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace speechswin

#endif  // SPEECHSWIN_PARAM_SET_HPP_
