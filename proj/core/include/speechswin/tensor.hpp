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

#ifndef SPEECHSWIN_TENSOR_HPP_
#define SPEECHSWIN_TENSOR_HPP_

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "speechswin/errors.hpp"

namespace speechswin {

// Row-major dimension sizes. Scalars are shape {1}; rank-0 is not used.
using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// Element strides of a contiguous row-major layout.
inline Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * shape[i + 1];
  }
  return strides;
}

template <typename T>
class Tape;

// Dense contiguous row-major tensor. Storage is shared between views and is
// treated as immutable once the tensor takes part in gradient recording;
// mutable_data() exists for construction, tests and the optimizer and throws
// after the tensor has been attached to a tape.
template <typename T>
class Tensor {
 public:
  Tensor() : data_(std::make_shared<std::vector<T>>()), shape_{0} {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = std::make_shared<std::vector<T>>(shape_numel(shape_), T(0));
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)) {
    check_shape(shape_);
    if (static_cast<int64_t>(data.size()) != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape_));
    }
    data_ = std::make_shared<std::vector<T>>(std::move(data));
  }

  // Shares existing storage (used by metadata-only ops such as reshape).
  Tensor(Shape shape, std::shared_ptr<std::vector<T>> data)
      : data_(std::move(data)), shape_(std::move(shape)) {
    check_shape(shape_);
    if (static_cast<int64_t>(data_->size()) != shape_numel(shape_)) {
      throw ShapeError("shared storage length " + std::to_string(data_->size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    std::fill(t.data_->begin(), t.data_->end(), v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }

  int64_t dim(int i) const {
    if (i < 0) i += ndim();
    if (i < 0 || i >= ndim()) {
      throw ShapeError("axis " + std::to_string(i) + " out of range for shape " +
                       shape_str(shape_));
    }
    return shape_[i];
  }

  int64_t numel() const { return static_cast<int64_t>(data_->size()); }

  const T* data() const { return data_->data(); }
  const std::vector<T>& vec() const { return *data_; }
  const std::shared_ptr<std::vector<T>>& storage() const { return data_; }

  T* mutable_data() {
    if (requires_grad()) {
      throw std::logic_error(
          "tensor is attached to a tape and may no longer be mutated");
    }
    return data_->data();
  }

  T item() const {
    if (numel() != 1) {
      throw ShapeError("item() requires a scalar tensor, got shape " +
                       shape_str(shape_));
    }
    return (*data_)[0];
  }

  T at(std::initializer_list<int64_t> idx) const {
    Shape strides = row_major_strides(shape_);
    int64_t off = 0;
    int i = 0;
    for (int64_t v : idx) off += v * strides[i++];
    return (*data_)[off];
  }

  // Autodiff metadata. A tensor "requires grad" once it is watched as a leaf
  // or produced by an op recorded on a tape.
  bool requires_grad() const { return node_ >= 0; }
  Tape<T>* tape() const { return tape_; }
  int node() const { return node_; }

  // Internal: called by the op layer / tape when recording.
  void attach_(Tape<T>* tape, int node) {
    tape_ = tape;
    node_ = node;
  }
  void detach_() {
    tape_ = nullptr;
    node_ = -1;
  }

 private:
  static void check_shape(const Shape& shape) {
    if (shape.empty()) {
      throw ShapeError("rank-0 tensors are not supported; use shape {1}");
    }
    for (int64_t d : shape) {
      if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    }
  }

  std::shared_ptr<std::vector<T>> data_;
  Shape shape_;
  Tape<T>* tape_ = nullptr;
  int node_ = -1;
};

}  // namespace speechswin

#endif  // SPEECHSWIN_TENSOR_HPP_
