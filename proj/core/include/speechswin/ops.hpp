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

#ifndef SPEECHSWIN_OPS_HPP_
#define SPEECHSWIN_OPS_HPP_

#include <cstdint>
#include <vector>

#include "speechswin/tape.hpp"
#include "speechswin/tensor.hpp"

namespace speechswin {
namespace ops {

// Differentiable tensor primitives. Every op records itself on a tape when
// any operand is tracked; operands tracked on different tapes are an error.
// Untracked operands receive no gradient.

// Elementwise sum with numpy-style broadcasting.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// x * s for a constant scalar.
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s);

// Batched matrix product of (..., m, p) x (..., p, n) -> (..., m, n), scaled
// by alpha. Leading batch dimensions must match exactly, or one operand may
// be a plain matrix shared across the other's batches.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, T alpha = T(1));

// Affine map on the last axis: (..., in) x (in, out) + (out,).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// Zero mean / unit variance over the last axis, then gamma * xhat + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis);

// Gaussian error linear unit in its exact erf form.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

// Arithmetic mean over one axis (axis removed from the shape).
template <typename T>
Tensor<T> mean_pool(const Tensor<T>& x, int axis);

// Metadata-only relayout; shares storage with the input.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape);

// out.shape[i] == x.shape[perm[i]].
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm);

// Select idx slices along an axis; gradient scatter-adds back.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, int axis, const std::vector<int64_t>& idx);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis);

// Cyclic roll along an axis: out[..., j, ...] = x[..., (j + shift) mod L, ...].
template <typename T>
Tensor<T> roll(const Tensor<T>& x, int64_t shift, int axis);

// Mean over the batch of -log softmax(logits)[label], in log-sum-exp form.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int64_t>& labels);

// softmax over the last axis of scores (batch*windows, heads, L, L) after
// adding an untracked additive mask (windows, L, L); window index of a score
// row is its leading index mod windows. Fusing the mask keeps the mask's
// non-finite-like sentinel out of intermediate tensors.
template <typename T>
Tensor<T> masked_window_softmax(const Tensor<T>& scores, const Tensor<T>& mask);

extern template Tensor<float> add(const Tensor<float>&, const Tensor<float>&);
extern template Tensor<double> add(const Tensor<double>&, const Tensor<double>&);
extern template Tensor<float> scale(const Tensor<float>&, float);
extern template Tensor<double> scale(const Tensor<double>&, double);
extern template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&, float);
extern template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&, double);
extern template Tensor<float> linear(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
extern template Tensor<double> linear(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);
extern template Tensor<float> layer_norm(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, float);
extern template Tensor<double> layer_norm(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, double);
extern template Tensor<float> softmax(const Tensor<float>&, int);
extern template Tensor<double> softmax(const Tensor<double>&, int);
extern template Tensor<float> gelu(const Tensor<float>&);
extern template Tensor<double> gelu(const Tensor<double>&);
extern template Tensor<float> mean_pool(const Tensor<float>&, int);
extern template Tensor<double> mean_pool(const Tensor<double>&, int);
extern template Tensor<float> reshape(const Tensor<float>&, Shape);
extern template Tensor<double> reshape(const Tensor<double>&, Shape);
extern template Tensor<float> permute(const Tensor<float>&, const std::vector<int>&);
extern template Tensor<double> permute(const Tensor<double>&, const std::vector<int>&);
extern template Tensor<float> gather(const Tensor<float>&, int, const std::vector<int64_t>&);
extern template Tensor<double> gather(const Tensor<double>&, int, const std::vector<int64_t>&);
extern template Tensor<float> concat(const std::vector<Tensor<float>>&, int);
extern template Tensor<double> concat(const std::vector<Tensor<double>>&, int);
extern template Tensor<float> roll(const Tensor<float>&, int64_t, int);
extern template Tensor<double> roll(const Tensor<double>&, int64_t, int);
extern template Tensor<float> cross_entropy(const Tensor<float>&, const std::vector<int64_t>&);
extern template Tensor<double> cross_entropy(const Tensor<double>&, const std::vector<int64_t>&);
extern template Tensor<float> masked_window_softmax(const Tensor<float>&, const Tensor<float>&);
extern template Tensor<double> masked_window_softmax(const Tensor<double>&, const Tensor<double>&);

}  // namespace ops
}  // namespace speechswin

#endif  // SPEECHSWIN_OPS_HPP_
