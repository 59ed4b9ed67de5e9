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

#ifndef SPEECHSWIN_MODEL_HPP_
#define SPEECHSWIN_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "speechswin/model_config.hpp"
#include "speechswin/ops.hpp"
#include "speechswin/param_set.hpp"

namespace speechswin {

// Additive attention-mask entries use a large negative finite sentinel
// rather than IEEE -inf so every tensor stays finite; exp() of a masked
// score underflows to exactly zero after max subtraction.
inline constexpr double kMaskNegInf = -1e9;

// A token grid (batch', H, W, C) partitioned into full-height windows of
// window_width consecutive time columns, flattened to
// (batch' * count, H * window_width, C) with frequency-major token order.
template <typename T>
struct WindowSet {
  Tensor<T> tokens;
  int64_t grid_batch = 0;    // batch' of the source grid
  int64_t height = 0;        // H
  int64_t grid_width = 0;    // W
  int64_t window_width = 0;  // columns per window

  int64_t count() const { return grid_width / window_width; }   // windows/grid
  int64_t window_tokens() const { return height * window_width; }
};

template <typename T>
WindowSet<T> window_partition(const Tensor<T>& grid, int64_t window_width);

template <typename T>
Tensor<T> window_merge(const WindowSet<T>& ws);

// Rolls time columns left by offset (column j of the result is source
// column (j + offset) mod W). Negative offset rolls right.
template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& grid, int64_t offset);

// (count, window_tokens, window_tokens) additive mask for a shifted grid:
// token pairs whose columns originate from opposite sides of the wrap
// boundary get kMaskNegInf. Only the last window along time is heterogeneous.
template <typename T>
Tensor<T> build_shift_mask(int64_t height, int64_t grid_width,
                           int64_t window_width, int64_t offset);

template <typename T>
struct AttentionWeights {
  const Tensor<T>* q_w;
  const Tensor<T>* q_b;
  const Tensor<T>* k_w;
  const Tensor<T>* k_b;
  const Tensor<T>* v_w;
  const Tensor<T>* v_b;
  const Tensor<T>* proj_w;
  const Tensor<T>* proj_b;
  // Optional learned relative position bias: table ((2H-1)(2w-1), heads)
  // indexed per token pair by rel_index (window_tokens^2 entries).
  const Tensor<T>* rel_bias_table = nullptr;
  const std::vector<int64_t>* rel_index = nullptr;
};

// Multi-head self-attention within each window; scores are scaled by
// 1/sqrt(head_dim) and optionally masked. No attention crosses windows.
template <typename T>
WindowSet<T> window_msa(const WindowSet<T>& ws, const AttentionWeights<T>& w,
                        const Tensor<T>* mask, int64_t heads);

// 2x2 parity downsampling: gathers the (even,even), (odd,even), (even,odd),
// (odd,odd) sub-grids, concatenates channels to 4C, layer-normalizes and
// linearly reduces to 2C.
template <typename T>
Tensor<T> patch_merging(const Tensor<T>& grid, const Tensor<T>& norm_gamma,
                        const Tensor<T>& norm_beta, const Tensor<T>& reduce_w,
                        const Tensor<T>& reduce_b);

// Relative-position index map for a (height x width) window.
std::vector<int64_t> relative_position_index(int64_t height, int64_t width);

// The hierarchical windowed-attention classifier. Parameters are created by
// init(); forward() optionally records on a tape (pass nullptr to run
// inference). One model instance is confined to a single thread while
// training; parameter tensors may be shared read-only across threads.
template <typename T>
class SwinModel {
 public:
  explicit SwinModel(ModelConfig cfg);

  // Truncated-normal(0.02) weights, zero biases, unit/zero layer norms.
  void init(uint64_t seed);

  // x: (batch, 1, mel_bands, frames) -> logits (batch, num_classes).
  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x) const;

  // Channel-mean map after every stage, each (batch, segments, H_s, W_s).
  std::vector<Tensor<T>> feature_maps(const Tensor<T>& x) const;

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  int64_t num_params() const { return params_.total_elements(); }

 private:
  Tensor<T> forward_impl(Tape<T>* tape, const Tensor<T>& x,
                         std::vector<Tensor<T>>* stage_grids) const;
  Tensor<T> run_block(const Tensor<T>& grid, int stage, int block,
                      bool shifted) const;

  ModelConfig cfg_;
  ParamSet<T> params_;
  std::vector<Tensor<T>> shift_masks_;              // per stage
  std::vector<std::vector<int64_t>> rel_indices_;   // per stage (if enabled)
};

extern template struct WindowSet<float>;
extern template struct WindowSet<double>;
extern template WindowSet<float> window_partition(const Tensor<float>&, int64_t);
extern template WindowSet<double> window_partition(const Tensor<double>&, int64_t);
extern template Tensor<float> window_merge(const WindowSet<float>&);
extern template Tensor<double> window_merge(const WindowSet<double>&);
extern template Tensor<float> cyclic_shift(const Tensor<float>&, int64_t);
extern template Tensor<double> cyclic_shift(const Tensor<double>&, int64_t);
extern template Tensor<float> build_shift_mask<float>(int64_t, int64_t, int64_t, int64_t);
extern template Tensor<double> build_shift_mask<double>(int64_t, int64_t, int64_t, int64_t);
extern template WindowSet<float> window_msa(const WindowSet<float>&, const AttentionWeights<float>&, const Tensor<float>*, int64_t);
extern template WindowSet<double> window_msa(const WindowSet<double>&, const AttentionWeights<double>&, const Tensor<double>*, int64_t);
extern template Tensor<float> patch_merging(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
extern template Tensor<double> patch_merging(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);
extern template class SwinModel<float>;
extern template class SwinModel<double>;

}  // namespace speechswin

#endif  // SPEECHSWIN_MODEL_HPP_
