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

#ifndef SPEECHSWIN_MODEL_CONFIG_HPP_
#define SPEECHSWIN_MODEL_CONFIG_HPP_

#include <algorithm>
#include <cstdint>
#include <vector>

namespace speechswin {

// Architecture hyperparameters. Defaults follow the reference configuration:
// inputs are (batch, 1, 32 Mel bands, 128 frames), split into 4 time
// segments, embedded at 96 channels, then four stages of depth 2/2/4/2 with
// full-band windows 4 frames wide and patch merging between stages.
struct ModelConfig {
  int64_t time_segments = 4;               // input split along time
  int64_t window_frames = 4;               // window width in frames
  int64_t embed_dim = 96;
  std::vector<int64_t> depths = {2, 2, 4, 2};
  std::vector<int64_t> heads = {3, 6, 12, 24};
  int64_t mlp_ratio = 4;
  int64_t num_classes = 4;
  int64_t mel_bands = 32;
  int64_t frames = 128;
  bool rel_pos_bias = false;               // learned relative position bias

  int num_stages() const { return static_cast<int>(depths.size()); }
  int64_t segment_width() const { return frames / time_segments; }

  // Per-segment grid geometry at a 0-based stage.
  int64_t stage_channels(int stage) const { return embed_dim << stage; }
  int64_t stage_height(int stage) const { return mel_bands >> stage; }
  int64_t stage_width(int stage) const { return segment_width() >> stage; }
  int64_t stage_window(int stage) const {
    return std::min(window_frames, stage_width(stage));
  }

  // Channel count entering the classification head.
  int64_t feature_dim() const { return stage_channels(num_stages() - 1); }

  // Throws ConfigError on violated structural invariants: even depths, time
  // axis divisible by segments and windows, head divisibility, and enough
  // spatial extent for every patch-merging halving.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace speechswin

#endif  // SPEECHSWIN_MODEL_CONFIG_HPP_
