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

#ifndef SPEECHSWIN_DATASET_HPP_
#define SPEECHSWIN_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace speechswin {

// One row of a dataset manifest: tab-separated text with the header
// "path<TAB>label<TAB>speaker<TAB>clip". WAV paths are resolved relative to
// the manifest's directory. Label names map to indices 0..k-1 in sorted
// order.
struct ManifestRow {
  std::string wav_path;
  std::string label;
  std::string speaker;
  std::string clip;
};

struct Manifest {
  std::vector<ManifestRow> rows;
  std::vector<std::string> label_names;  // sorted, dense 0..k-1

  int64_t label_index(const std::string& name) const;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

// Fixed-size feature segments with labels, speaker and clip identity. All
// segments of one clip share its label and speaker.
struct SegmentInfo {
  int64_t clip = 0;
  int64_t label = 0;
  int64_t speaker = 0;
};

struct SegmentDataset {
  int64_t bands = 32;
  int64_t frames = 128;
  std::vector<std::string> label_names;
  std::vector<std::string> speaker_names;
  std::vector<std::string> clip_names;
  std::vector<SegmentInfo> segments;
  std::vector<float> features;  // segments.size() * bands * frames, band-major

  int64_t segment_size() const { return bands * frames; }
  const float* feature(int64_t i) const {
    return features.data() + i * segment_size();
  }
  int64_t size() const { return static_cast<int64_t>(segments.size()); }
  int64_t num_classes() const { return static_cast<int64_t>(label_names.size()); }
  int64_t num_speakers() const {
    return static_cast<int64_t>(speaker_names.size());
  }

  void validate() const;
};

// Leave-one-speaker-out fold: fold i tests speaker i and trains on all
// others. Item lists index into SegmentDataset::segments.
struct LosoFold {
  int64_t test_speaker = 0;
  std::vector<int64_t> train_items;
  std::vector<int64_t> test_items;
};

// One fold per speaker, in speaker-index order. Folds partition the dataset
// and no clip straddles train/test (a clip has exactly one speaker).
// Requires at least two speakers.
std::vector<LosoFold> loso_splits(const SegmentDataset& ds);

}  // namespace speechswin

#endif  // SPEECHSWIN_DATASET_HPP_
