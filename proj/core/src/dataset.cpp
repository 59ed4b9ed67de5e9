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

#include "speechswin/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "speechswin/errors.hpp"

namespace speechswin {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

int64_t Manifest::label_index(const std::string& name) const {
  const auto it = std::lower_bound(label_names.begin(), label_names.end(), name);
  if (it == label_names.end() || *it != name) {
    throw DataError("manifest: unknown label '" + name + "'");
  }
  return it - label_names.begin();
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open manifest");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  Manifest m;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty manifest");
  {
    const auto header = split_tabs(line);
    if (header.size() != 4 || header[0] != "path" || header[1] != "label" ||
        header[2] != "speaker" || header[3] != "clip") {
      throw DataError(path +
                      ": manifest header must be 'path\\tlabel\\tspeaker\\tclip'");
    }
  }
  std::set<std::string> labels;
  std::set<std::string> clips;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 4 tab-separated fields");
    }
    ManifestRow row;
    std::filesystem::path wav(fields[0]);
    row.wav_path = wav.is_absolute() ? wav.string() : (base / wav).string();
    row.label = fields[1];
    row.speaker = fields[2];
    row.clip = fields[3];
    if (!clips.insert(row.clip).second) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": duplicate clip id '" + row.clip + "'");
    }
    labels.insert(row.label);
    m.rows.push_back(std::move(row));
  }
  m.label_names.assign(labels.begin(), labels.end());
  return m;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write manifest");
  out << "path\tlabel\tspeaker\tclip\n";
  for (const ManifestRow& r : rows) {
    out << r.wav_path << '\t' << r.label << '\t' << r.speaker << '\t' << r.clip
        << '\n';
  }
  if (!out) throw DataError(path + ": write failed");
}

void SegmentDataset::validate() const {
  if (static_cast<int64_t>(features.size()) != size() * segment_size()) {
    throw DataError("dataset: feature buffer does not match segment count");
  }
  for (const SegmentInfo& s : segments) {
    if (s.label < 0 || s.label >= num_classes()) {
      throw DataError("dataset: label index out of range");
    }
    if (s.speaker < 0 || s.speaker >= num_speakers()) {
      throw DataError("dataset: speaker index out of range");
    }
    if (s.clip < 0 || s.clip >= static_cast<int64_t>(clip_names.size())) {
      throw DataError("dataset: clip index out of range");
    }
  }
}

std::vector<LosoFold> loso_splits(const SegmentDataset& ds) {
  ds.validate();
  if (ds.num_speakers() < 2) {
    throw ConfigError("loso: need at least two speakers, got " +
                      std::to_string(ds.num_speakers()));
  }
  std::vector<LosoFold> folds(ds.num_speakers());
  for (int64_t sp = 0; sp < ds.num_speakers(); ++sp) {
    folds[sp].test_speaker = sp;
  }
  for (int64_t i = 0; i < ds.size(); ++i) {
    const int64_t sp = ds.segments[i].speaker;
    for (int64_t f = 0; f < ds.num_speakers(); ++f) {
      (f == sp ? folds[f].test_items : folds[f].train_items).push_back(i);
    }
  }
  // Every fold partitions the dataset; a clip's segments all carry one
  // speaker, so no clip can straddle the split.
  for (const LosoFold& f : folds) {
    if (f.train_items.size() + f.test_items.size() !=
        static_cast<size_t>(ds.size())) {
      throw DataError("loso: fold does not partition the dataset");
    }
    for (int64_t i : f.test_items) {
      if (ds.segments[i].speaker != f.test_speaker) {
        throw DataError("loso: speaker leakage into the test fold");
      }
    }
    for (int64_t i : f.train_items) {
      if (ds.segments[i].speaker == f.test_speaker) {
        throw DataError("loso: test speaker leaked into the training fold");
      }
    }
  }
  return folds;
}

}  // namespace speechswin
