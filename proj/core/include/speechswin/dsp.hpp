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

#ifndef SPEECHSWIN_DSP_HPP_
#define SPEECHSWIN_DSP_HPP_

#include <cstdint>
#include <vector>

#include "speechswin/wav.hpp"

namespace speechswin {

// Feature-extraction settings. Defaults: 16 kHz audio, pre-emphasis 0.97,
// 20 ms periodic Hamming window with 10 ms hop, 512-point FFT, 32 Mel bands
// over 0..8 kHz, natural-log compression floored at 1e-10, non-overlapping
// 128-frame segments where a trailing partial segment of at least 64 frames
// is zero-padded and a shorter one is dropped.
struct DspConfig {
  int sample_rate_hz = 16000;
  double pre_emphasis = 0.97;
  double window_ms = 20.0;
  double hop_ms = 10.0;
  int n_fft = 512;
  int n_mels = 32;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  int segment_frames = 128;
  int min_tail_frames = 64;
  double log_floor = 1e-10;

  int window_length() const {
    return static_cast<int>(sample_rate_hz * window_ms / 1000.0 + 0.5);
  }
  int hop_length() const {
    return static_cast<int>(sample_rate_hz * hop_ms / 1000.0 + 0.5);
  }
  int n_bins() const { return n_fft / 2 + 1; }

  void validate() const;
  // Hash over every field that affects feature values; artifacts produced
  // under one configuration are rejected by runs using another.
  uint64_t hash() const;
};

// HTK Mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters with centers equally spaced on the Mel scale; each
// filter peaks at 1 at its center (no area normalization). Rows are filters,
// columns FFT bins.
struct MelFilterbank {
  int n_mels = 0;
  int n_bins = 0;
  std::vector<double> weights;     // n_mels x n_bins, row-major
  std::vector<double> centers_hz;  // n_mels filter centers
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;

  double weight(int mel, int bin) const { return weights[mel * n_bins + bin]; }
};

MelFilterbank mel_filterbank(int n_mels, int n_fft, int sample_rate_hz,
                             double fmin_hz, double fmax_hz);

// y[n] = x[n] - alpha * x[n-1], y[0] = x[0].
AudioClip pre_emphasis(const AudioClip& clip, double alpha = 0.97);

// Periodic Hamming window: w[n] = 0.54 - 0.46 cos(2 pi n / N).
std::vector<double> hamming_window(int length);

// Power spectrogram, one row per frame, n_fft/2 + 1 bins per row. The clip
// must contain at least one full analysis window.
std::vector<std::vector<double>> stft_power(const AudioClip& clip,
                                            const DspConfig& cfg);

// log(max(fb . power_frame, floor)) per frame, natural log.
std::vector<std::vector<double>> log_mel(
    const std::vector<std::vector<double>>& power, const MelFilterbank& fb,
    double floor = 1e-10);

// Splits a (frames x n_mels) log-Mel matrix into non-overlapping segments of
// cfg.segment_frames frames, each transposed to (n_mels x segment_frames)
// row-major (Mel band major) float32. The trailing partial rule is in
// DspConfig's doc comment. Short clips may produce no segments.
std::vector<std::vector<float>> segment_frames(
    const std::vector<std::vector<double>>& logmel, const DspConfig& cfg);

// Full pipeline: pre-emphasis, STFT power, Mel projection, log, segmentation.
std::vector<std::vector<float>> extract_segments(const AudioClip& clip,
                                                 const DspConfig& cfg);

}  // namespace speechswin

#endif  // SPEECHSWIN_DSP_HPP_
