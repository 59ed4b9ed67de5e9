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

#include "speechswin/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "speechswin/errors.hpp"
#include "speechswin/fft.hpp"

namespace speechswin {
namespace {

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void DspConfig::validate() const {
  if (sample_rate_hz <= 0) throw ConfigError("dsp: sample rate must be positive");
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0) {
    throw ConfigError("dsp: n_fft must be a positive power of two");
  }
  if (window_length() > n_fft) {
    throw ConfigError("dsp: analysis window longer than n_fft");
  }
  if (n_mels < 1) throw ConfigError("dsp: need at least one Mel band");
  if (fmin_hz < 0 || fmax_hz <= fmin_hz || fmax_hz > sample_rate_hz / 2.0) {
    throw ConfigError("dsp: invalid Mel frequency range");
  }
  if (segment_frames < 1 || min_tail_frames < 1 ||
      min_tail_frames > segment_frames) {
    throw ConfigError("dsp: invalid segmentation lengths");
  }
  if (log_floor <= 0) throw ConfigError("dsp: log floor must be positive");
}

uint64_t DspConfig::hash() const {
  std::ostringstream os;
  os << "sr=" << sample_rate_hz << ";pre=" << pre_emphasis << ";win=" << window_ms
     << ";hop=" << hop_ms << ";nfft=" << n_fft << ";nmels=" << n_mels
     << ";fmin=" << fmin_hz << ";fmax=" << fmax_hz << ";seg=" << segment_frames
     << ";tail=" << min_tail_frames << ";floor=" << log_floor;
  return fnv1a64(os.str());
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank mel_filterbank(int n_mels, int n_fft, int sample_rate_hz,
                             double fmin_hz, double fmax_hz) {
  if (n_mels < 1) throw ConfigError("mel_filterbank: need at least one band");
  if (fmin_hz < 0 || fmax_hz <= fmin_hz ||
      fmax_hz > sample_rate_hz / 2.0 + 1e-9) {
    throw ConfigError("mel_filterbank: invalid frequency range");
  }

  const int n_bins = n_fft / 2 + 1;
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_bins;
  fb.fmin_hz = fmin_hz;
  fb.fmax_hz = fmax_hz;
  fb.weights.assign(static_cast<size_t>(n_mels) * n_bins, 0.0);
  fb.centers_hz.resize(n_mels);

  // n_mels + 2 breakpoints equally spaced in Mel; filter i ramps from point
  // i up to its center at point i+1 and back down to point i+2.
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> edges_hz(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1);
    edges_hz[i] = mel_to_hz(mel);
  }
  for (int m = 0; m < n_mels; ++m) fb.centers_hz[m] = edges_hz[m + 1];

  const double hz_per_bin = static_cast<double>(sample_rate_hz) / n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges_hz[m], center = edges_hz[m + 1],
                 right = edges_hz[m + 2];
    for (int b = 0; b < n_bins; ++b) {
      const double f = b * hz_per_bin;
      double w = 0.0;
      if (f > left && f < right) {
        w = f <= center ? (f - left) / (center - left)
                        : (right - f) / (right - center);
      }
      fb.weights[static_cast<size_t>(m) * n_bins + b] = w;
    }
  }
  return fb;
}

AudioClip pre_emphasis(const AudioClip& clip, double alpha) {
  if (clip.samples.empty()) throw DataError("pre_emphasis: empty clip");
  AudioClip out;
  out.sample_rate_hz = clip.sample_rate_hz;
  out.samples.resize(clip.samples.size());
  out.samples[0] = clip.samples[0];
  for (size_t n = 1; n < clip.samples.size(); ++n) {
    out.samples[n] = clip.samples[n] - alpha * clip.samples[n - 1];
  }
  return out;
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / length);
  }
  return w;
}

std::vector<std::vector<double>> stft_power(const AudioClip& clip,
                                            const DspConfig& cfg) {
  const int win = cfg.window_length();
  const int hop = cfg.hop_length();
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  if (n < win) {
    throw DataError("stft: clip of " + std::to_string(n) +
                    " samples is shorter than one " + std::to_string(win) +
                    "-sample window");
  }
  const std::vector<double> window = hamming_window(win);
  const int64_t frames = 1 + (n - win) / hop;
  const int n_bins = cfg.n_bins();

  std::vector<std::vector<double>> power(frames);
  std::vector<double> buf(win);
  for (int64_t f = 0; f < frames; ++f) {
    const double* src = clip.samples.data() + f * hop;
    for (int i = 0; i < win; ++i) buf[i] = src[i] * window[i];
    const std::vector<std::complex<double>> spec = rfft(buf, cfg.n_fft);
    power[f].resize(n_bins);
    for (int b = 0; b < n_bins; ++b) power[f][b] = std::norm(spec[b]);
  }
  return power;
}

std::vector<std::vector<double>> log_mel(
    const std::vector<std::vector<double>>& power, const MelFilterbank& fb,
    double floor) {
  std::vector<std::vector<double>> out(power.size());
  for (size_t f = 0; f < power.size(); ++f) {
    if (static_cast<int>(power[f].size()) != fb.n_bins) {
      throw ShapeError("log_mel: frame has " + std::to_string(power[f].size()) +
                       " bins; filterbank expects " + std::to_string(fb.n_bins));
    }
    out[f].resize(fb.n_mels);
    for (int m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      const double* w = fb.weights.data() + static_cast<size_t>(m) * fb.n_bins;
      for (int b = 0; b < fb.n_bins; ++b) acc += w[b] * power[f][b];
      out[f][m] = std::log(std::max(acc, floor));
    }
  }
  return out;
}

std::vector<std::vector<float>> segment_frames(
    const std::vector<std::vector<double>>& logmel, const DspConfig& cfg) {
  const int64_t total = static_cast<int64_t>(logmel.size());
  const int seg = cfg.segment_frames;
  const int mels = cfg.n_mels;

  int64_t count = total / seg;
  const int64_t tail = total % seg;
  const bool pad_tail = tail >= cfg.min_tail_frames;
  if (pad_tail) ++count;

  std::vector<std::vector<float>> segments;
  segments.reserve(count);
  for (int64_t s = 0; s < count; ++s) {
    std::vector<float> block(static_cast<size_t>(mels) * seg, 0.0f);
    const int64_t start = s * seg;
    const int64_t frames = std::min<int64_t>(seg, total - start);
    for (int64_t f = 0; f < frames; ++f) {
      const std::vector<double>& row = logmel[start + f];
      for (int m = 0; m < mels; ++m) {
        // (band, frame) layout, band major.
        block[static_cast<size_t>(m) * seg + f] = static_cast<float>(row[m]);
      }
    }
    segments.push_back(std::move(block));
  }
  return segments;
}

std::vector<std::vector<float>> extract_segments(const AudioClip& clip,
                                                 const DspConfig& cfg) {
  cfg.validate();
  const AudioClip emphasized = pre_emphasis(clip, cfg.pre_emphasis);
  const auto power = stft_power(emphasized, cfg);
  const MelFilterbank fb =
      mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate_hz, cfg.fmin_hz,
                     cfg.fmax_hz);
  const auto lm = log_mel(power, fb, cfg.log_floor);
  return segment_frames(lm, cfg);
}

}  // namespace speechswin
