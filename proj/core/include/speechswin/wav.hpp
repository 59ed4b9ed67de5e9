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

#ifndef SPEECHSWIN_WAV_HPP_
#define SPEECHSWIN_WAV_HPP_

#include <string>
#include <vector>

namespace speechswin {

// Mono PCM audio with samples in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate_hz = 16000;
};

// Reads a 16-bit PCM mono RIFF/WAVE file. Any other encoding (format tag,
// channel count, bit depth) is rejected with a DataError naming the file.
AudioClip read_wav(const std::string& path);

// Writes samples as 16-bit PCM mono little-endian WAV; values are clamped to
// [-1, 1] before quantization.
void write_wav(const std::string& path, const AudioClip& clip);

}  // namespace speechswin

#endif  // SPEECHSWIN_WAV_HPP_
