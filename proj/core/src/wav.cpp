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

#include "speechswin/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "speechswin/errors.hpp"

namespace speechswin {
namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw DataError(path + ": " + what);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) fail(path, "not a RIFF file");
  read_u32(in);  // RIFF payload size; unused
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) fail(path, "not a WAVE file");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  std::vector<int16_t> pcm;
  bool have_data = false;

  while (in.read(tag, 4)) {
    const uint32_t size = read_u32(in);
    if (!in) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) fail(path, "malformed fmt chunk");
      format = read_u16(in);
      channels = read_u16(in);
      sample_rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      in.ignore(size - 16 + (size & 1));
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) fail(path, "data chunk before fmt chunk");
      if (format != 1) fail(path, "unsupported encoding (only PCM is supported)");
      if (channels != 1) fail(path, "unsupported channel count (mono required)");
      if (bits != 16) fail(path, "unsupported bit depth (16-bit required)");
      pcm.resize(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()),
              static_cast<std::streamsize>(size / 2 * 2));
      if (!in) fail(path, "truncated data chunk");
      if (size & 1) in.ignore(1);
      have_data = true;
    } else {
      in.ignore(size + (size & 1));
    }
  }
  if (!have_fmt || !have_data) fail(path, "missing fmt or data chunk");
  if (sample_rate == 0) fail(path, "zero sample rate");
  if (pcm.empty()) fail(path, "empty audio data");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(sample_rate);
  clip.samples.resize(pcm.size());
  for (size_t i = 0; i < pcm.size(); ++i) {
    // Little-endian int16 on all supported hosts.
    clip.samples[i] = static_cast<double>(pcm[i]) / 32768.0;
  }
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open file for writing");

  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_bytes = n * 2;
  const uint32_t sr = static_cast<uint32_t>(clip.sample_rate_hz);

  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);   // PCM
  write_u16(out, 1);   // mono
  write_u32(out, sr);
  write_u32(out, sr * 2);  // byte rate
  write_u16(out, 2);       // block align
  write_u16(out, 16);      // bits per sample
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    const double v = std::clamp(clip.samples[i], -1.0, 1.0);
    const double scaled = v * 32767.0;
    const int16_t q = static_cast<int16_t>(std::lrint(scaled));
    write_u16(out, static_cast<uint16_t>(q));
  }
  if (!out) fail(path, "write failed");
}

}  // namespace speechswin
