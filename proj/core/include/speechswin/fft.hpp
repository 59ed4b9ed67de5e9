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

#ifndef SPEECHSWIN_FFT_HPP_
#define SPEECHSWIN_FFT_HPP_

#include <complex>
#include <span>
#include <vector>

namespace speechswin {

// In-place iterative radix-2 Cooley-Tukey DFT. Length must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& x);

// Real-input DFT of `signal` zero-padded to n_fft; returns the n_fft/2 + 1
// non-negative-frequency bins.
std::vector<std::complex<double>> rfft(std::span<const double> signal, int n_fft);

}  // namespace speechswin

#endif  // SPEECHSWIN_FFT_HPP_
