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

#ifndef SPEECHSWIN_ADAM_HPP_
#define SPEECHSWIN_ADAM_HPP_

#include <cstdint>
#include <vector>

#include "speechswin/param_set.hpp"
#include "speechswin/tensor.hpp"

namespace speechswin {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates, one buffer per parameter in ParamSet order.
template <typename T>
struct AdamState {
  int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// Standard bias-corrected update. Each parameter is replaced by a fresh
// tensor (tensors stay immutable); the state is advanced in place. `grads`
// must align with the ParamSet order.
template <typename T>
void adam_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, const AdamHyper& hyper);

extern template void adam_step(ParamSet<float>&, const std::vector<Tensor<float>>&,
                               AdamState<float>&, const AdamHyper&);
extern template void adam_step(ParamSet<double>&,
                               const std::vector<Tensor<double>>&,
                               AdamState<double>&, const AdamHyper&);

}  // namespace speechswin

#endif  // SPEECHSWIN_ADAM_HPP_
