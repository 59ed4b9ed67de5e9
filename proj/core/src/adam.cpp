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

#include "speechswin/adam.hpp"

#include <cmath>

#include "speechswin/errors.hpp"

namespace speechswin {

template <typename T>
void adam_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state, const AdamHyper& hyper) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(params.size()) +
                     " parameters");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params.tensor(i).numel(), T(0));
      state.v[i].assign(params.tensor(i).numel(), T(0));
    }
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));

  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor<T>& p = params.tensor(i);
    const Tensor<T>& g = grads[i];
    if (g.shape() != p.shape()) {
      throw ShapeError("adam_step: gradient " + shape_str(g.shape()) +
                       " does not match parameter '" + params.name(i) + "' " +
                       shape_str(p.shape()));
    }
    std::vector<T> next(p.vec());
    std::vector<T>& m = state.m[i];
    std::vector<T>& v = state.v[i];
    const T* pg = g.data();
    for (int64_t j = 0; j < p.numel(); ++j) {
      const double gj = pg[j];
      const double mj = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      const double vj = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      next[j] = static_cast<T>(next[j] - hyper.lr * mhat /
                                             (std::sqrt(vhat) + hyper.eps));
    }
    params.set(i, Tensor<T>(p.shape(), std::move(next)));
  }
}

template void adam_step(ParamSet<float>&, const std::vector<Tensor<float>>&,
                        AdamState<float>&, const AdamHyper&);
template void adam_step(ParamSet<double>&, const std::vector<Tensor<double>>&,
                        AdamState<double>&, const AdamHyper&);

}  // namespace speechswin
