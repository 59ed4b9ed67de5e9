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

#ifndef SPEECHSWIN_METRICS_HPP_
#define SPEECHSWIN_METRICS_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace speechswin {

// k x k confusion matrix (rows = truth, cols = prediction) with weighted and
// unweighted average recall. WAR is overall accuracy; UAR is the mean of
// per-class recalls over classes with nonzero support. UAR is accumulated as
// an exact rational so that a class-balanced matrix yields WAR == UAR to the
// last bit.
struct EvalReport {
  int64_t num_classes = 0;
  std::vector<int64_t> confusion;  // row-major k x k
  double war = 0.0;
  double uar = 0.0;

  int64_t at(int64_t truth, int64_t pred) const {
    return confusion[truth * num_classes + pred];
  }
  int64_t total() const;

  std::string table(const std::vector<std::string>& labels) const;
};

EvalReport compute_metrics(const std::vector<int64_t>& confusion,
                           int64_t num_classes);

}  // namespace speechswin

#endif  // SPEECHSWIN_METRICS_HPP_
