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

#include "speechswin/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "speechswin/errors.hpp"

namespace speechswin {
namespace {

using int128 = __int128;

int128 gcd128(int128 a, int128 b) {
  while (b != 0) {
    const int128 t = a % b;
    a = b;
    b = t;
  }
  return a < 0 ? -a : a;
}

}  // namespace

int64_t EvalReport::total() const {
  return std::accumulate(confusion.begin(), confusion.end(), int64_t{0});
}

EvalReport compute_metrics(const std::vector<int64_t>& confusion,
                           int64_t num_classes) {
  if (num_classes < 1 ||
      static_cast<int64_t>(confusion.size()) != num_classes * num_classes) {
    throw ShapeError("compute_metrics: confusion matrix of " +
                     std::to_string(confusion.size()) + " entries is not " +
                     std::to_string(num_classes) + "x" +
                     std::to_string(num_classes));
  }
  int64_t total = 0, trace = 0;
  for (int64_t c = 0; c < num_classes; ++c) {
    for (int64_t p = 0; p < num_classes; ++p) {
      const int64_t v = confusion[c * num_classes + p];
      if (v < 0) throw DataError("compute_metrics: negative count");
      total += v;
      if (c == p) trace += v;
    }
  }
  if (total == 0) throw DataError("compute_metrics: empty confusion matrix");

  EvalReport rep;
  rep.num_classes = num_classes;
  rep.confusion = confusion;
  rep.war = static_cast<double>(trace) / static_cast<double>(total);

  // Exact rational sum of per-class recalls: num/den.
  int128 num = 0, den = 1;
  int64_t supported = 0;
  for (int64_t c = 0; c < num_classes; ++c) {
    int64_t row = 0;
    for (int64_t p = 0; p < num_classes; ++p) row += confusion[c * num_classes + p];
    if (row == 0) continue;
    ++supported;
    num = num * row + static_cast<int128>(confusion[c * num_classes + c]) * den;
    den *= row;
    const int128 g = gcd128(num == 0 ? den : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  den *= supported;
  rep.uar = static_cast<double>(static_cast<long double>(num) /
                                static_cast<long double>(den));
  // A correctly rounded quotient of the reduced fraction: when every class
  // has equal support num/den reduces to trace/total, so uar == war exactly.
  const int128 g = gcd128(num == 0 ? den : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num <= INT64_MAX && den <= INT64_MAX) {
    rep.uar = static_cast<double>(static_cast<int64_t>(num)) /
              static_cast<double>(static_cast<int64_t>(den));
  }
  return rep;
}

std::string EvalReport::table(const std::vector<std::string>& labels) const {
  std::ostringstream os;
  size_t width = 8;
  for (const std::string& l : labels) width = std::max(width, l.size() + 2);
  os << std::setw(static_cast<int>(width)) << "truth\\pred";
  for (int64_t p = 0; p < num_classes; ++p) {
    os << std::setw(static_cast<int>(width))
       << (p < static_cast<int64_t>(labels.size()) ? labels[p]
                                                   : std::to_string(p));
  }
  os << '\n';
  for (int64_t c = 0; c < num_classes; ++c) {
    os << std::setw(static_cast<int>(width))
       << (c < static_cast<int64_t>(labels.size()) ? labels[c]
                                                   : std::to_string(c));
    for (int64_t p = 0; p < num_classes; ++p) {
      os << std::setw(static_cast<int>(width)) << at(c, p);
    }
    os << '\n';
  }
  os << "WAR " << std::setprecision(6) << std::fixed << war << "  UAR " << uar
     << '\n';
  return os.str();
}

}  // namespace speechswin
