// Copyright 2026 The ckctx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ckctx/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ckctx/error.hpp"

namespace ckctx {

BiasNormProfile bias_norm_profile(const Matrix& bias_matrix, double threshold) {
  if (!(threshold >= 0.0)) {
    throw InvalidArgument("bias_norm_profile: threshold must be >= 0");
  }
  BiasNormProfile profile;
  profile.threshold = threshold;
  profile.sorted_norms.reserve(bias_matrix.cols());
  for (std::size_t c = 0; c < bias_matrix.cols(); ++c) {
    profile.sorted_norms.push_back(l2_norm(bias_matrix.col(c)));
  }
  std::sort(profile.sorted_norms.begin(), profile.sorted_norms.end(), std::greater<>());
  if (!profile.sorted_norms.empty()) {
    const auto above = std::count_if(profile.sorted_norms.begin(), profile.sorted_norms.end(),
                                     [&](double v) { return v > threshold; });
    profile.frac_above =
        static_cast<double>(above) / static_cast<double>(profile.sorted_norms.size());
  }
  return profile;
}

SimilarityProfile similarity_profile(const Matrix& context, const EmbeddingDictionary& dict) {
  if (context.rows() != dict.dim()) {
    throw DimensionError("similarity_profile: context has " + std::to_string(context.rows()) +
                         " rows, dictionary has d = " + std::to_string(dict.dim()));
  }
  const Matrix entries = transpose(dict.matrix);
  std::vector<double> entry_norms(entries.rows());  // squared
  for (std::size_t i = 0; i < entries.rows(); ++i) {
    const std::span<const double> e(&entries(i, 0), entries.cols());
    entry_norms[i] = dot(e, e);
  }

  SimilarityProfile profile;
  for (std::size_t c = 0; c < context.cols(); ++c) {
    const std::vector<double> token = context.col(c);
    const double token_norm = dot(token, token);
    double best = 0.0;
    if (token_norm > 0.0) {
      best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < entries.rows(); ++i) {
        if (entry_norms[i] == 0.0) continue;
        // sqrt of the product of squared norms keeps an exact match at exactly 1
        const double sim =
            dot(token, std::span<const double>(&entries(i, 0), entries.cols())) /
            std::sqrt(token_norm * entry_norms[i]);
        best = std::max(best, sim);
      }
      if (!std::isfinite(best)) best = 0.0;
      best = std::clamp(best, -1.0, 1.0);
    }
    profile.max_similarity.push_back(best);
  }
  if (!profile.max_similarity.empty()) {
    const auto [lo, hi] =
        std::minmax_element(profile.max_similarity.begin(), profile.max_similarity.end());
    profile.min = *lo;
    profile.max = *hi;
    double total = 0.0;
    for (double v : profile.max_similarity) total += v;
    profile.mean = total / static_cast<double>(profile.max_similarity.size());
  }
  return profile;
}

}  // namespace ckctx
