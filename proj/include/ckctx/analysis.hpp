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

#ifndef CKCTX_ANALYSIS_HPP
#define CKCTX_ANALYSIS_HPP

#include <vector>

#include "ckctx/linalg.hpp"
#include "ckctx/quantizer.hpp"

namespace ckctx {

inline constexpr double kDefaultNormThreshold = 1e-4;

struct BiasNormProfile {
  std::vector<double> sorted_norms;  // descending
  double threshold = kDefaultNormThreshold;
  double frac_above = 0.0;
};

/// Column L2 norms of a bias matrix, largest first.
BiasNormProfile bias_norm_profile(const Matrix& bias_matrix,
                                  double threshold = kDefaultNormThreshold);

struct SimilarityProfile {
  std::vector<double> max_similarity;  // per context column
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

/// Best cosine similarity of each context column against the full dictionary.
/// Zero-norm context columns score 0.
SimilarityProfile similarity_profile(const Matrix& context, const EmbeddingDictionary& dict);

}  // namespace ckctx

#endif  // CKCTX_ANALYSIS_HPP
