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

#ifndef CKCTX_RANDOM_HPP
#define CKCTX_RANDOM_HPP

#include <cstdint>
#include <random>

#include "ckctx/linalg.hpp"

namespace ckctx {

using Rng = std::mt19937_64;

/// Independent sub-stream seed (splitmix64 finalizer over seed and stream id).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Fills a rows x cols matrix row-major with i.i.d. Normal(mean, stddev).
inline Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double mean = 0.0,
                            double stddev = 1.0) {
  std::normal_distribution<double> dist(mean, stddev);
  Matrix out(rows, cols);
  for (double& v : out.data()) {
    v = dist(rng);
  }
  return out;
}

}  // namespace ckctx

#endif  // CKCTX_RANDOM_HPP
