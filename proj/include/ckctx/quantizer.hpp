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

#ifndef CKCTX_QUANTIZER_HPP
#define CKCTX_QUANTIZER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ckctx/linalg.hpp"

namespace ckctx {

/// Pretrained token embeddings, one d-dimensional column per vocabulary entry.
struct EmbeddingDictionary {
  Matrix matrix;  // d x m
  std::string source_label;

  EmbeddingDictionary(Matrix m, std::string label = {});

  std::size_t dim() const { return matrix.rows(); }
  std::size_t vocab_size() const { return matrix.cols(); }
};

enum class QuantMethod { KMeans, RandomSelection };

std::string_view to_string(QuantMethod method);
/// Accepts "kmeans" and "random".
QuantMethod parse_quant_method(std::string_view text);

struct CompressedDictionary {
  Matrix centers;                        // d x k
  std::vector<std::size_t> assignments;  // zero-based center index per source column
  double inertia = 0.0;
  QuantMethod method = QuantMethod::KMeans;
  double alpha = 0.0;  // 0 when k was given directly
  std::size_t k = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::size_t> selected;  // source column per center (RandomSelection only)

  bool operator==(const CompressedDictionary&) const = default;
};

/// Zero-one m x k operator stored as the row index of the single 1 in each column.
struct SparseLift {
  std::size_t m = 0;
  std::vector<std::size_t> row_of_col;

  std::size_t k() const { return row_of_col.size(); }
  std::size_t nnz() const { return row_of_col.size(); }
  Matrix dense() const;
};

/// round(alpha * d), half away from zero.
std::size_t ratio_to_k(double alpha, std::size_t d);

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments are stable
/// (converged), when the inertia improvement drops below tol, or after max_iters.
/// If inertia_trace is given it receives the post-assignment inertia of every
/// iteration, starting with the seeding assignment.
CompressedDictionary kmeans(const EmbeddingDictionary& dict, std::size_t k,
                            std::size_t max_iters, double tol, std::uint64_t seed,
                            std::vector<double>* inertia_trace = nullptr);

/// k distinct source columns drawn without replacement.
CompressedDictionary random_select(const EmbeddingDictionary& dict, std::size_t k,
                                   std::uint64_t seed);

/// Nearest source column (squared Euclidean, lowest index on ties) per base column.
SparseLift build_sparse_lift(const EmbeddingDictionary& dict, const Matrix& base);

/// ||D_pre E A - base A||_F with E = build_sparse_lift(dict, base).
double lift_approximation_error(const EmbeddingDictionary& dict, const Matrix& base,
                                const Matrix& coeffs);

/// Seeded stand-in for a pretrained embedding table. With clusters > 0 the
/// columns scatter (stddev `spread`) around that many N(0, 1) anchors assigned
/// round-robin; with clusters == 0 every entry is N(0, 1).
EmbeddingDictionary synthetic_dictionary(std::size_t d, std::size_t m, std::size_t clusters,
                                         double spread, std::uint64_t seed);

/// Index of the nearest column of `centers` to `point` (lowest index on ties).
std::size_t nearest_column(const Matrix& centers, std::span<const double> point,
                           double* distance_sq = nullptr);

}  // namespace ckctx

#endif  // CKCTX_QUANTIZER_HPP
