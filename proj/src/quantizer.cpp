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

#include "ckctx/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ckctx/error.hpp"
#include "ckctx/random.hpp"

namespace ckctx {

namespace {

// Points stored contiguously: row i of the result is column i of the dictionary.
Matrix points_of(const Matrix& dict) { return transpose(dict); }

double squared_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

// Nearest row of `centers` (k x d) to `point`; ties go to the lowest index.
std::size_t nearest_row(const Matrix& centers, const double* point, double& best) {
  best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    const double dist = squared_distance(&centers(c, 0), point, centers.cols());
    if (dist < best) {
      best = dist;
      arg = c;
    }
  }
  return arg;
}

// Assigns every point; returns the inertia and fills per-point distances.
double assign(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels,
              std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    labels[i] = nearest_row(centers, &points(i, 0), dist[i]);
    inertia += dist[i];
  }
  return inertia;
}

void check_k(std::size_t k, std::size_t m) {
  if (k < 1 || k > m) {
    throw InvalidArgument("invalid k = " + std::to_string(k) + ": must satisfy 1 <= k <= m = " +
                          std::to_string(m));
  }
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t m = points.rows();
  const std::size_t d = points.cols();
  Matrix centers(k, d);
  std::vector<bool> chosen(m, false);
  std::vector<double> dist(m, std::numeric_limits<double>::infinity());

  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        total += dist[i];
      }
      if (total > 0.0) {
        const double target = std::uniform_real_distribution<double>(0.0, total)(rng);
        double cumulative = 0.0;
        pick = m;
        for (std::size_t i = 0; i < m; ++i) {
          if (dist[i] <= 0.0) continue;
          cumulative += dist[i];
          pick = i;
          if (cumulative > target) break;
        }
      } else {
        // every remaining point coincides with a chosen center
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < m; ++i) {
          if (!chosen[i]) rest.push_back(i);
        }
        pick = rest[std::uniform_int_distribution<std::size_t>(0, rest.size() - 1)(rng)];
      }
    }
    chosen[pick] = true;
    std::copy_n(&points(pick, 0), d, &centers(c, 0));
    for (std::size_t i = 0; i < m; ++i) {
      dist[i] = std::min(dist[i], squared_distance(&points(i, 0), &centers(c, 0), d));
    }
  }
  return centers;
}

// Cluster means; empty clusters are reseeded with the points farthest from
// their current centers.
Matrix update_centers(const Matrix& points, const Matrix& old_centers,
                      const std::vector<std::size_t>& labels) {
  const std::size_t k = old_centers.rows();
  const std::size_t d = points.cols();
  Matrix centers(k, d);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const std::size_t c = labels[i];
    ++counts[c];
    for (std::size_t j = 0; j < d; ++j) {
      centers(c, j) += points(i, j);
    }
  }
  std::vector<double> far(points.rows(), 0.0);
  bool any_empty = false;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      any_empty = true;
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) {
      centers(c, j) /= static_cast<double>(counts[c]);
    }
  }
  if (!any_empty) {
    return centers;
  }
  for (std::size_t i = 0; i < points.rows(); ++i) {
    far[i] = squared_distance(&points(i, 0), &centers(labels[i], 0), d);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    const auto it = std::max_element(far.begin(), far.end());
    const auto idx = static_cast<std::size_t>(it - far.begin());
    std::copy_n(&points(idx, 0), d, &centers(c, 0));
    *it = -1.0;
  }
  return centers;
}

CompressedDictionary finish(const Matrix& points, Matrix centers_rows, QuantMethod method,
                            std::size_t k) {
  CompressedDictionary out;
  out.method = method;
  out.k = k;
  out.assignments.assign(points.rows(), 0);
  std::vector<double> dist(points.rows(), 0.0);
  out.inertia = assign(points, centers_rows, out.assignments, dist);
  out.centers = transpose(centers_rows);
  return out;
}

}  // namespace

EmbeddingDictionary::EmbeddingDictionary(Matrix m, std::string label)
    : matrix(std::move(m)), source_label(std::move(label)) {
  if (matrix.rows() < 1 || matrix.cols() < 2) {
    throw DimensionError("EmbeddingDictionary: need d >= 1 and m >= 2, got " +
                         std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()));
  }
}

std::string_view to_string(QuantMethod method) {
  return method == QuantMethod::KMeans ? "kmeans" : "random";
}

QuantMethod parse_quant_method(std::string_view text) {
  if (text == "kmeans") return QuantMethod::KMeans;
  if (text == "random") return QuantMethod::RandomSelection;
  throw InvalidArgument("unknown quantization method '" + std::string(text) + "'");
}

Matrix SparseLift::dense() const {
  Matrix out(m, row_of_col.size());
  for (std::size_t j = 0; j < row_of_col.size(); ++j) {
    out(row_of_col[j], j) = 1.0;
  }
  return out;
}

std::size_t ratio_to_k(double alpha, std::size_t d) {
  if (!(alpha > 0.0)) {
    throw InvalidArgument("alpha must be positive");
  }
  return static_cast<std::size_t>(std::llround(alpha * static_cast<double>(d)));
}

CompressedDictionary kmeans(const EmbeddingDictionary& dict, std::size_t k,
                            std::size_t max_iters, double tol, std::uint64_t seed,
                            std::vector<double>* inertia_trace) {
  const std::size_t m = dict.vocab_size();
  check_k(k, m);
  if (max_iters < 1) {
    throw InvalidArgument("kmeans: max_iters must be >= 1");
  }
  if (!(tol >= 0.0)) {
    throw InvalidArgument("kmeans: tol must be >= 0");
  }
  const Matrix points = points_of(dict.matrix);
  Rng rng(seed);
  Matrix centers = seed_plus_plus(points, k, rng);

  std::vector<std::size_t> labels(m, 0);
  std::vector<double> dist(m, 0.0);
  double inertia = assign(points, centers, labels, dist);
  if (inertia_trace != nullptr) {
    inertia_trace->assign(1, inertia);
  }

  bool converged = false;
  std::size_t iter = 0;
  while (iter < max_iters) {
    ++iter;
    centers = update_centers(points, centers, labels);
    const std::vector<std::size_t> previous = labels;
    const double previous_inertia = inertia;
    inertia = assign(points, centers, labels, dist);
    if (inertia_trace != nullptr) {
      inertia_trace->push_back(inertia);
    }
    if (labels == previous) {
      converged = true;
      break;
    }
    if (previous_inertia - inertia < tol) {
      break;
    }
  }

  CompressedDictionary out = finish(points, std::move(centers), QuantMethod::KMeans, k);
  out.iterations = iter;
  out.converged = converged;
  return out;
}

CompressedDictionary random_select(const EmbeddingDictionary& dict, std::size_t k,
                                   std::uint64_t seed) {
  const std::size_t m = dict.vocab_size();
  check_k(k, m);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(k);

  const Matrix points = points_of(dict.matrix);
  Matrix centers(k, dict.dim());
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(&points(order[c], 0), dict.dim(), &centers(c, 0));
  }
  CompressedDictionary out = finish(points, std::move(centers), QuantMethod::RandomSelection, k);
  out.selected = std::move(order);
  out.converged = true;
  return out;
}

std::size_t nearest_column(const Matrix& centers, std::span<const double> point,
                           double* distance_sq) {
  if (centers.rows() != point.size()) {
    throw DimensionError("nearest_column: dimension mismatch");
  }
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t c = 0; c < centers.cols(); ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < centers.rows(); ++r) {
      const double diff = centers(r, c) - point[r];
      acc += diff * diff;
    }
    if (acc < best) {
      best = acc;
      arg = c;
    }
  }
  if (distance_sq != nullptr) {
    *distance_sq = best;
  }
  return arg;
}

SparseLift build_sparse_lift(const EmbeddingDictionary& dict, const Matrix& base) {
  if (dict.dim() != base.rows()) {
    throw DimensionError("build_sparse_lift: dictionary has d = " + std::to_string(dict.dim()) +
                         " but base has " + std::to_string(base.rows()) + " rows");
  }
  const Matrix points = points_of(dict.matrix);
  SparseLift lift;
  lift.m = dict.vocab_size();
  lift.row_of_col.resize(base.cols());
  for (std::size_t j = 0; j < base.cols(); ++j) {
    const std::vector<double> target = base.col(j);
    double best = 0.0;
    lift.row_of_col[j] = nearest_row(points, target.data(), best);
  }
  return lift;
}

double lift_approximation_error(const EmbeddingDictionary& dict, const Matrix& base,
                                const Matrix& coeffs) {
  if (base.cols() != coeffs.rows()) {
    throw DimensionError("lift_approximation_error: base has " + std::to_string(base.cols()) +
                         " columns but coefficients have " + std::to_string(coeffs.rows()) +
                         " rows");
  }
  const SparseLift lift = build_sparse_lift(dict, base);
  Matrix lifted(base.rows(), base.cols());
  for (std::size_t j = 0; j < base.cols(); ++j) {
    lifted.set_col(j, dict.matrix.col(lift.row_of_col[j]));
  }
  return frobenius_norm(subtract(matmul(lifted, coeffs), matmul(base, coeffs)));
}

EmbeddingDictionary synthetic_dictionary(std::size_t d, std::size_t m, std::size_t clusters,
                                         double spread, std::uint64_t seed) {
  Rng rng(seed);
  if (clusters == 0) {
    return EmbeddingDictionary(random_normal(d, m, rng), "synthetic:gaussian");
  }
  const Matrix anchors = random_normal(d, clusters, rng);
  std::normal_distribution<double> noise(0.0, spread);
  Matrix out(d, m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t a = j % clusters;
    for (std::size_t r = 0; r < d; ++r) {
      out(r, j) = anchors(r, a) + noise(rng);
    }
  }
  return EmbeddingDictionary(std::move(out),
                             "synthetic:clusters=" + std::to_string(clusters));
}

}  // namespace ckctx
