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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ckctx/error.hpp"
#include "ckctx/quantizer.hpp"
#include "ckctx/random.hpp"
#include "oracles.hpp"

namespace ckctx {
namespace {

EmbeddingDictionary four_points() {
  // columns (0,0), (0,1), (10,0), (10,1)
  return EmbeddingDictionary(Matrix::from_rows({{0, 0, 10, 10}, {0, 1, 0, 1}}), "four");
}

EmbeddingDictionary gaussian_dict(std::size_t d, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  return EmbeddingDictionary(random_normal(d, m, rng), "gaussian");
}

double inertia_of(const EmbeddingDictionary& dict, const CompressedDictionary& q) {
  double total = 0.0;
  for (std::size_t j = 0; j < dict.vocab_size(); ++j) {
    for (std::size_t r = 0; r < dict.dim(); ++r) {
      const double diff = dict.matrix(r, j) - q.centers(r, q.assignments[j]);
      total += diff * diff;
    }
  }
  return total;
}

TEST(Kmeans, FourPointExampleMatchesExhaustiveOracle) {
  const EmbeddingDictionary dict = four_points();
  const double best = oracle::exhaustive_inertia(dict.matrix, 2);
  EXPECT_DOUBLE_EQ(best, 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CompressedDictionary q = kmeans(dict, 2, 100, 0.0, seed);
    EXPECT_NEAR(q.inertia, best, 1e-12);
    std::vector<std::pair<double, double>> centers{{q.centers(0, 0), q.centers(1, 0)},
                                                   {q.centers(0, 1), q.centers(1, 1)}};
    std::sort(centers.begin(), centers.end());
    EXPECT_NEAR(centers[0].first, 0.0, 1e-12);
    EXPECT_NEAR(centers[0].second, 0.5, 1e-12);
    EXPECT_NEAR(centers[1].first, 10.0, 1e-12);
    EXPECT_NEAR(centers[1].second, 0.5, 1e-12);
  }
}

TEST(Kmeans, ConvergesToALloydFixedPointNoBetterThanTheOptimum) {
  // Lloyd's method is local, so the exhaustive optimum is only a lower bound
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EmbeddingDictionary dict = gaussian_dict(2, 7, 100 + seed);
    const double best = oracle::exhaustive_inertia(dict.matrix, 2);
    for (std::uint64_t restart = 0; restart < 8; ++restart) {
      const CompressedDictionary q = kmeans(dict, 2, 100, 0.0, restart);
      ASSERT_TRUE(q.converged);
      EXPECT_GE(q.inertia, best - 1e-12);
      EXPECT_NEAR(q.inertia, inertia_of(dict, q), 1e-12);
      for (std::size_t j = 0; j < dict.vocab_size(); ++j) {
        EXPECT_EQ(nearest_column(q.centers, dict.matrix.col(j)), q.assignments[j]);
      }
    }
  }
}

TEST(Kmeans, InertiaNonIncreasingPerIteration) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EmbeddingDictionary dict = synthetic_dictionary(6, 120, 5, 0.8, seed);
    std::vector<double> trace;
    const CompressedDictionary q = kmeans(dict, 7, 100, 0.0, seed, &trace);
    ASSERT_FALSE(trace.empty());
    for (std::size_t i = 1; i < trace.size(); ++i) {
      EXPECT_LE(trace[i], trace[i - 1] * (1.0 + 1e-12)) << "seed " << seed << " iter " << i;
    }
    EXPECT_NEAR(trace.back(), q.inertia, 1e-9 * (1.0 + q.inertia));
  }
}

TEST(Kmeans, KEqualsMGivesZeroInertiaAndAPermutation) {
  const EmbeddingDictionary dict = gaussian_dict(3, 9, 4);
  const CompressedDictionary q = kmeans(dict, 9, 100, 0.0, 1);
  EXPECT_EQ(q.inertia, 0.0);
  std::set<std::size_t> seen(q.assignments.begin(), q.assignments.end());
  EXPECT_EQ(seen.size(), 9u);
  for (std::size_t j = 0; j < 9; ++j) {
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_EQ(q.centers(r, q.assignments[j]), dict.matrix(r, j));
    }
  }
}

TEST(Kmeans, ConvergedCentersAreClusterMeans) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EmbeddingDictionary dict = synthetic_dictionary(4, 80, 4, 0.5, seed);
    const CompressedDictionary q = kmeans(dict, 5, 500, 0.0, seed);
    ASSERT_TRUE(q.converged);
    for (std::size_t c = 0; c < q.k; ++c) {
      std::vector<double> mean(dict.dim(), 0.0);
      std::size_t count = 0;
      for (std::size_t j = 0; j < dict.vocab_size(); ++j) {
        if (q.assignments[j] != c) continue;
        ++count;
        for (std::size_t r = 0; r < dict.dim(); ++r) mean[r] += dict.matrix(r, j);
      }
      ASSERT_GT(count, 0u) << "empty cluster " << c;
      for (std::size_t r = 0; r < dict.dim(); ++r) {
        EXPECT_NEAR(q.centers(r, c), mean[r] / static_cast<double>(count), 1e-10);
      }
    }
  }
}

TEST(Kmeans, AssignmentsAreNearestCentersAndInertiaIsConsistent) {
  const EmbeddingDictionary dict = synthetic_dictionary(5, 60, 3, 1.0, 8);
  const CompressedDictionary q = kmeans(dict, 4, 100, 0.0, 8);
  for (std::size_t j = 0; j < dict.vocab_size(); ++j) {
    EXPECT_EQ(q.assignments[j], nearest_column(q.centers, dict.matrix.col(j)));
  }
  EXPECT_NEAR(q.inertia, inertia_of(dict, q), 1e-9);
}

TEST(Kmeans, DuplicateColumnsStillFillEveryCluster) {
  // five copies of one point and one outlier; k = 3 forces a repair
  const EmbeddingDictionary dict(Matrix::from_rows({{0, 0, 0, 0, 0, 9}, {1, 1, 1, 1, 1, 9}}));
  const CompressedDictionary q = kmeans(dict, 3, 50, 0.0, 3);
  EXPECT_EQ(q.k, 3u);
  EXPECT_TRUE(all_finite(q.centers));
}

TEST(Kmeans, BeatsRandomSelectionMostOfTheTime) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EmbeddingDictionary dict = gaussian_dict(8, 64, 200 + seed);
    if (kmeans(dict, 3, 100, 0.0, seed).inertia <= random_select(dict, 3, seed).inertia) ++wins;
  }
  EXPECT_GE(wins, 18);
}

TEST(Kmeans, IsDeterministic) {
  const EmbeddingDictionary dict = synthetic_dictionary(6, 100, 6, 0.5, 2);
  EXPECT_EQ(kmeans(dict, 8, 100, 0.0, 42), kmeans(dict, 8, 100, 0.0, 42));
}

TEST(Kmeans, RejectsBadK) {
  const EmbeddingDictionary dict = four_points();
  EXPECT_THROW(kmeans(dict, 0, 10, 0.0, 1), InvalidArgument);
  EXPECT_THROW(kmeans(dict, 5, 10, 0.0, 1), InvalidArgument);
  EXPECT_THROW(random_select(dict, 5, 1), InvalidArgument);
}

TEST(RandomSelect, CentersAreDistinctSourceColumns) {
  const EmbeddingDictionary dict = gaussian_dict(4, 30, 5);
  const CompressedDictionary q = random_select(dict, 10, 7);
  ASSERT_EQ(q.selected.size(), 10u);
  EXPECT_EQ(std::set<std::size_t>(q.selected.begin(), q.selected.end()).size(), 10u);
  for (std::size_t c = 0; c < 10; ++c) {
    EXPECT_EQ(q.centers.col(c), dict.matrix.col(q.selected[c]));
  }
  EXPECT_NEAR(q.inertia, inertia_of(dict, q), 1e-9);
}

TEST(RandomSelect, KEqualsMAndKEqualsOne) {
  const EmbeddingDictionary dict = gaussian_dict(3, 6, 9);
  EXPECT_EQ(random_select(dict, 6, 1).inertia, 0.0);
  const CompressedDictionary one = random_select(dict, 1, 1);
  for (std::size_t a : one.assignments) EXPECT_EQ(a, 0u);
}

TEST(RandomSelect, IsDeterministic) {
  const EmbeddingDictionary dict = gaussian_dict(3, 40, 10);
  EXPECT_EQ(random_select(dict, 5, 3), random_select(dict, 5, 3));
}

TEST(RatioToK, RoundsAlphaTimesD) {
  EXPECT_EQ(ratio_to_k(0.375, 512), 192u);
  EXPECT_EQ(ratio_to_k(0.375, 64), 24u);
  EXPECT_EQ(ratio_to_k(0.5, 3), 2u);  // 1.5 rounds away from zero
  EXPECT_THROW(ratio_to_k(0.0, 8), InvalidArgument);
}

TEST(SparseLift, PicksTheNamedColumns) {
  const EmbeddingDictionary dict = gaussian_dict(4, 10, 11);
  Matrix base(4, 2);
  base.set_col(0, dict.matrix.col(3));
  base.set_col(1, dict.matrix.col(7));
  const SparseLift lift = build_sparse_lift(dict, base);
  EXPECT_EQ(lift.row_of_col, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(matmul(dict.matrix, lift.dense()), base);
}

TEST(SparseLift, OneNonzeroPerColumn) {
  const EmbeddingDictionary dict = gaussian_dict(5, 50, 12);
  const CompressedDictionary q = kmeans(dict, 6, 100, 0.0, 1);
  const SparseLift lift = build_sparse_lift(dict, q.centers);
  EXPECT_EQ(lift.nnz(), q.k);
  const Matrix e = lift.dense();
  for (std::size_t c = 0; c < e.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < e.rows(); ++r) {
      EXPECT_TRUE(e(r, c) == 0.0 || e(r, c) == 1.0);
      sum += e(r, c);
    }
    EXPECT_EQ(sum, 1.0);
  }
}

TEST(SparseLift, ExactForRandomSelection) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EmbeddingDictionary dict = gaussian_dict(6, 40, 300 + seed);
    const CompressedDictionary q = random_select(dict, 8, seed);
    const SparseLift lift = build_sparse_lift(dict, q.centers);
    EXPECT_EQ(matmul(dict.matrix, lift.dense()), q.centers);
    Rng rng(seed);
    EXPECT_EQ(lift_approximation_error(dict, q.centers, random_normal(8, 3, rng)), 0.0);
  }
}

TEST(SparseLift, InexactForKmeansCenters) {
  const EmbeddingDictionary dict = four_points();
  const CompressedDictionary q = kmeans(dict, 2, 100, 0.0, 1);
  // each center (x, 0.5) snaps to (x, 0) by the lowest-index tie rule: error 0.5 per center
  const double err = lift_approximation_error(dict, q.centers, Matrix::identity(2));
  EXPECT_NEAR(err, std::sqrt(0.5), 1e-12);
  EXPECT_EQ(lift_approximation_error(dict, q.centers, Matrix(2, 2)), 0.0);
}

TEST(SparseLift, RejectsDimensionMismatch) {
  EXPECT_THROW(build_sparse_lift(four_points(), Matrix(3, 1)), DimensionError);
}

TEST(EmbeddingDictionary, RequiresTwoColumns) {
  EXPECT_THROW(EmbeddingDictionary(Matrix(3, 1)), DimensionError);
}

TEST(SyntheticDictionary, IsSeededAndShaped) {
  const EmbeddingDictionary a = synthetic_dictionary(5, 20, 4, 0.2, 3);
  EXPECT_EQ(a.dim(), 5u);
  EXPECT_EQ(a.vocab_size(), 20u);
  EXPECT_EQ(a.matrix, synthetic_dictionary(5, 20, 4, 0.2, 3).matrix);
  EXPECT_NE(a.matrix, synthetic_dictionary(5, 20, 4, 0.2, 4).matrix);
}

}  // namespace
}  // namespace ckctx
