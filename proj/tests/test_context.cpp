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

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "ckctx/context.hpp"
#include "ckctx/error.hpp"
#include "ckctx/random.hpp"
#include "oracles.hpp"

namespace ckctx {
namespace {

using Dims = std::vector<std::pair<std::size_t, std::size_t>>;

std::size_t power(std::size_t s, std::size_t n) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < n; ++i) out *= s;
  return out;
}

// Written from the rule: n1 = floor(log_s d) by repeated multiplication; s in the
// first n1 slots, the ceiling of what is left next, then ones.
Dims reference_dims(std::size_t d, std::size_t k, std::size_t s) {
  auto depth = [s](std::size_t n) {
    std::size_t e = 0;
    while (power(s, e + 1) <= n) ++e;
    return e;
  };
  const std::size_t n1 = depth(d);
  const std::size_t n2 = depth(k);
  const std::size_t len = std::max(n1, n2) + 1;
  Dims dims(len, {1, 1});
  for (std::size_t i = 0; i < len; ++i) {
    if (i < n1) dims[i].first = s;
    if (i == n1) dims[i].first = (d + power(s, n1) - 1) / power(s, n1);
    if (i < n2) dims[i].second = s;
    if (i == n2) dims[i].second = (k + power(s, n2) - 1) / power(s, n2);
  }
  return dims;
}

std::vector<Matrix> random_factors(const SplitPlan& plan, Rng& rng) {
  std::vector<Matrix> out;
  for (const auto& [r, c] : plan.dims) out.push_back(random_normal(r, c, rng));
  return out;
}

TEST(PlanSplit, HeadlineSizesAtS2) {
  const SplitPlan plan = plan_split(512, 192, 2);
  Dims expected(8, {2, 2});
  expected.push_back({2, 1});
  expected.push_back({1, 1});
  EXPECT_EQ(plan.dims, expected);
  EXPECT_EQ(plan.param_count(), 35u);
  EXPECT_EQ(plan.d_tilde, 512u);
  EXPECT_EQ(plan.k_tilde, 256u);
}

TEST(PlanSplit, HeadlineSizesAtS4) {
  const SplitPlan plan = plan_split(512, 192, 4);
  const Dims expected{{4, 4}, {4, 4}, {4, 4}, {4, 3}, {2, 1}};
  EXPECT_EQ(plan.dims, expected);
  EXPECT_EQ(plan.param_count(), 62u);
}

TEST(PlanSplit, ExactPowerHasUnitCeilingSlot) {
  // floor(log_2 8) = 3 factors of 2, then the ceiling slot ceil(8 / 8) = 1
  const SplitPlan plan = plan_split(8, 8, 2);
  const Dims expected{{2, 2}, {2, 2}, {2, 2}, {1, 1}};
  EXPECT_EQ(plan.dims, expected);
  EXPECT_EQ(plan.d_tilde, 8u);
  EXPECT_EQ(plan.k_tilde, 8u);
  EXPECT_EQ(plan.param_count(), 13u);
}

TEST(PlanSplit, MatchesReferenceRuleOnSweep) {
  for (std::size_t s = 2; s <= 4; ++s) {
    for (std::size_t d = 1; d <= 64; ++d) {
      for (std::size_t k = 1; k <= 64; ++k) {
        ASSERT_EQ(plan_split(d, k, s).dims, reference_dims(d, k, s))
            << "d=" << d << " k=" << k << " s=" << s;
      }
    }
  }
}

TEST(PlanSplit, PaddingBoundsHold) {
  for (std::size_t s = 2; s <= 8; ++s) {
    for (std::size_t d = 1; d <= 200; ++d) {
      for (std::size_t k = 1; k <= 200; k += 3) {
        const SplitPlan p = plan_split(d, k, s);
        ASSERT_GE(p.d_tilde, d);
        ASSERT_LT(p.d_tilde, d * s);
        ASSERT_GE(p.k_tilde, k);
        ASSERT_LT(p.k_tilde, k * s);
        ASSERT_EQ(p.dims.size(), std::max(p.n1, p.n2) + 1);
        std::size_t rows = 1;
        std::size_t cols = 1;
        for (const auto& [r, c] : p.dims) {
          ASSERT_GE(r, 1u);
          ASSERT_GE(c, 1u);
          rows *= r;
          cols *= c;
        }
        ASSERT_EQ(rows, p.d_tilde);
        ASSERT_EQ(cols, p.k_tilde);
      }
    }
  }
}

TEST(PlanSplit, PowersOfSHaveNoPadding) {
  for (std::size_t s = 2; s <= 5; ++s) {
    for (std::size_t a = 0; power(s, a) <= 1024; ++a) {
      for (std::size_t b = 0; power(s, b) <= 1024; ++b) {
        const SplitPlan p = plan_split(power(s, a), power(s, b), s);
        EXPECT_EQ(p.d_tilde, power(s, a));
        EXPECT_EQ(p.k_tilde, power(s, b));
        // only the ceiling slot may be 1 x 1 beyond the s-sized factors
        for (std::size_t i = 0; i < p.dims.size(); ++i) {
          if (i < std::max(a, b)) {
            EXPECT_TRUE(p.dims[i].first == s || p.dims[i].second == s);
          }
        }
      }
    }
  }
}

TEST(PlanSplit, RejectsSmallS) {
  EXPECT_THROW(plan_split(8, 8, 1), InvalidArgument);
  EXPECT_THROW(plan_split(8, 8, 0), InvalidArgument);
}

TEST(IntegerLog, IsExactAtPowerBoundaries) {
  EXPECT_EQ(integer_log(1, 2), 0u);
  EXPECT_EQ(integer_log(7, 2), 2u);
  EXPECT_EQ(integer_log(8, 2), 3u);
  EXPECT_EQ(integer_log(243, 3), 5u);
  EXPECT_EQ(integer_log(242, 3), 4u);
}

TEST(AssembleBias, ScalarFactorNormalizesToSign) {
  KroneckerBias bias{plan_split(1, 1, 2), {Matrix(1, 1, 5.0)}, NormMode::L1};
  EXPECT_EQ(assemble_bias(bias), Matrix(1, 1, 1.0));
  bias.submatrices[0](0, 0) = -3.0;
  EXPECT_EQ(assemble_bias(bias), Matrix(1, 1, -1.0));
}

TEST(AssembleBias, ZeroFactorsWithoutNorm) {
  const SplitPlan plan = plan_split(6, 3, 2);
  KroneckerBias bias{plan, {}, NormMode::None};
  for (const auto& [r, c] : plan.dims) bias.submatrices.emplace_back(r, c);
  EXPECT_EQ(assemble_bias(bias), Matrix(6, 3));
}

TEST(AssembleBias, BlockDiagonalLiteral) {
  const SplitPlan plan = plan_split(4, 4, 2);
  KroneckerBias bias{plan,
                     {Matrix::identity(2), Matrix::from_rows({{1, 2}, {3, 4}}), Matrix(1, 1, 1.0)},
                     NormMode::None};
  const Matrix expected =
      Matrix::from_rows({{1, 2, 0, 0}, {3, 4, 0, 0}, {0, 0, 1, 2}, {0, 0, 3, 4}});
  EXPECT_EQ(assemble_bias(bias), expected);
}

TEST(AssembleBias, MatchesOracleWithNormalization) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + rng() % 20;
    const std::size_t k = 1 + rng() % 12;
    const SplitPlan plan = plan_split(d, k, 2 + rng() % 2);
    for (NormMode mode : {NormMode::L1, NormMode::L2}) {
      const KroneckerBias bias{plan, random_factors(plan, rng), mode};
      std::vector<Matrix> normed;
      for (const Matrix& m : bias.submatrices) {
        normed.push_back(oracle::normalize(m, mode == NormMode::L1 ? 1 : 2));
      }
      const Matrix full = oracle::kron_chain(normed);
      const Matrix got = assemble_bias(bias);
      ASSERT_EQ(got.rows(), d);
      ASSERT_EQ(got.cols(), k);
      for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < k; ++c) EXPECT_NEAR(got(r, c), full(r, c), 1e-15);
      }
    }
  }
}

TEST(AssembleBias, L1EntriesBoundedByOne) {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const SplitPlan plan = plan_split(1 + rng() % 40, 1 + rng() % 40, 2 + rng() % 3);
    KroneckerBias bias{plan, random_factors(plan, rng), NormMode::L1};
    // uncropped: ask for the padded shape
    bias.plan.d = plan.d_tilde;
    bias.plan.k = plan.k_tilde;
    const Matrix full = assemble_bias(bias);
    double mass = 0.0;
    for (double v : full.data()) {
      EXPECT_LE(std::abs(v), 1.0);
      mass += std::abs(v);
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);  // L1 mass is multiplicative under kron
  }
}

TEST(AssembleBias, ZeroFactorWithNormThrows) {
  const SplitPlan plan = plan_split(4, 2, 2);
  KroneckerBias bias{plan, {}, NormMode::L1};
  for (const auto& [r, c] : plan.dims) bias.submatrices.emplace_back(r, c, 1.0);
  bias.submatrices[1] = Matrix(plan.dims[1].first, plan.dims[1].second);
  EXPECT_THROW(assemble_bias(bias), ZeroMatrixError);
}

TEST(AssembleBias, ShapeMismatchThrows) {
  KroneckerBias bias{plan_split(4, 4, 2), {Matrix(2, 2, 1.0)}, NormMode::None};
  EXPECT_THROW(assemble_bias(bias), DimensionError);
}

TEST(AssembleDictionary, AbsentBiasIsIdentityAndCancellationIsZero) {
  Rng rng(23);
  const Matrix centers = random_normal(5, 3, rng);
  EXPECT_EQ(assemble_dictionary(centers, Matrix()), centers);
  EXPECT_EQ(assemble_dictionary(centers, scale(centers, -1.0)), Matrix(5, 3));
  const Matrix bias = random_normal(5, 3, rng);
  const Matrix sum = assemble_dictionary(centers, bias);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(sum(r, c), centers(r, c) + bias(r, c));
  }
  EXPECT_THROW(assemble_dictionary(centers, Matrix(5, 2)), DimensionError);
}

TEST(GenerateContext, OneHotSelectsAndZeroVanishes) {
  Rng rng(24);
  const Matrix base = random_normal(8, 3, rng);
  Matrix coeffs(3, 2);
  coeffs(0, 0) = 1.0;
  coeffs(2, 1) = 1.0;
  const Matrix ctx = generate_context(base, coeffs);
  EXPECT_EQ(ctx.col(0), base.col(0));
  EXPECT_EQ(ctx.col(1), base.col(2));
  EXPECT_EQ(generate_context(base, Matrix(3, 2)), Matrix(8, 2));
  const Matrix a = random_normal(3, 2, rng);
  EXPECT_LE(max_abs_diff(generate_context(base, a), oracle::matmul(base, a)), 1e-14);
  EXPECT_THROW(generate_context(base, Matrix(2, 2)), DimensionError);
}

TEST(GenerateContext, NoBiasColumnsStayInCenterSpan) {
  Rng rng(25);
  const Matrix centers = random_normal(16, 5, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix ctx = generate_context(assemble_dictionary(centers, Matrix()),
                                        random_normal(5, 4, rng));
    for (std::size_t c = 0; c < ctx.cols(); ++c) {
      EXPECT_LE(span_residual(centers, ctx.col(c)), 1e-10);
    }
  }
}

TEST(CountParams, HeadlineDefaults) {
  const ParamReport r = count_params(512, 16, 0.375, 2);
  EXPECT_EQ(r.k, 192u);
  EXPECT_EQ(r.coop_params, 8192u);
  EXPECT_EQ(r.ckcoop_coeff_params, 3072u);
  EXPECT_EQ(r.ckcoop_bias_params, 35u);
  EXPECT_EQ(r.ckcoop_total, 3107u);
  EXPECT_NEAR(r.reduction_pct, 62.07, 0.01);
  // the closed form lands on 3106.17, one below the enumeration
  EXPECT_EQ(std::llround(r.closed_form_total), 3106);
  EXPECT_TRUE(r.closed_form_mismatch);
}

TEST(CountParams, SmallEnumeration) {
  // plan_split(8, 4, 2) = (2,2), (2,2), (2,1), (1,1)
  const ParamReport r = count_params(8, 2, 0.5, 2);
  EXPECT_EQ(r.coop_params, 16u);
  EXPECT_EQ(r.ckcoop_coeff_params, 8u);
  EXPECT_EQ(r.ckcoop_bias_params, 11u);
  EXPECT_EQ(r.ckcoop_total, 19u);
}

TEST(CountParams, SingleFactorCollapse) {
  // s = d: one d x d factor plus the unit ceiling slot
  const ParamReport r = count_params(4, 3, 1.0, 4);
  EXPECT_EQ(r.ckcoop_bias_params, 4u * 4u + 1u);
  EXPECT_EQ(r.ckcoop_total, 4u * 3u + 4u * 4u + 1u);
}

TEST(CountParams, InvariantsAndClosedFormOnPowers) {
  for (std::size_t s = 2; s <= 4; ++s) {
    for (std::size_t e = 1; power(s, e) <= 1024; ++e) {
      const std::size_t d = power(s, e);
      for (std::size_t f = 0; f <= e; ++f) {
        // alpha d = s^f: exact powers on both sides
        const double alpha = static_cast<double>(power(s, f)) / static_cast<double>(d);
        const ParamReport r = count_params(d, 16, alpha, s);
        EXPECT_EQ(r.ckcoop_total, r.ckcoop_coeff_params + r.ckcoop_bias_params);
        EXPECT_NEAR(r.reduction_pct,
                    100.0 * (static_cast<double>(r.coop_params) -
                             static_cast<double>(r.ckcoop_total)) /
                        static_cast<double>(r.coop_params),
                    1e-12);
        EXPECT_NEAR(r.closed_form_total, static_cast<double>(r.ckcoop_total), 1e-6)
            << "d=" << d << " alpha*d=" << power(s, f) << " s=" << s;
        EXPECT_FALSE(r.closed_form_mismatch);
      }
    }
  }
}

TEST(CountParams, RejectsSmallS) { EXPECT_THROW(count_params(8, 2, 0.5, 1), InvalidArgument); }

TEST(InitParams, DeterministicAndDrawOrderFixed) {
  const SplitPlan plan = plan_split(16, 6, 2);
  const ContextParams a = init_params(plan, 4, 77);
  EXPECT_EQ(a, init_params(plan, 4, 77));
  EXPECT_NE(a, init_params(plan, 4, 78));
  EXPECT_EQ(a.coeffs.rows(), 6u);
  EXPECT_EQ(a.coeffs.cols(), 4u);
  EXPECT_EQ(a.param_count(), 6u * 4u + plan.param_count());

  // coefficients first (row-major), then each factor in plan order
  Rng rng(77);
  std::normal_distribution<double> dist(0.0, kInitStddev);
  for (double v : a.coeffs.data()) EXPECT_EQ(v, dist(rng));
  for (const Matrix& sub : a.bias.submatrices) {
    for (double v : sub.data()) EXPECT_EQ(v, dist(rng));
  }
}

TEST(InitParams, SampleMomentsMatchNormal002) {
  const ContextParams p = init_params(plan_split(512, 192, 2), 521, 5);
  std::vector<double> all(p.coeffs.data().begin(), p.coeffs.data().end());
  for (const Matrix& sub : p.bias.submatrices) all.insert(all.end(), sub.data().begin(), sub.data().end());
  ASSERT_GE(all.size(), 100000u);
  const double n = static_cast<double>(all.size());
  const double mean = std::accumulate(all.begin(), all.end(), 0.0) / n;
  double var = 0.0;
  for (double v : all) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  EXPECT_LE(std::abs(mean), 3.0 * 0.02 / std::sqrt(n));
  EXPECT_LE(std::abs(sd - 0.02), 0.02 * 0.02);
}

TEST(InitParams, ZeroInitIsExactlyZero) {
  const ContextParams p = init_params(plan_split(8, 4, 2), 3, 1, NormMode::None, 0.5,
                                      InitMode::Zero);
  for (double v : p.coeffs.data()) EXPECT_EQ(v, 0.0);
  for (const Matrix& sub : p.bias.submatrices) {
    for (double v : sub.data()) EXPECT_EQ(v, 0.0);
  }
}

}  // namespace
}  // namespace ckctx
