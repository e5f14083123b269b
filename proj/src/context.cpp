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

#include "ckctx/context.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ckctx/error.hpp"
#include "ckctx/random.hpp"

namespace ckctx {

namespace {

// Factor sizes along one axis: s for the first n entries, the ceiling
// remainder at index n, then 1 up to `length`.
std::vector<std::size_t> split_axis(std::size_t target, std::size_t s, std::size_t n,
                                    std::size_t length) {
  std::vector<std::size_t> sizes(length, 1);
  std::size_t prod = 1;
  for (std::size_t i = 0; i < n; ++i) {
    sizes[i] = s;
    prod *= s;
  }
  sizes[n] = (target + prod - 1) / prod;
  return sizes;
}

}  // namespace

std::size_t SplitPlan::param_count() const {
  std::size_t total = 0;
  for (const auto& [rows, cols] : dims) {
    total += rows * cols;
  }
  return total;
}

std::size_t integer_log(std::size_t n, std::size_t s) {
  std::size_t power = 1;
  std::size_t exponent = 0;
  while (power <= n / s) {
    power *= s;
    ++exponent;
  }
  return exponent;
}

SplitPlan plan_split(std::size_t d, std::size_t k, std::size_t s) {
  if (s < 2) {
    throw InvalidArgument("plan_split: sub-matrix size s must be >= 2, got " + std::to_string(s));
  }
  if (d < 1 || k < 1) {
    throw InvalidArgument("plan_split: d and k must be >= 1");
  }
  SplitPlan plan;
  plan.d = d;
  plan.k = k;
  plan.s = s;
  plan.n1 = integer_log(d, s);
  plan.n2 = integer_log(k, s);
  const std::size_t length = std::max(plan.n1, plan.n2) + 1;
  const auto rows = split_axis(d, s, plan.n1, length);
  const auto cols = split_axis(k, s, plan.n2, length);
  plan.d_tilde = 1;
  plan.k_tilde = 1;
  for (std::size_t i = 0; i < length; ++i) {
    plan.dims.emplace_back(rows[i], cols[i]);
    plan.d_tilde *= rows[i];
    plan.k_tilde *= cols[i];
  }
  return plan;
}

void KroneckerBias::validate() const {
  if (submatrices.size() != plan.dims.size()) {
    throw DimensionError("KroneckerBias: " + std::to_string(submatrices.size()) +
                         " sub-matrices for a plan of " + std::to_string(plan.dims.size()));
  }
  for (std::size_t i = 0; i < submatrices.size(); ++i) {
    if (submatrices[i].rows() != plan.dims[i].first ||
        submatrices[i].cols() != plan.dims[i].second) {
      throw DimensionError("KroneckerBias: sub-matrix " + std::to_string(i) + " is " +
                           std::to_string(submatrices[i].rows()) + "x" +
                           std::to_string(submatrices[i].cols()) + ", plan wants " +
                           std::to_string(plan.dims[i].first) + "x" +
                           std::to_string(plan.dims[i].second));
    }
  }
}

Matrix assemble_bias(const KroneckerBias& bias) {
  bias.validate();
  std::vector<Matrix> factors;
  factors.reserve(bias.submatrices.size());
  for (const Matrix& sub : bias.submatrices) {
    factors.push_back(normalize(sub, bias.norm_mode));
  }
  return crop(kron_chain(factors), bias.plan.d, bias.plan.k);
}

Matrix assemble_dictionary(const Matrix& centers, const Matrix& bias_matrix) {
  if (bias_matrix.empty()) {
    return centers;
  }
  if (bias_matrix.rows() != centers.rows() || bias_matrix.cols() != centers.cols()) {
    throw DimensionError("assemble_dictionary: centers are " + std::to_string(centers.rows()) +
                         "x" + std::to_string(centers.cols()) + " but bias is " +
                         std::to_string(bias_matrix.rows()) + "x" +
                         std::to_string(bias_matrix.cols()));
  }
  return add(centers, bias_matrix);
}

Matrix assemble_dictionary(const CompressedDictionary& com, const Matrix& bias_matrix) {
  return assemble_dictionary(com.centers, bias_matrix);
}

Matrix generate_context(const Matrix& base, const Matrix& coeffs) {
  return matmul(base, coeffs);
}

std::string_view to_string(InitMode mode) { return mode == InitMode::Normal ? "normal" : "zero"; }

InitMode parse_init_mode(std::string_view text) {
  if (text == "normal") return InitMode::Normal;
  if (text == "zero") return InitMode::Zero;
  throw InvalidArgument("unknown init mode '" + std::string(text) + "'");
}

ContextParams init_params(const SplitPlan& plan, std::size_t l, std::uint64_t seed,
                          NormMode norm_mode, double alpha, InitMode init) {
  if (l < 1) {
    throw InvalidArgument("init_params: context length must be >= 1");
  }
  ContextParams params;
  params.l = l;
  params.alpha = alpha;
  params.bias.plan = plan;
  params.bias.norm_mode = norm_mode;
  if (init == InitMode::Zero) {
    params.coeffs = Matrix(plan.k, l);
    for (const auto& [rows, cols] : plan.dims) {
      params.bias.submatrices.emplace_back(rows, cols);
    }
    return params;
  }
  Rng rng(seed);
  params.coeffs = random_normal(plan.k, l, rng, 0.0, kInitStddev);
  for (const auto& [rows, cols] : plan.dims) {
    params.bias.submatrices.push_back(random_normal(rows, cols, rng, 0.0, kInitStddev));
  }
  return params;
}

ParamReport count_params(std::size_t d, std::size_t l, double alpha, std::size_t s) {
  if (d < 1 || l < 1) {
    throw InvalidArgument("count_params: d and l must be >= 1");
  }
  if (s < 2) {
    throw InvalidArgument("count_params: sub-matrix size s must be >= 2, got " +
                          std::to_string(s));
  }
  ParamReport report;
  report.d = d;
  report.l = l;
  report.alpha = alpha;
  report.s = s;
  report.k = ratio_to_k(alpha, d);
  if (report.k < 1) {
    throw InvalidArgument("count_params: round(alpha * d) must be >= 1");
  }
  report.coop_params = d * l;
  report.ckcoop_coeff_params = report.k * l;
  report.ckcoop_bias_params = plan_split(d, report.k, s).param_count();
  report.ckcoop_total = report.ckcoop_coeff_params + report.ckcoop_bias_params;
  const auto coop = static_cast<double>(report.coop_params);
  report.reduction_pct = 100.0 * (coop - static_cast<double>(report.ckcoop_total)) / coop;

  const double dd = static_cast<double>(d);
  const double ad = alpha * dd;
  const double log_s = std::log(static_cast<double>(s));
  const double lo = std::log(std::min(dd, ad)) / log_s;
  const double hi = std::log(std::max(dd, ad)) / log_s;
  const double sd = static_cast<double>(s);
  report.closed_form_a = lo;
  report.closed_form_b = hi - lo;
  report.closed_form_total =
      ad * static_cast<double>(l) + lo * sd * sd + (hi - lo) * sd + 1.0;
  report.closed_form_mismatch =
      std::llround(report.closed_form_total) != static_cast<long long>(report.ckcoop_total);
  return report;
}

}  // namespace ckctx
