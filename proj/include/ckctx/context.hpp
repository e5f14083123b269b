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

#ifndef CKCTX_CONTEXT_HPP
#define CKCTX_CONTEXT_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "ckctx/linalg.hpp"
#include "ckctx/quantizer.hpp"

namespace ckctx {

/// Shapes of the Kronecker factors whose product covers a d x k target.
///
/// Factor i (zero-based) has shape dims[i]. Rows: the first n1 factors take s
/// rows, factor n1 takes ceil(d / s^n1), the rest take 1; columns follow the
/// same rule with n2 and k. The product d_tilde x k_tilde is cropped back to
/// d x k after the chain is formed.
struct SplitPlan {
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t s = 0;
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  std::size_t d_tilde = 0;
  std::size_t k_tilde = 0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;

  /// Sum of d_i * k_i.
  std::size_t param_count() const;

  bool operator==(const SplitPlan&) const = default;
};

/// floor(log_s(n)) in exact integer arithmetic.
std::size_t integer_log(std::size_t n, std::size_t s);

SplitPlan plan_split(std::size_t d, std::size_t k, std::size_t s);

struct KroneckerBias {
  SplitPlan plan;
  std::vector<Matrix> submatrices;
  NormMode norm_mode = NormMode::L1;

  std::size_t param_count() const { return plan.param_count(); }
  /// Throws DimensionError unless submatrix shapes equal plan.dims.
  void validate() const;

  bool operator==(const KroneckerBias&) const = default;
};

/// crop(kron_chain(normalize(B_i)), d, k).
Matrix assemble_bias(const KroneckerBias& bias);

/// D_com + B, or D_com when bias_matrix is empty.
Matrix assemble_dictionary(const CompressedDictionary& com, const Matrix& bias_matrix);
Matrix assemble_dictionary(const Matrix& centers, const Matrix& bias_matrix);

/// base (d x k) times coeffs (k x l); column j is the j-th context token.
Matrix generate_context(const Matrix& base, const Matrix& coeffs);

/// Learnable state of a structured context: coefficients plus Kronecker factors.
struct ContextParams {
  Matrix coeffs;  // k x l
  KroneckerBias bias;
  std::size_t l = 0;
  double alpha = 0.0;

  std::size_t param_count() const { return coeffs.size() + bias.param_count(); }

  bool operator==(const ContextParams&) const = default;
};

enum class InitMode { Normal, Zero };

std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

inline constexpr double kInitStddev = 0.02;

/// Coefficients (k x l, row-major) then each factor in plan order, all drawn
/// i.i.d. Normal(0, 0.02) from one generator; InitMode::Zero leaves them at 0.
ContextParams init_params(const SplitPlan& plan, std::size_t l, std::uint64_t seed,
                          NormMode norm_mode = NormMode::L1, double alpha = 0.0,
                          InitMode init = InitMode::Normal);

/// Parameter accounting for a d x l context under the CoOp and structured schemes.
struct ParamReport {
  std::size_t d = 0;
  std::size_t l = 0;
  double alpha = 0.0;
  std::size_t s = 0;
  std::size_t k = 0;
  std::size_t coop_params = 0;
  std::size_t ckcoop_coeff_params = 0;
  std::size_t ckcoop_bias_params = 0;
  std::size_t ckcoop_total = 0;
  double reduction_pct = 0.0;
  // log_s(min(d, alpha d)) and log_s(max) - log_s(min)
  double closed_form_a = 0.0;
  double closed_form_b = 0.0;
  /// alpha d l + a s^2 + b s + 1; exact only when d and alpha d are powers of s.
  double closed_form_total = 0.0;
  /// True when round(closed_form_total) differs from the enumerated ckcoop_total.
  bool closed_form_mismatch = false;
};

ParamReport count_params(std::size_t d, std::size_t l, double alpha, std::size_t s);

}  // namespace ckctx

#endif  // CKCTX_CONTEXT_HPP
