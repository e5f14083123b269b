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

#ifndef CKCTX_TRAINING_HPP
#define CKCTX_TRAINING_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ckctx/context.hpp"
#include "ckctx/linalg.hpp"
#include "ckctx/model.hpp"
#include "ckctx/quantizer.hpp"

namespace ckctx {

/// How the d x l context is produced from learnable state.
///   CKCoOp        (D_com + B) A, B a cropped Kronecker chain over a d x k plan
///   CKCoOpNoBias  D_com A
///   CoOpBaseline  free d x l matrix
///   KronOnly      cropped Kronecker chain over a d x l plan, no dictionary
enum class TrainMode { CKCoOp, CKCoOpNoBias, CoOpBaseline, KronOnly };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);

enum class Schedule { Constant, Cosine };

std::string_view to_string(Schedule schedule);
Schedule parse_schedule(std::string_view text);

struct PromptParams {
  TrainMode mode = TrainMode::CKCoOp;
  Matrix coeffs;       // k x l; CKCoOp and CKCoOpNoBias
  KroneckerBias bias;  // CKCoOp and KronOnly
  Matrix context;      // d x l; CoOpBaseline
  std::size_t l = 0;
  double alpha = 0.0;

  bool uses_coeffs() const;
  bool uses_bias() const;
  bool uses_context() const { return mode == TrainMode::CoOpBaseline; }
  std::size_t param_count() const;

  /// Learnable blocks in canonical order: coeffs, sub-matrices, context.
  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;

  bool operator==(const PromptParams&) const = default;
};

/// Shapes mirror the learnable blocks of the producing PromptParams; unused
/// blocks stay empty.
struct GradientSet {
  Matrix d_coeffs;
  std::vector<Matrix> d_submatrices;
  Matrix d_context;

  std::vector<const Matrix*> blocks() const;
};

/// Assembled d x k (or d x l for KronOnly) bias, empty when the mode has none.
Matrix bias_matrix(const PromptParams& params);

/// The d x l context the encoder sees.
Matrix materialize_context(const PromptParams& params, const Matrix& centers);

/// Gradient of a cropped Kronecker chain with respect to each factor, given the
/// gradient of the cropped product.
std::vector<Matrix> kron_chain_backward(std::span<const Matrix> factors, const Matrix& grad);

/// Gradient with respect to b of normalize(b, mode), given the gradient of the output.
Matrix normalize_backward(const Matrix& b, NormMode mode, const Matrix& grad);

/// Everything a loss evaluation needs besides the learnable state.
struct LossInputs {
  const Matrix& centers;  // D_com; ignored by CoOpBaseline and KronOnly
  const Task& task;
  std::span<const Example> batch;
  std::span<const std::size_t> class_ids;  // softmax runs over these classes
  const ToyEncoder& enc;
  ClassifierConfig cfg;
};

struct LossAndGrad {
  double loss = 0.0;
  GradientSet grads;
};

/// Mean NLL over the batch and its exact gradient.
LossAndGrad forward_backward(const PromptParams& params, const LossInputs& in);

/// Mean NLL over the batch only.
double batch_loss(const PromptParams& params, const LossInputs& in);

/// Central differences (f(x + h e) - f(x - h e)) / 2h for a generic scalar function.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h);

/// Central-difference gradient of batch_loss with respect to every learnable scalar.
GradientSet fd_gradient(const PromptParams& params, const LossInputs& in, double h);

struct GradientComparison {
  std::size_t entries = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;  // over entries with |analytic - numeric| > abs_floor
  double max_abs_err = 0.0;
  bool pass = true;
};

/// An entry passes when |a - n| <= abs_floor or |a - n| / max(|a|, |n|) <= rel_tol.
GradientComparison compare_gradients(const GradientSet& analytic, const GradientSet& numeric,
                                     double rel_tol = 1e-6, double abs_floor = 1e-9);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double lr = 0.2;
  Schedule schedule = Schedule::Cosine;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::CKCoOp;
  std::size_t l = 16;
  std::size_t s = 2;
  NormMode norm = NormMode::L1;
  InitMode init = InitMode::Normal;
  ClassifierConfig classifier;
};

/// Fresh learnable state for a d-dimensional context over k centers.
PromptParams init_prompt(const TrainConfig& cfg, std::size_t d, std::size_t k, double alpha);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;      // full base-split training loss after the epoch
  double base_acc = 0.0;  // base-split training accuracy after the epoch
  double lr = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  PromptParams params;
  std::vector<EpochRecord> history;
  double initial_loss = 0.0;
  double initial_base_acc = 0.0;
  TrainConfig config;
};

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch_index);

/// Plain SGD over shuffled base-split batches.
TrainResult train(const Task& task, const TrainConfig& cfg, const CompressedDictionary& quant,
                  const ToyEncoder& enc);

/// Test accuracy of a learnable state on one split.
double evaluate(const PromptParams& params, const Matrix& centers, const Task& task,
                Split split, const ToyEncoder& enc, const ClassifierConfig& cfg);

struct ProtocolReport {
  TrainResult training;
  double base_acc = 0.0;
  double new_acc = 0.0;
  double harmonic = 0.0;
  double gap = 0.0;
};

/// Train on base classes, then score base, new, their harmonic mean and |base - new|.
ProtocolReport run_protocol(const Task& task, const TrainConfig& cfg,
                            const CompressedDictionary& quant, const ToyEncoder& enc);

}  // namespace ckctx

#endif  // CKCTX_TRAINING_HPP
