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

#ifndef CKCTX_MODEL_HPP
#define CKCTX_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ckctx/linalg.hpp"

namespace ckctx {

/// Frozen stand-in for a text tower: mean-pool the prompt columns, one tanh
/// layer, linear read-out, unit-normalize.
struct ToyEncoder {
  Matrix w1;  // h x d
  Matrix w2;  // f x h
  std::uint64_t seed = 0;
  double gain = 1.0;

  /// W1 ~ N(0, gain^2 / d), W2 ~ N(0, 1 / h), drawn in that order from `seed`.
  static ToyEncoder make(std::size_t d, std::size_t h, std::size_t f, std::uint64_t seed,
                         double gain = 1.0);

  std::size_t d() const { return w1.cols(); }
  std::size_t h() const { return w1.rows(); }
  std::size_t f() const { return w2.rows(); }
};

/// Intermediate values of one encoder pass, kept for back-propagation.
struct EncoderTrace {
  std::vector<double> pooled;  // d
  std::vector<double> hidden;  // h, after tanh
  std::vector<double> raw;     // f, before normalization
  double raw_norm = 0.0;
  std::vector<double> feature;  // f, unit norm
};

inline constexpr double kDegenerateNorm = 1e-12;

/// Mean of the columns of [context | tokens] as a d-vector.
std::vector<double> pool_prompt(const Matrix& context, const Matrix& tokens);

EncoderTrace encode_trace(const ToyEncoder& enc, std::span<const double> pooled);

/// Unit-norm text feature of the prompt [context | tokens].
std::vector<double> encode_text(const ToyEncoder& enc, const Matrix& context,
                                const Matrix& tokens);

struct ClassifierConfig {
  double tau = 0.07;
};

double cosine(std::span<const double> a, std::span<const double> b);

/// softmax(cos(x, w_i) / tau) over the given class weights.
std::vector<double> classify(std::span<const double> x,
                             std::span<const std::vector<double>> weights,
                             const ClassifierConfig& cfg);

double nll_loss(std::span<const double> probs, std::size_t label);

struct Example {
  std::vector<double> feature;  // unit norm, length f
  std::size_t label = 0;        // global class index

  bool operator==(const Example&) const = default;
};

enum class Split { Base, New };

std::string_view to_string(Split split);

/// Synthetic few-shot classification world.
///
/// Each class i owns a latent direction q_i and t name tokens P q_i + o + jitter,
/// where P is a frozen f -> d map and o a token offset common to every class.
/// Image concepts are the encoder's features under a hidden ideal context that
/// cancels o; a null (zero) context therefore sees a shifted operating point and
/// classifies noticeably worse than the ideal one.
struct Task {
  std::vector<Matrix> class_tokens;  // c matrices, d x t
  std::vector<std::vector<double>> concepts;  // c unit vectors, length f
  std::vector<Example> train;  // `shots` per class
  std::vector<Example> test;
  std::vector<std::size_t> base_ids;
  std::vector<std::size_t> new_ids;
  std::size_t shots = 0;
  Matrix ideal_context;  // d x l, hidden

  std::size_t num_classes() const { return class_tokens.size(); }
  std::size_t dim() const { return class_tokens.empty() ? 0 : class_tokens.front().rows(); }
  const std::vector<std::size_t>& ids(Split split) const {
    return split == Split::Base ? base_ids : new_ids;
  }

  bool operator==(const Task&) const = default;
};

struct TaskSpec {
  std::size_t classes = 8;
  std::size_t shots = 16;
  std::size_t test_shots = 32;
  std::size_t t = 4;            // tokens per class name
  std::size_t l = 16;           // context length of the hidden ideal context
  double noise = 0.1;
  double offset_scale = 3.0;    // per-entry stddev of the shared token offset o
  double token_jitter = 0.05;
  std::uint64_t seed = 0;
};

/// Builds a task for the given frozen encoder (its d and f fix the task dims).
Task synth_task(const TaskSpec& spec, const ToyEncoder& enc);

/// Class features of `class_ids` under `context`.
std::vector<std::vector<double>> class_weights(const Matrix& context, const Task& task,
                                               std::span<const std::size_t> class_ids,
                                               const ToyEncoder& enc);

/// Fraction of `examples` whose label (restricted to `class_ids`) is the argmax.
double accuracy(const std::vector<std::vector<double>>& weights,
                std::span<const std::size_t> class_ids, std::span<const Example> examples,
                const ClassifierConfig& cfg);

/// Test accuracy on one split with a plain context.
double evaluate(const Matrix& context, const Task& task, Split split, const ToyEncoder& enc,
                const ClassifierConfig& cfg);

/// Examples of `pool` whose labels belong to `split`.
std::vector<Example> split_examples(const Task& task, std::span<const Example> pool,
                                    Split split);

/// 2ab / (a + b), zero when both are zero.
double harmonic_mean(double a, double b);

}  // namespace ckctx

#endif  // CKCTX_MODEL_HPP
