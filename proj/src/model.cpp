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

#include "ckctx/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ckctx/error.hpp"
#include "ckctx/random.hpp"

namespace ckctx {

namespace {

std::vector<double> unit_gaussian(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  double norm = 0.0;
  do {
    for (double& x : v) x = dist(rng);
    norm = l2_norm(v);
  } while (norm < kDegenerateNorm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> noisy_feature(std::span<const double> center, double noise, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> x(center.begin(), center.end());
  if (noise > 0.0) {
    for (double& v : x) v += noise * dist(rng);
  }
  const double norm = l2_norm(x);
  if (norm < kDegenerateNorm) {
    throw NumericalError("synth_task: zero-norm feature");
  }
  for (double& v : x) v /= norm;
  return x;
}

}  // namespace

ToyEncoder ToyEncoder::make(std::size_t d, std::size_t h, std::size_t f, std::uint64_t seed,
                            double gain) {
  if (d < 1 || h < 1 || f < 1) {
    throw InvalidArgument("ToyEncoder: d, h and f must be >= 1");
  }
  Rng rng(seed);
  ToyEncoder enc;
  enc.seed = seed;
  enc.gain = gain;
  enc.w1 = random_normal(h, d, rng, 0.0, gain / std::sqrt(static_cast<double>(d)));
  enc.w2 = random_normal(f, h, rng, 0.0, 1.0 / std::sqrt(static_cast<double>(h)));
  return enc;
}

std::vector<double> pool_prompt(const Matrix& context, const Matrix& tokens) {
  const std::size_t d = tokens.rows();
  if (!context.empty() && context.rows() != d) {
    throw DimensionError("pool_prompt: context has " + std::to_string(context.rows()) +
                         " rows but tokens have " + std::to_string(d));
  }
  const std::size_t count = context.cols() + tokens.cols();
  if (count == 0) {
    throw DimensionError("pool_prompt: empty prompt");
  }
  std::vector<double> pooled(d, 0.0);
  for (const Matrix* part : {&context, &tokens}) {
    for (std::size_t r = 0; r < part->rows(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < part->cols(); ++c) {
        acc += (*part)(r, c);
      }
      pooled[r] += acc;
    }
  }
  for (double& v : pooled) v /= static_cast<double>(count);
  return pooled;
}

EncoderTrace encode_trace(const ToyEncoder& enc, std::span<const double> pooled) {
  EncoderTrace trace;
  trace.pooled.assign(pooled.begin(), pooled.end());
  trace.hidden = matvec(enc.w1, pooled);
  for (double& v : trace.hidden) v = std::tanh(v);
  trace.raw = matvec(enc.w2, trace.hidden);
  trace.raw_norm = l2_norm(trace.raw);
  if (!(trace.raw_norm >= kDegenerateNorm)) {
    throw NumericalError("encode_text: degenerate encoder output (norm " +
                         std::to_string(trace.raw_norm) + ")");
  }
  trace.feature = trace.raw;
  for (double& v : trace.feature) v /= trace.raw_norm;
  return trace;
}

std::vector<double> encode_text(const ToyEncoder& enc, const Matrix& context,
                                const Matrix& tokens) {
  if (tokens.rows() != enc.d()) {
    throw DimensionError("encode_text: tokens have " + std::to_string(tokens.rows()) +
                         " rows, encoder expects " + std::to_string(enc.d()));
  }
  return encode_trace(enc, pool_prompt(context, tokens)).feature;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na < kDegenerateNorm || nb < kDegenerateNorm) {
    throw NumericalError("cosine: zero-norm vector");
  }
  return dot(a, b) / (na * nb);
}

std::vector<double> classify(std::span<const double> x,
                             std::span<const std::vector<double>> weights,
                             const ClassifierConfig& cfg) {
  if (!(cfg.tau > 0.0)) {
    throw InvalidArgument("classify: temperature must be positive");
  }
  if (weights.empty()) {
    throw InvalidArgument("classify: need at least one class");
  }
  std::vector<double> logits(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].size() != x.size()) {
      throw DimensionError("classify: weight length mismatch");
    }
    logits[i] = cosine(x, weights[i]) / cfg.tau;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logits) v /= total;
  return logits;
}

double nll_loss(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw InvalidArgument("nll_loss: label " + std::to_string(label) + " out of range for " +
                          std::to_string(probs.size()) + " classes");
  }
  return -std::log(probs[label]);
}

std::string_view to_string(Split split) { return split == Split::Base ? "base" : "new"; }

Task synth_task(const TaskSpec& spec, const ToyEncoder& enc) {
  if (spec.classes < 2 || spec.classes % 2 != 0) {
    throw InvalidArgument("synth_task: class count must be even and >= 2");
  }
  if (spec.shots < 1 || spec.t < 1 || spec.l < 1) {
    throw InvalidArgument("synth_task: shots, t and l must be >= 1");
  }
  if (!(spec.noise >= 0.0)) {
    throw InvalidArgument("synth_task: noise must be >= 0");
  }
  const std::size_t d = enc.d();
  const std::size_t f = enc.f();
  const std::size_t c = spec.classes;

  Rng world(derive_seed(spec.seed, 0));
  const Matrix projection = random_normal(d, f, world);
  const Matrix offset = random_normal(d, 1, world, 0.0, spec.offset_scale);

  Task task;
  task.shots = spec.shots;
  std::normal_distribution<double> jitter(0.0, spec.token_jitter);
  for (std::size_t i = 0; i < c; ++i) {
    const std::vector<double> latent = unit_gaussian(f, world);
    const std::vector<double> name = matvec(projection, latent);
    Matrix tokens(d, spec.t);
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t j = 0; j < spec.t; ++j) {
        tokens(r, j) = name[r] + offset(r, 0) + jitter(world);
      }
    }
    task.class_tokens.push_back(std::move(tokens));
  }

  // Every column is -(t/l) o, so the pooled context exactly cancels the offset.
  task.ideal_context = Matrix(d, spec.l);
  const double share = static_cast<double>(spec.t) / static_cast<double>(spec.l);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t j = 0; j < spec.l; ++j) {
      task.ideal_context(r, j) = -share * offset(r, 0);
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    task.concepts.push_back(encode_text(enc, task.ideal_context, task.class_tokens[i]));
  }

  Rng samples(derive_seed(spec.seed, 1));
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t n = 0; n < spec.shots; ++n) {
      task.train.push_back({noisy_feature(task.concepts[i], spec.noise, samples), i});
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t n = 0; n < spec.test_shots; ++n) {
      task.test.push_back({noisy_feature(task.concepts[i], spec.noise, samples), i});
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    (i < c / 2 ? task.base_ids : task.new_ids).push_back(i);
  }
  return task;
}

std::vector<std::vector<double>> class_weights(const Matrix& context, const Task& task,
                                               std::span<const std::size_t> class_ids,
                                               const ToyEncoder& enc) {
  std::vector<std::vector<double>> weights;
  weights.reserve(class_ids.size());
  for (std::size_t id : class_ids) {
    weights.push_back(encode_text(enc, context, task.class_tokens.at(id)));
  }
  return weights;
}

double accuracy(const std::vector<std::vector<double>>& weights,
                std::span<const std::size_t> class_ids, std::span<const Example> examples,
                const ClassifierConfig& cfg) {
  if (examples.empty()) {
    throw InvalidArgument("accuracy: empty example set");
  }
  std::size_t correct = 0;
  for (const Example& ex : examples) {
    const std::vector<double> probs = classify(ex.feature, weights, cfg);
    const auto best = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (class_ids[best] == ex.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

std::vector<Example> split_examples(const Task& task, std::span<const Example> pool,
                                    Split split) {
  const auto& ids = task.ids(split);
  std::vector<Example> out;
  for (const Example& ex : pool) {
    if (std::find(ids.begin(), ids.end(), ex.label) != ids.end()) {
      out.push_back(ex);
    }
  }
  return out;
}

double evaluate(const Matrix& context, const Task& task, Split split, const ToyEncoder& enc,
                const ClassifierConfig& cfg) {
  const auto& ids = task.ids(split);
  if (ids.empty()) {
    throw InvalidArgument(std::string("evaluate: empty ") + std::string(to_string(split)) +
                          " split");
  }
  const std::vector<Example> examples = split_examples(task, task.test, split);
  if (examples.empty()) {
    throw InvalidArgument(std::string("evaluate: no test examples in the ") +
                          std::string(to_string(split)) + " split");
  }
  return accuracy(class_weights(context, task, ids, enc), ids, examples, cfg);
}

double harmonic_mean(double a, double b) {
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

}  // namespace ckctx
