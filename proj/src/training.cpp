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

#include "ckctx/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "ckctx/error.hpp"
#include "ckctx/random.hpp"

namespace ckctx {

namespace {

struct ClassState {
  EncoderTrace trace;
  double count = 0.0;  // l + t_i, the pooling denominator
};

struct Forward {
  Matrix bias;     // assembled bias, empty when unused
  Matrix base;     // D_com + B (CK modes)
  Matrix context;  // d x l
  std::vector<ClassState> classes;
};

std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out[r] += m(r, c);
    }
  }
  return out;
}

Forward run_forward(const PromptParams& params, const LossInputs& in) {
  Forward fw;
  fw.bias = bias_matrix(params);
  switch (params.mode) {
    case TrainMode::CKCoOp:
      fw.base = assemble_dictionary(in.centers, fw.bias);
      fw.context = generate_context(fw.base, params.coeffs);
      break;
    case TrainMode::CKCoOpNoBias:
      fw.base = in.centers;
      fw.context = generate_context(fw.base, params.coeffs);
      break;
    case TrainMode::CoOpBaseline:
      fw.context = params.context;
      break;
    case TrainMode::KronOnly:
      fw.context = fw.bias;
      break;
  }
  const std::vector<double> context_sum = row_sums(fw.context);
  for (std::size_t id : in.class_ids) {
    const Matrix& tokens = in.task.class_tokens.at(id);
    if (tokens.rows() != context_sum.size()) {
      throw DimensionError("forward: token and context dimensions differ");
    }
    const std::vector<double> token_sum = row_sums(tokens);
    ClassState state;
    state.count = static_cast<double>(fw.context.cols() + tokens.cols());
    std::vector<double> pooled(context_sum.size());
    for (std::size_t r = 0; r < pooled.size(); ++r) {
      pooled[r] = (context_sum[r] + token_sum[r]) / state.count;
    }
    state.trace = encode_trace(in.enc, pooled);
    fw.classes.push_back(std::move(state));
  }
  return fw;
}

std::size_t position_of(std::span<const std::size_t> ids, std::size_t label) {
  const auto it = std::find(ids.begin(), ids.end(), label);
  if (it == ids.end()) {
    throw InvalidArgument("batch label " + std::to_string(label) +
                          " is not in the training class set");
  }
  return static_cast<std::size_t>(it - ids.begin());
}

std::vector<double> unit(std::span<const double> x) {
  const double norm = l2_norm(x);
  if (norm < kDegenerateNorm) {
    throw NumericalError("zero-norm image feature");
  }
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v /= norm;
  return out;
}

// Mean NLL; when grad_w is given it receives dLoss/dw_i for every class.
double loss_from_forward(const Forward& fw, const LossInputs& in,
                         std::vector<std::vector<double>>* grad_w) {
  if (in.batch.empty()) {
    throw InvalidArgument("forward_backward: empty batch");
  }
  if (!(in.cfg.tau > 0.0)) {
    throw InvalidArgument("temperature must be positive");
  }
  const std::size_t c = fw.classes.size();
  const std::size_t f = in.enc.f();
  const double inv_n = 1.0 / static_cast<double>(in.batch.size());
  if (grad_w != nullptr) {
    grad_w->assign(c, std::vector<double>(f, 0.0));
  }
  double total = 0.0;
  std::vector<double> logits(c);
  for (const Example& ex : in.batch) {
    const std::size_t target = position_of(in.class_ids, ex.label);
    const std::vector<double> x = unit(ex.feature);
    for (std::size_t i = 0; i < c; ++i) {
      logits[i] = dot(x, fw.classes[i].trace.feature) / in.cfg.tau;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - top);
    const double log_z = top + std::log(z);
    total += log_z - logits[target];
    if (grad_w != nullptr) {
      for (std::size_t i = 0; i < c; ++i) {
        const double p = std::exp(logits[i] - log_z);
        const double coef = (p - (i == target ? 1.0 : 0.0)) * inv_n / in.cfg.tau;
        auto& g = (*grad_w)[i];
        for (std::size_t j = 0; j < f; ++j) {
          g[j] += coef * x[j];
        }
      }
    }
  }
  const double loss = total * inv_n;
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite loss");
  }
  return loss;
}

// Gradient of the bias parameters given the gradient of the assembled bias.
std::vector<Matrix> bias_backward(const KroneckerBias& bias, const Matrix& grad) {
  std::vector<Matrix> factors;
  factors.reserve(bias.submatrices.size());
  for (const Matrix& sub : bias.submatrices) {
    factors.push_back(normalize(sub, bias.norm_mode));
  }
  std::vector<Matrix> d_factors = kron_chain_backward(factors, grad);
  for (std::size_t i = 0; i < d_factors.size(); ++i) {
    d_factors[i] = normalize_backward(bias.submatrices[i], bias.norm_mode, d_factors[i]);
  }
  return d_factors;
}

}  // namespace

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::CKCoOp:
      return "ckcoop";
    case TrainMode::CKCoOpNoBias:
      return "ckcoop-nobias";
    case TrainMode::CoOpBaseline:
      return "coop";
    case TrainMode::KronOnly:
      return "kron-only";
  }
  return "ckcoop";
}

TrainMode parse_train_mode(std::string_view text) {
  if (text == "ckcoop") return TrainMode::CKCoOp;
  if (text == "ckcoop-nobias") return TrainMode::CKCoOpNoBias;
  if (text == "coop") return TrainMode::CoOpBaseline;
  if (text == "kron-only") return TrainMode::KronOnly;
  throw InvalidArgument("unknown training mode '" + std::string(text) + "'");
}

std::string_view to_string(Schedule schedule) {
  return schedule == Schedule::Constant ? "constant" : "cosine";
}

Schedule parse_schedule(std::string_view text) {
  if (text == "constant") return Schedule::Constant;
  if (text == "cosine") return Schedule::Cosine;
  throw InvalidArgument("unknown schedule '" + std::string(text) + "'");
}

bool PromptParams::uses_coeffs() const {
  return mode == TrainMode::CKCoOp || mode == TrainMode::CKCoOpNoBias;
}

bool PromptParams::uses_bias() const {
  return mode == TrainMode::CKCoOp || mode == TrainMode::KronOnly;
}

std::size_t PromptParams::param_count() const {
  std::size_t total = 0;
  for (const Matrix* block : blocks()) total += block->size();
  return total;
}

std::vector<Matrix*> PromptParams::blocks() {
  std::vector<Matrix*> out;
  if (uses_coeffs()) out.push_back(&coeffs);
  if (uses_bias()) {
    for (Matrix& sub : bias.submatrices) out.push_back(&sub);
  }
  if (uses_context()) out.push_back(&context);
  return out;
}

std::vector<const Matrix*> PromptParams::blocks() const {
  std::vector<const Matrix*> out;
  for (Matrix* block : const_cast<PromptParams*>(this)->blocks()) out.push_back(block);
  return out;
}

std::vector<const Matrix*> GradientSet::blocks() const {
  std::vector<const Matrix*> out;
  if (!d_coeffs.empty()) out.push_back(&d_coeffs);
  for (const Matrix& sub : d_submatrices) out.push_back(&sub);
  if (!d_context.empty()) out.push_back(&d_context);
  return out;
}

Matrix bias_matrix(const PromptParams& params) {
  if (!params.uses_bias()) return {};
  return assemble_bias(params.bias);
}

Matrix materialize_context(const PromptParams& params, const Matrix& centers) {
  switch (params.mode) {
    case TrainMode::CKCoOp:
      return generate_context(assemble_dictionary(centers, bias_matrix(params)), params.coeffs);
    case TrainMode::CKCoOpNoBias:
      return generate_context(centers, params.coeffs);
    case TrainMode::CoOpBaseline:
      return params.context;
    case TrainMode::KronOnly:
      return bias_matrix(params);
  }
  return {};
}

std::vector<Matrix> kron_chain_backward(std::span<const Matrix> factors, const Matrix& grad) {
  const std::size_t p = factors.size();
  if (p == 0) {
    throw DimensionError("kron_chain_backward: no factors");
  }
  std::size_t full_rows = 1;
  std::size_t full_cols = 1;
  for (const Matrix& f : factors) {
    full_rows *= f.rows();
    full_cols *= f.cols();
  }
  if (grad.rows() > full_rows || grad.cols() > full_cols) {
    throw DimensionError("kron_chain_backward: gradient exceeds the chain shape");
  }
  std::vector<Matrix> out;
  for (const Matrix& f : factors) out.emplace_back(f.rows(), f.cols());

  // Rows of the chain are mixed-radix numbers with factor 0 most significant;
  // the entry at (r, c) is the product of factor values at the digit pairs.
  std::vector<std::size_t> rd(p);
  std::vector<std::size_t> cd(p);
  std::vector<double> vals(p);
  std::vector<double> prefix(p + 1);
  std::vector<double> suffix(p + 1);
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    std::size_t rest = r;
    for (std::size_t i = p; i-- > 0;) {
      rd[i] = rest % factors[i].rows();
      rest /= factors[i].rows();
    }
    for (std::size_t c = 0; c < grad.cols(); ++c) {
      const double g = grad(r, c);
      if (g == 0.0) continue;
      std::size_t crest = c;
      for (std::size_t i = p; i-- > 0;) {
        cd[i] = crest % factors[i].cols();
        crest /= factors[i].cols();
      }
      for (std::size_t i = 0; i < p; ++i) vals[i] = factors[i](rd[i], cd[i]);
      prefix[0] = 1.0;
      for (std::size_t i = 0; i < p; ++i) prefix[i + 1] = prefix[i] * vals[i];
      suffix[p] = 1.0;
      for (std::size_t i = p; i-- > 0;) suffix[i] = suffix[i + 1] * vals[i];
      for (std::size_t i = 0; i < p; ++i) {
        out[i](rd[i], cd[i]) += g * prefix[i] * suffix[i + 1];
      }
    }
  }
  return out;
}

Matrix normalize_backward(const Matrix& b, NormMode mode, const Matrix& grad) {
  if (mode == NormMode::None) {
    return grad;
  }
  double total = 0.0;
  double inner = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double v = b.data()[i];
    total += mode == NormMode::L1 ? std::abs(v) : v * v;
    inner += grad.data()[i] * v;
  }
  if (total == 0.0) {
    throw ZeroMatrixError("normalize_backward: gradient of the normalizer at an all-zero matrix");
  }
  Matrix out(b.rows(), b.cols());
  if (mode == NormMode::L1) {
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double v = b.data()[i];
      const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      out.data()[i] = grad.data()[i] * inv - sign * inner * inv * inv;
    }
  } else {
    const double norm = std::sqrt(total);
    const double inv = 1.0 / norm;
    const double inv3 = inv * inv * inv;
    for (std::size_t i = 0; i < b.size(); ++i) {
      out.data()[i] = grad.data()[i] * inv - b.data()[i] * inner * inv3;
    }
  }
  return out;
}

LossAndGrad forward_backward(const PromptParams& params, const LossInputs& in) {
  const Forward fw = run_forward(params, in);
  std::vector<std::vector<double>> grad_w;
  LossAndGrad result;
  result.loss = loss_from_forward(fw, in, &grad_w);

  // Gradient of the summed context column, shared by every column.
  const std::size_t d = fw.context.rows();
  std::vector<double> g(d, 0.0);
  for (std::size_t i = 0; i < fw.classes.size(); ++i) {
    const EncoderTrace& tr = fw.classes[i].trace;
    const double along = dot(grad_w[i], tr.feature);
    std::vector<double> d_raw(tr.raw.size());
    for (std::size_t j = 0; j < d_raw.size(); ++j) {
      d_raw[j] = (grad_w[i][j] - along * tr.feature[j]) / tr.raw_norm;
    }
    std::vector<double> d_pre = matvec_transposed(in.enc.w2, d_raw);
    for (std::size_t j = 0; j < d_pre.size(); ++j) {
      d_pre[j] *= 1.0 - tr.hidden[j] * tr.hidden[j];
    }
    const std::vector<double> d_pooled = matvec_transposed(in.enc.w1, d_pre);
    for (std::size_t r = 0; r < d; ++r) {
      g[r] += d_pooled[r] / fw.classes[i].count;
    }
  }
  const std::size_t l = fw.context.cols();
  Matrix d_context(d, l);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t j = 0; j < l; ++j) d_context(r, j) = g[r];
  }

  GradientSet& grads = result.grads;
  switch (params.mode) {
    case TrainMode::CoOpBaseline:
      grads.d_context = std::move(d_context);
      break;
    case TrainMode::KronOnly:
      grads.d_submatrices = bias_backward(params.bias, d_context);
      break;
    case TrainMode::CKCoOp:
    case TrainMode::CKCoOpNoBias: {
      const std::vector<double> col_grad = matvec_transposed(fw.base, g);
      grads.d_coeffs = Matrix(params.coeffs.rows(), params.coeffs.cols());
      for (std::size_t r = 0; r < grads.d_coeffs.rows(); ++r) {
        for (std::size_t j = 0; j < grads.d_coeffs.cols(); ++j) grads.d_coeffs(r, j) = col_grad[r];
      }
      if (params.mode == TrainMode::CKCoOp) {
        const std::vector<double> coeff_sum = row_sums(params.coeffs);
        Matrix d_base(d, coeff_sum.size());
        for (std::size_t r = 0; r < d; ++r) {
          for (std::size_t j = 0; j < coeff_sum.size(); ++j) d_base(r, j) = g[r] * coeff_sum[j];
        }
        grads.d_submatrices = bias_backward(params.bias, d_base);
      }
      break;
    }
  }
  return result;
}

double batch_loss(const PromptParams& params, const LossInputs& in) {
  return loss_from_forward(run_forward(params, in), in, nullptr);
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h) {
  if (!(h > 0.0)) {
    throw InvalidArgument("central_difference: step must be positive");
  }
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> out(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

GradientSet fd_gradient(const PromptParams& params, const LossInputs& in, double h) {
  if (!(h > 0.0)) {
    throw InvalidArgument("fd_gradient: step must be positive");
  }
  PromptParams probe = params;
  std::vector<Matrix*> blocks = probe.blocks();
  std::vector<Matrix> grads;
  for (Matrix* block : blocks) {
    Matrix g(block->rows(), block->cols());
    for (std::size_t i = 0; i < block->size(); ++i) {
      const double saved = block->data()[i];
      block->data()[i] = saved + h;
      const double up = batch_loss(probe, in);
      block->data()[i] = saved - h;
      const double down = batch_loss(probe, in);
      block->data()[i] = saved;
      g.data()[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  GradientSet out;
  std::size_t next = 0;
  if (params.uses_coeffs()) out.d_coeffs = std::move(grads[next++]);
  if (params.uses_bias()) {
    for (std::size_t i = 0; i < params.bias.submatrices.size(); ++i) {
      out.d_submatrices.push_back(std::move(grads[next++]));
    }
  }
  if (params.uses_context()) out.d_context = std::move(grads[next++]);
  return out;
}

GradientComparison compare_gradients(const GradientSet& analytic, const GradientSet& numeric,
                                     double rel_tol, double abs_floor) {
  const auto a_blocks = analytic.blocks();
  const auto n_blocks = numeric.blocks();
  if (a_blocks.size() != n_blocks.size()) {
    throw DimensionError("compare_gradients: block count mismatch");
  }
  GradientComparison cmp;
  for (std::size_t b = 0; b < a_blocks.size(); ++b) {
    const Matrix& a = *a_blocks[b];
    const Matrix& n = *n_blocks[b];
    if (a.rows() != n.rows() || a.cols() != n.cols()) {
      throw DimensionError("compare_gradients: block shape mismatch");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double av = a.data()[i];
      const double nv = n.data()[i];
      const double diff = std::abs(av - nv);
      ++cmp.entries;
      cmp.max_abs_err = std::max(cmp.max_abs_err, diff);
      if (!std::isfinite(diff)) {
        ++cmp.failures;
        continue;
      }
      if (diff <= abs_floor) continue;
      const double rel = diff / std::max(std::abs(av), std::abs(nv));
      cmp.max_rel_err = std::max(cmp.max_rel_err, rel);
      if (rel > rel_tol) ++cmp.failures;
    }
  }
  cmp.pass = cmp.failures == 0;
  return cmp;
}

PromptParams init_prompt(const TrainConfig& cfg, std::size_t d, std::size_t k, double alpha) {
  PromptParams params;
  params.mode = cfg.mode;
  params.l = cfg.l;
  params.alpha = alpha;
  switch (cfg.mode) {
    case TrainMode::CKCoOp:
    case TrainMode::CKCoOpNoBias: {
      ContextParams ck = init_params(plan_split(d, k, cfg.s), cfg.l, cfg.seed, cfg.norm, alpha,
                                     cfg.init);
      params.coeffs = std::move(ck.coeffs);
      if (cfg.mode == TrainMode::CKCoOp) params.bias = std::move(ck.bias);
      break;
    }
    case TrainMode::KronOnly: {
      // the factors of a d x l plan play the role of the whole context
      ContextParams kron = init_params(plan_split(d, cfg.l, cfg.s), 1, cfg.seed, cfg.norm,
                                       alpha, cfg.init);
      params.bias = std::move(kron.bias);
      break;
    }
    case TrainMode::CoOpBaseline: {
      if (cfg.init == InitMode::Zero) {
        params.context = Matrix(d, cfg.l);
      } else {
        Rng rng(cfg.seed);
        params.context = random_normal(d, cfg.l, rng, 0.0, kInitStddev);
      }
      break;
    }
  }
  return params;
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch_index) {
  if (cfg.schedule == Schedule::Constant) return cfg.lr;
  const double progress = static_cast<double>(epoch_index) / static_cast<double>(cfg.epochs);
  return 0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainResult train(const Task& task, const TrainConfig& cfg, const CompressedDictionary& quant,
                  const ToyEncoder& enc) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw InvalidArgument("train: epochs and batch_size must be >= 1");
  }
  if (!(cfg.lr >= 0.0)) {
    throw InvalidArgument("train: learning rate must be >= 0");
  }
  const std::vector<Example> pool = split_examples(task, task.train, Split::Base);
  if (pool.empty()) {
    throw InvalidArgument("train: base split has no training examples");
  }
  const auto& ids = task.base_ids;
  const std::size_t d = task.dim();

  TrainResult result;
  result.config = cfg;
  result.params = init_prompt(cfg, d, quant.centers.cols(), quant.alpha);
  PromptParams& params = result.params;

  const LossInputs full{quant.centers, task, pool, ids, enc, cfg.classifier};
  const auto measure = [&](double& loss, double& acc) {
    loss = batch_loss(params, full);
    const Matrix context = materialize_context(params, quant.centers);
    acc = accuracy(class_weights(context, task, ids, enc), ids, pool, cfg.classifier);
  };
  measure(result.initial_loss, result.initial_base_acc);

  Rng rng(derive_seed(cfg.seed, 7));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        batch.clear();
        for (std::size_t i = start; i < stop; ++i) batch.push_back(pool[order[i]]);
        const LossInputs in{quant.centers, task, batch, ids, enc, cfg.classifier};
        const LossAndGrad lg = forward_backward(params, in);
        const auto grads = lg.grads.blocks();
        const auto blocks = params.blocks();
        for (std::size_t b = 0; b < blocks.size(); ++b) {
          auto dst = blocks[b]->data();
          const auto src = grads[b]->data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= lr * src[i];
        }
      }
      EpochRecord rec;
      rec.epoch = epoch + 1;
      rec.lr = lr;
      measure(rec.loss, rec.base_acc);
      result.history.push_back(rec);
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged in epoch " + std::to_string(epoch + 1) + ": " +
                           e.what());
    }
  }
  return result;
}

double evaluate(const PromptParams& params, const Matrix& centers, const Task& task,
                Split split, const ToyEncoder& enc, const ClassifierConfig& cfg) {
  return evaluate(materialize_context(params, centers), task, split, enc, cfg);
}

ProtocolReport run_protocol(const Task& task, const TrainConfig& cfg,
                            const CompressedDictionary& quant, const ToyEncoder& enc) {
  if (task.base_ids.empty() || task.new_ids.empty()) {
    throw InvalidArgument("run_protocol: task needs both base and new classes");
  }
  ProtocolReport report;
  report.training = train(task, cfg, quant, enc);
  report.base_acc = evaluate(report.training.params, quant.centers, task, Split::Base, enc,
                             cfg.classifier);
  report.new_acc = evaluate(report.training.params, quant.centers, task, Split::New, enc,
                            cfg.classifier);
  report.harmonic = harmonic_mean(report.base_acc, report.new_acc);
  report.gap = std::abs(report.base_acc - report.new_acc);
  return report;
}

}  // namespace ckctx
