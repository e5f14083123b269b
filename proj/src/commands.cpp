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

#include "ckctx/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "ckctx/error.hpp"
#include "ckctx/random.hpp"

namespace ckctx {

namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_json(std::ostream& os, const Json& j) { os << canonical_dump(j) << '\n'; }

void write_json(const fs::path& path, const Json& j) {
  write_file(path, canonical_dump(j) + "\n");
}

Json quant_summary(const CompressedDictionary& quant) {
  Json j{{"method", std::string(to_string(quant.method))},
         {"k", quant.k},
         {"alpha", quant.alpha},
         {"inertia", quant.inertia},
         {"iterations", quant.iterations},
         {"converged", quant.converged}};
  return j;
}

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

Json to_json(const SplitPlan& plan) {
  Json dims = Json::array();
  for (const auto& [r, c] : plan.dims) dims.push_back(Json::array({r, c}));
  return Json{{"d", plan.d},           {"k", plan.k},
              {"s", plan.s},           {"n1", plan.n1},
              {"n2", plan.n2},         {"d_tilde", plan.d_tilde},
              {"k_tilde", plan.k_tilde}, {"dims", dims},
              {"param_count", plan.param_count()}};
}

Json to_json(const ParamReport& r) {
  return Json{{"d", r.d},
              {"l", r.l},
              {"alpha", r.alpha},
              {"s", r.s},
              {"k", r.k},
              {"coop", r.coop_params},
              {"ckcoop_coeffs", r.ckcoop_coeff_params},
              {"ckcoop_bias", r.ckcoop_bias_params},
              {"ckcoop_total", r.ckcoop_total},
              {"reduction_pct", r.reduction_pct},
              {"closed_form",
               {{"a", r.closed_form_a},
                {"b", r.closed_form_b},
                {"total", r.closed_form_total},
                {"rounded", std::llround(r.closed_form_total)},
                {"mismatch", r.closed_form_mismatch}}}};
}

Json to_json(const BiasNormProfile& p) {
  return Json{{"threshold", p.threshold},
              {"frac_above", p.frac_above},
              {"sorted_norms", p.sorted_norms}};
}

Json to_json(const SimilarityProfile& p) {
  return Json{{"min", p.min}, {"mean", p.mean}, {"max", p.max},
              {"max_similarity", p.max_similarity}};
}

int cmd_make_dictionary(const RunConfig& cfg, const fs::path& out, std::ostream& os) {
  RunConfig synthetic = cfg;
  synthetic.dictionary.clear();
  const EmbeddingDictionary dict = build_dictionary(synthetic);
  write_ckmx(out, dict.matrix);
  print_json(os, Json{{"path", out.string()},
                      {"d", dict.dim()},
                      {"m", dict.vocab_size()},
                      {"clusters", cfg.clusters},
                      {"spread", cfg.spread},
                      {"seed", cfg.seed}});
  return kExitOk;
}

int cmd_quantize(const RunConfig& cfg, const fs::path& out, std::ostream& os) {
  if (cfg.dictionary.empty()) {
    throw ConfigError({"dictionary: quantize needs the path of a CKMX dictionary"});
  }
  // d comes from the file here, so the config's d only matters for alpha
  RunConfig adjusted = cfg;
  Matrix imported = read_ckmx(cfg.dictionary);
  adjusted.d = imported.rows();
  const EmbeddingDictionary dict(std::move(imported), cfg.dictionary);
  const CompressedDictionary quant = build_quantization(adjusted, dict);
  write_ckmx(out, quant.centers);

  Json summary = quant_summary(quant);
  summary["d"] = dict.dim();
  summary["m"] = dict.vocab_size();
  summary["seed"] = cfg.seed;
  summary["assignments"] = quant.assignments;
  if (!quant.selected.empty()) summary["selected"] = quant.selected;
  fs::path sidecar = out;
  sidecar.replace_extension(".json");
  write_json(sidecar, summary);

  Json brief = quant_summary(quant);
  brief["centers"] = out.string();
  brief["summary"] = sidecar.string();
  print_json(os, brief);
  return kExitOk;
}

Json plan_report(std::size_t d, std::size_t k, double alpha, std::size_t l, std::size_t s) {
  if (k == 0) {
    k = ratio_to_k(alpha, d);
  } else {
    alpha = static_cast<double>(k) / static_cast<double>(d);
  }
  if (k < 1) throw InvalidArgument("plan: k must be >= 1");
  const SplitPlan plan = plan_split(d, k, s);
  const ParamReport report = count_params(d, l, alpha, s);
  return Json{{"plan", to_json(plan)}, {"params", to_json(report)}};
}

int cmd_plan(std::size_t d, std::size_t k, double alpha, std::size_t l, std::size_t s,
             std::ostream& os) {
  print_json(os, plan_report(d, k, alpha, l, s));
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& os) {
  const Experiment exp = build_experiment(cfg);
  const ProtocolReport report = run_protocol(exp.task, exp.train, exp.quant, exp.enc);
  const TrainResult& tr = report.training;

  std::string history;
  for (const EpochRecord& rec : tr.history) {
    history += canonical_dump(Json{{"epoch", rec.epoch},
                                   {"loss", rec.loss},
                                   {"base_acc", rec.base_acc},
                                   {"lr", rec.lr}},
                              -1);
    history += '\n';
  }
  write_file(out_dir / "history.jsonl", history);
  write_file(out_dir / "params.ckpt", encode_container(checkpoint_container(tr.params, cfg.seed)));

  const double final_loss = tr.history.empty() ? tr.initial_loss : tr.history.back().loss;
  Json out{{"config", to_json(cfg)},
           {"mode", std::string(to_string(tr.params.mode))},
           {"quant", quant_summary(exp.quant)},
           {"param_count", tr.params.param_count()},
           {"coop_param_count", cfg.d * cfg.l},
           {"initial_loss", tr.initial_loss},
           {"final_loss", final_loss},
           {"initial_base_train_acc", tr.initial_base_acc},
           {"final_base_train_acc", tr.history.empty() ? tr.initial_base_acc
                                                       : tr.history.back().base_acc},
           {"base_acc", report.base_acc},
           {"new_acc", report.new_acc},
           {"harmonic", report.harmonic},
           {"gap", report.gap}};
  write_json(out_dir / "report.json", out);
  print_json(os, out);
  return kExitOk;
}

PromptParams load_checkpoint(const RunConfig& cfg, const Experiment& exp, const fs::path& path) {
  const Container c = decode_container(read_file(path), "CKPT");
  PromptParams params = params_from_container(c);
  std::vector<std::string> problems;
  const auto seed = c.header.value("seed", std::uint64_t{0});
  if (seed != cfg.seed) {
    problems.push_back("seed: checkpoint was trained with seed " + std::to_string(seed) +
                       " but the config has " + std::to_string(cfg.seed));
  }
  if (params.l != cfg.l) {
    problems.push_back("l: checkpoint has l = " + std::to_string(params.l) +
                       " but the config has " + std::to_string(cfg.l));
  }
  if (params.uses_coeffs() && params.coeffs.rows() != exp.quant.k) {
    problems.push_back("k: checkpoint coefficients expect " +
                       std::to_string(params.coeffs.rows()) + " centers, config gives " +
                       std::to_string(exp.quant.k));
  }
  if (params.uses_bias() && params.bias.plan.d != cfg.d) {
    problems.push_back("d: checkpoint plan has d = " + std::to_string(params.bias.plan.d) +
                       " but the config has " + std::to_string(cfg.d));
  }
  if (params.uses_context() && params.context.rows() != cfg.d) {
    problems.push_back("d: checkpoint context has " + std::to_string(params.context.rows()) +
                       " rows but the config has d = " + std::to_string(cfg.d));
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return params;
}

int cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& os) {
  const Experiment exp = build_experiment(cfg);
  const PromptParams params = load_checkpoint(cfg, exp, checkpoint);
  const ClassifierConfig classifier{cfg.tau};
  const double base = evaluate(params, exp.quant.centers, exp.task, Split::Base, exp.enc,
                               classifier);
  const double fresh = evaluate(params, exp.quant.centers, exp.task, Split::New, exp.enc,
                                classifier);
  print_json(os, Json{{"mode", std::string(to_string(params.mode))},
                      {"base", base},
                      {"new", fresh},
                      {"harmonic", harmonic_mean(base, fresh)},
                      {"gap", std::abs(base - fresh)}});
  return kExitOk;
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  const ToyEncoder enc =
      ToyEncoder::make(cfg.d, cfg.h, cfg.f, derive_seed(cfg.seed, kEncoderStream), cfg.gain);
  TaskSpec spec;
  spec.classes = cfg.classes;
  spec.shots = cfg.shots;
  spec.test_shots = 1;
  spec.t = cfg.t;
  spec.l = cfg.l;
  spec.seed = derive_seed(cfg.seed, kTaskStream);
  const Task task = synth_task(spec, enc);
  const EmbeddingDictionary dict = synthetic_dictionary(
      cfg.d, 4 * cfg.k, cfg.k, 0.3, derive_seed(cfg.seed, kDictionaryStream));
  const CompressedDictionary quant =
      kmeans(dict, cfg.k, 50, 0.0, derive_seed(cfg.seed, kQuantStream));

  std::vector<std::size_t> ids(cfg.classes);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const LossInputs in{quant.centers, task, task.train, ids, enc, ClassifierConfig{cfg.tau}};

  GradcheckReport report;
  for (TrainMode mode : cfg.modes) {
    ModeGradcheck result;
    result.mode = mode;
    for (std::size_t draw = 0; draw < cfg.draws; ++draw) {
      TrainConfig tc;
      tc.mode = mode;
      tc.l = cfg.l;
      tc.s = cfg.s;
      tc.seed = derive_seed(cfg.seed, 100 + draw);
      PromptParams params = init_prompt(tc, cfg.d, cfg.k, 0.0);

      // Unit-scale draws; factor entries keep |x| >= 0.2 so a step of h never
      // crosses the kink of |x| in the L1 normalizer.
      Rng rng(derive_seed(cfg.seed, 1000 + draw));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> magnitude(0.2, 1.0);
      std::bernoulli_distribution sign(0.5);
      if (params.uses_coeffs()) {
        for (double& v : params.coeffs.data()) v = normal(rng);
      }
      if (params.uses_context()) {
        for (double& v : params.context.data()) v = normal(rng);
      }
      if (params.uses_bias()) {
        for (Matrix& sub : params.bias.submatrices) {
          for (double& v : sub.data()) v = (sign(rng) ? 1.0 : -1.0) * magnitude(rng);
        }
      }

      const LossAndGrad analytic = forward_backward(params, in);
      const GradientSet numeric = fd_gradient(params, in, cfg.step);
      const GradientComparison cmp =
          compare_gradients(analytic.grads, numeric, cfg.rel_tol, cfg.abs_floor);
      ++result.draws;
      if (!cmp.pass) ++result.failed_draws;
      result.worst.entries += cmp.entries;
      result.worst.failures += cmp.failures;
      result.worst.max_rel_err = std::max(result.worst.max_rel_err, cmp.max_rel_err);
      result.worst.max_abs_err = std::max(result.worst.max_abs_err, cmp.max_abs_err);
    }
    result.worst.pass = result.worst.failures == 0;
    report.pass = report.pass && result.worst.pass;
    report.modes.push_back(result);
  }
  return report;
}

int cmd_gradcheck(const GradcheckConfig& cfg, std::ostream& os) {
  const GradcheckReport report = run_gradcheck(cfg);
  Json modes = Json::array();
  double worst = 0.0;
  for (const ModeGradcheck& m : report.modes) {
    worst = std::max(worst, m.worst.max_rel_err);
    modes.push_back(Json{{"mode", std::string(to_string(m.mode))},
                         {"draws", m.draws},
                         {"failed_draws", m.failed_draws},
                         {"entries", m.worst.entries},
                         {"failures", m.worst.failures},
                         {"max_rel_err", m.worst.max_rel_err},
                         {"max_abs_err", m.worst.max_abs_err},
                         {"pass", m.worst.pass}});
  }
  print_json(os, Json{{"config", to_json(cfg)},
                      {"modes", modes},
                      {"max_rel_err", worst},
                      {"pass", report.pass}});
  return report.pass ? kExitOk : kExitNumerical;
}

int cmd_analyze(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir,
                std::ostream& os) {
  const Experiment exp = build_experiment(cfg);
  const PromptParams params = load_checkpoint(cfg, exp, checkpoint);
  const Matrix context = materialize_context(params, exp.quant.centers);
  const SimilarityProfile sim = similarity_profile(context, exp.dict);

  Json out{{"mode", std::string(to_string(params.mode))}, {"bias_norms", nullptr}};
  // only CKCoOp has a d x k bias; for KronOnly the factors build the context itself
  const bool has_center_bias = params.mode == TrainMode::CKCoOp;
  BiasNormProfile norms;
  if (has_center_bias) {
    norms = bias_norm_profile(bias_matrix(params), cfg.threshold);
    out["bias_norms"] = to_json(norms);
  }
  out["similarity"] = to_json(sim);
  write_json(out_dir / "profiles.json", out);

  if (cfg.csv) {
    if (has_center_bias) {
      std::string csv = "rank,norm\n";
      for (std::size_t i = 0; i < norms.sorted_norms.size(); ++i) {
        csv += std::to_string(i) + "," + fmt17(norms.sorted_norms[i]) + "\n";
      }
      write_file(out_dir / "bias_norms.csv", csv);
    }
    std::string csv = "token,max_similarity\n";
    for (std::size_t i = 0; i < sim.max_similarity.size(); ++i) {
      csv += std::to_string(i) + "," + fmt17(sim.max_similarity[i]) + "\n";
    }
    write_file(out_dir / "similarity.csv", csv);
  }
  print_json(os, out);
  return kExitOk;
}

}  // namespace ckctx
