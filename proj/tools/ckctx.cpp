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

// ckctx command-line entry point. Every config key is also a kebab-case flag.

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ckctx/commands.hpp"

namespace {

using ckctx::Json;

std::string kebab(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

/// Registers one flag per config key; set flags land in the override map.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void attach(CLI::App* app, const Json& defaults) {
    app->add_option("--config", config_path, "JSON config file");
    for (const auto& [key, value] : defaults.items()) {
      std::string& slot = values[key];
      if (value.is_boolean()) {
        options[key] = app->add_flag_callback(
            "--" + kebab(key), [&slot] { slot = "true"; }, "(default false)");
      } else {
        options[key] = app->add_option("--" + kebab(key), slot,
                                       "(default " + (value.is_string() ? value.get<std::string>()
                                                                        : value.dump()) +
                                           ")");
      }
    }
  }

  ckctx::Overrides overrides() const {
    ckctx::Overrides out;
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) out[key] = values.at(key);
    }
    return out;
  }

  std::optional<std::filesystem::path> path() const {
    if (config_path.empty()) return std::nullopt;
    return std::filesystem::path(config_path);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured prompt contexts from compressed embedding dictionaries"};
  // -h would collide with the --h (hidden width) key
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);

  const Json run_defaults = ckctx::to_json(ckctx::RunConfig{});
  const Json grad_defaults = ckctx::to_json(ckctx::GradcheckConfig{});

  auto* make_dict = app.add_subcommand("make-dictionary", "write a synthetic d x m dictionary");
  KeyFlags make_flags;
  make_flags.attach(make_dict, run_defaults);
  std::string make_out;
  make_dict->add_option("--out", make_out, "output CKMX path")->required();

  auto* quantize = app.add_subcommand("quantize", "compress a CKMX dictionary to k centers");
  KeyFlags quant_flags;
  quant_flags.attach(quantize, run_defaults);
  std::string quant_out;
  quantize->add_option("--out", quant_out, "output CKMX path for the centers")->required();

  auto* plan = app.add_subcommand("plan", "print the split plan and parameter counts");
  std::size_t plan_d = 512;
  std::size_t plan_k = 0;
  double plan_alpha = 0.375;
  std::size_t plan_l = 16;
  std::size_t plan_s = 2;
  plan->add_option("--d", plan_d, "embedding dimension")->capture_default_str();
  plan->add_option("--k", plan_k, "centers (0: round(alpha d))")->capture_default_str();
  plan->add_option("--alpha", plan_alpha, "dictionary ratio")->capture_default_str();
  plan->add_option("--l", plan_l, "context length")->capture_default_str();
  plan->add_option("--s", plan_s, "sub-matrix size")->capture_default_str();

  auto* train = app.add_subcommand("train", "train one mode on the toy task");
  KeyFlags train_flags;
  train_flags.attach(train, run_defaults);
  std::string train_out;
  train->add_option("--out", train_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "score a checkpoint on base and new classes");
  KeyFlags eval_flags;
  eval_flags.attach(eval, run_defaults);
  std::string eval_ckpt;
  eval->add_option("--checkpoint", eval_ckpt, "CKPT file from train")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  KeyFlags grad_flags;
  grad_flags.attach(gradcheck, grad_defaults);

  auto* analyze = app.add_subcommand("analyze", "bias-norm and similarity profiles");
  KeyFlags analyze_flags;
  analyze_flags.attach(analyze, run_defaults);
  std::string analyze_ckpt;
  std::string analyze_out;
  analyze->add_option("--checkpoint", analyze_ckpt, "CKPT file from train")->required();
  analyze->add_option("--out", analyze_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ckctx::kExitValidation;
  }

  return ckctx::run_guarded(
      [&]() -> int {
        if (*make_dict) {
          return ckctx::cmd_make_dictionary(
              ckctx::load_run_config(make_flags.path(), make_flags.overrides()), make_out,
              std::cout);
        }
        if (*quantize) {
          return ckctx::cmd_quantize(
              ckctx::load_run_config(quant_flags.path(), quant_flags.overrides()), quant_out,
              std::cout);
        }
        if (*plan) return ckctx::cmd_plan(plan_d, plan_k, plan_alpha, plan_l, plan_s, std::cout);
        if (*train) {
          return ckctx::cmd_train(
              ckctx::load_run_config(train_flags.path(), train_flags.overrides()), train_out,
              std::cout);
        }
        if (*eval) {
          return ckctx::cmd_eval(
              ckctx::load_run_config(eval_flags.path(), eval_flags.overrides()), eval_ckpt,
              std::cout);
        }
        if (*gradcheck) {
          return ckctx::cmd_gradcheck(
              ckctx::load_gradcheck_config(grad_flags.path(), grad_flags.overrides()),
              std::cout);
        }
        return ckctx::cmd_analyze(
            ckctx::load_run_config(analyze_flags.path(), analyze_flags.overrides()),
            analyze_ckpt, analyze_out, std::cout);
      },
      std::cerr);
}
