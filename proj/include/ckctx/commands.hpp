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

#ifndef CKCTX_COMMANDS_HPP
#define CKCTX_COMMANDS_HPP

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "ckctx/analysis.hpp"
#include "ckctx/config.hpp"
#include "ckctx/context.hpp"

namespace ckctx {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs `body`, printing any library error to `err` and mapping it to an exit
/// code: numerical failures give 3, everything else 2.
int run_guarded(const std::function<int()>& body, std::ostream& err);

Json to_json(const SplitPlan& plan);
Json to_json(const ParamReport& report);
Json to_json(const BiasNormProfile& profile);
Json to_json(const SimilarityProfile& profile);

/// Writes a synthetic d x m dictionary as CKMX.
int cmd_make_dictionary(const RunConfig& cfg, const std::filesystem::path& out,
                        std::ostream& os);

/// Quantizes the CKMX dictionary at cfg.dictionary. Centers go to `out`, the
/// summary (assignments, inertia) to the same path with a .json extension.
int cmd_quantize(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& os);

/// Prints the split plan and parameter report for a d x l context.
Json plan_report(std::size_t d, std::size_t k, double alpha, std::size_t l, std::size_t s);
int cmd_plan(std::size_t d, std::size_t k, double alpha, std::size_t l, std::size_t s,
             std::ostream& os);

/// Trains one mode; writes history.jsonl, params.ckpt and report.json to out_dir.
int cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& os);

/// Scores a checkpoint on the rebuilt task: base, new, harmonic mean and gap.
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& os);

struct ModeGradcheck {
  TrainMode mode = TrainMode::CKCoOp;
  std::size_t draws = 0;
  std::size_t failed_draws = 0;
  GradientComparison worst;  // entries and failures summed over draws, errors maxed
};

struct GradcheckReport {
  std::vector<ModeGradcheck> modes;
  bool pass = true;
};

/// Compares analytic gradients with central differences over random draws.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);
/// Exits 3 when any entry violates the bound.
int cmd_gradcheck(const GradcheckConfig& cfg, std::ostream& os);

/// Writes profiles.json (and bias_norms.csv / similarity.csv when cfg.csv) for a
/// checkpoint.
int cmd_analyze(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                const std::filesystem::path& out_dir, std::ostream& os);

/// Loads a checkpoint and checks it against the world a config rebuilds.
PromptParams load_checkpoint(const RunConfig& cfg, const Experiment& exp,
                             const std::filesystem::path& path);

}  // namespace ckctx

#endif  // CKCTX_COMMANDS_HPP
