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

#ifndef CKCTX_CONFIG_HPP
#define CKCTX_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ckctx/io.hpp"
#include "ckctx/model.hpp"
#include "ckctx/quantizer.hpp"
#include "ckctx/training.hpp"

namespace ckctx {

/// Every knob of a run. Serialized as one flat JSON object; CLI flags are the
/// same keys in kebab-case.
struct RunConfig {
  // context
  double alpha = 0.375;
  std::size_t k = 0;  // 0: derive from alpha
  std::size_t s = 2;
  std::size_t l = 16;
  NormMode norm = NormMode::L1;
  InitMode init = InitMode::Normal;
  QuantMethod quant = QuantMethod::KMeans;
  std::size_t kmeans_iters = 100;
  double kmeans_tol = 0.0;

  // pretrained dictionary; an empty path means a synthetic one
  std::string dictionary;
  std::size_t d = 64;
  std::size_t m = 512;
  std::size_t clusters = 48;
  double spread = 0.3;

  // frozen encoder
  std::size_t h = 16;
  std::size_t f = 16;
  double gain = 5.0;
  double tau = 0.07;

  // task
  std::size_t classes = 8;
  std::size_t shots = 16;
  std::size_t test_shots = 32;
  std::size_t t = 4;
  double noise = 0.1;
  double offset_scale = 3.0;
  double token_jitter = 0.05;

  // optimization
  TrainMode mode = TrainMode::CKCoOp;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double lr = 0.2;
  Schedule schedule = Schedule::Cosine;
  std::uint64_t seed = 1;

  // analysis
  double threshold = 1e-4;
  bool csv = false;

  /// k if set, round(alpha d) otherwise.
  std::size_t effective_k() const;
};

/// Small instance for the analytic-versus-numeric gradient comparison.
struct GradcheckConfig {
  std::size_t d = 8;
  std::size_t k = 4;
  std::size_t l = 3;
  std::size_t classes = 4;
  std::size_t s = 2;
  std::size_t h = 6;
  std::size_t f = 5;
  std::size_t t = 2;
  std::size_t shots = 3;
  double gain = 2.0;
  double tau = 0.07;
  std::size_t draws = 100;
  double step = 1e-5;
  double rel_tol = 1e-6;
  double abs_floor = 1e-9;
  std::uint64_t seed = 1;
  std::vector<TrainMode> modes{TrainMode::CKCoOp, TrainMode::CKCoOpNoBias,
                               TrainMode::CoOpBaseline};
};

/// Raw flag values keyed by config key (snake_case).
using Overrides = std::map<std::string, std::string>;

Json to_json(const RunConfig& cfg);
Json to_json(const GradcheckConfig& cfg);

/// Applies the keys of `j` over `base`. Unknown keys, wrong types and out-of-range
/// values are all collected and thrown together as one ConfigError.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
GradcheckConfig gradcheck_config_from_json(const Json& j, GradcheckConfig base = {});

/// Keys accepted by each config, in serialization order.
std::vector<std::string> run_config_keys();
std::vector<std::string> gradcheck_config_keys();

/// Defaults, then the file (if any), then CKCTX_SEED, then flag overrides.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const Overrides& overrides);
GradcheckConfig load_gradcheck_config(const std::optional<std::filesystem::path>& path,
                                      const Overrides& overrides);

/// Sub-seed streams derived from the run seed.
inline constexpr std::uint64_t kDictionaryStream = 10;
inline constexpr std::uint64_t kQuantStream = 11;
inline constexpr std::uint64_t kEncoderStream = 12;
inline constexpr std::uint64_t kTaskStream = 13;
inline constexpr std::uint64_t kTrainStream = 14;

/// The frozen world and training setup a RunConfig describes.
struct Experiment {
  EmbeddingDictionary dict;
  CompressedDictionary quant;
  ToyEncoder enc;
  Task task;
  TrainConfig train;
};

EmbeddingDictionary build_dictionary(const RunConfig& cfg);
CompressedDictionary build_quantization(const RunConfig& cfg, const EmbeddingDictionary& dict);
TaskSpec task_spec(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
Experiment build_experiment(const RunConfig& cfg);

}  // namespace ckctx

#endif  // CKCTX_CONFIG_HPP
