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

#include "ckctx/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <string_view>
#include <utility>

#include "ckctx/error.hpp"
#include "ckctx/random.hpp"

namespace ckctx {

namespace {

using Problems = std::vector<std::string>;

template <class Cfg>
struct Field {
  std::string key;
  bool textual = false;  // flag values are taken verbatim as strings
  std::function<Json(const Cfg&)> get;
  std::function<void(Cfg&, const Json&, Problems&)> set;
};

template <class Cfg, class T>
Field<Cfg> count_field(const char* key, T Cfg::*member, T min = 0) {
  return {key, false, [member](const Cfg& c) { return Json(c.*member); },
          [key = std::string(key), member, min](Cfg& c, const Json& v, Problems& out) {
            if (!v.is_number_integer()) {
              out.push_back(key + ": expected a non-negative integer, got " + v.dump());
              return;
            }
            if (!v.is_number_unsigned() || v.get<T>() < min) {
              out.push_back(key + ": must be >= " + std::to_string(min) + ", got " + v.dump());
              return;
            }
            c.*member = v.get<T>();
          }};
}

template <class Cfg>
Field<Cfg> real_field(const char* key, double Cfg::*member, bool (*ok)(double),
                      const char* rule) {
  return {key, false, [member](const Cfg& c) { return Json(c.*member); },
          [key = std::string(key), member, ok, rule](Cfg& c, const Json& v, Problems& out) {
            if (!v.is_number()) {
              out.push_back(key + ": expected a number, got " + v.dump());
              return;
            }
            const double x = v.get<double>();
            if (!std::isfinite(x) || !ok(x)) {
              out.push_back(key + ": " + rule + ", got " + v.dump());
              return;
            }
            c.*member = x;
          }};
}

template <class Cfg, class E>
Field<Cfg> enum_field(const char* key, E Cfg::*member, E (*parse)(std::string_view),
                      std::string_view (*name)(E)) {
  return {key, true, [member, name](const Cfg& c) { return Json(std::string(name(c.*member))); },
          [key = std::string(key), member, parse](Cfg& c, const Json& v, Problems& out) {
            if (!v.is_string()) {
              out.push_back(key + ": expected a string, got " + v.dump());
              return;
            }
            try {
              c.*member = parse(v.get<std::string>());
            } catch (const InvalidArgument& e) {
              out.push_back(key + ": " + e.what());
            }
          }};
}

template <class Cfg>
Field<Cfg> string_field(const char* key, std::string Cfg::*member) {
  return {key, true, [member](const Cfg& c) { return Json(c.*member); },
          [key = std::string(key), member](Cfg& c, const Json& v, Problems& out) {
            if (!v.is_string()) {
              out.push_back(key + ": expected a string, got " + v.dump());
              return;
            }
            c.*member = v.get<std::string>();
          }};
}

template <class Cfg>
Field<Cfg> bool_field(const char* key, bool Cfg::*member) {
  return {key, false, [member](const Cfg& c) { return Json(c.*member); },
          [key = std::string(key), member](Cfg& c, const Json& v, Problems& out) {
            if (!v.is_boolean()) {
              out.push_back(key + ": expected true or false, got " + v.dump());
              return;
            }
            c.*member = v.get<bool>();
          }};
}

bool positive(double x) { return x > 0.0; }
bool non_negative(double x) { return x >= 0.0; }

const std::vector<Field<RunConfig>>& run_fields() {
  using C = RunConfig;
  static const std::vector<Field<C>> fields = {
      real_field<C>("alpha", &C::alpha, positive, "must be > 0"),
      count_field<C, std::size_t>("k", &C::k),
      count_field<C, std::size_t>("s", &C::s, 2),
      count_field<C, std::size_t>("l", &C::l, 1),
      enum_field<C, NormMode>("norm", &C::norm, parse_norm_mode, to_string),
      enum_field<C, InitMode>("init", &C::init, parse_init_mode, to_string),
      enum_field<C, QuantMethod>("quant", &C::quant, parse_quant_method, to_string),
      count_field<C, std::size_t>("kmeans_iters", &C::kmeans_iters, 1),
      real_field<C>("kmeans_tol", &C::kmeans_tol, non_negative, "must be >= 0"),
      string_field<C>("dictionary", &C::dictionary),
      count_field<C, std::size_t>("d", &C::d, 1),
      count_field<C, std::size_t>("m", &C::m, 2),
      count_field<C, std::size_t>("clusters", &C::clusters),
      real_field<C>("spread", &C::spread, non_negative, "must be >= 0"),
      count_field<C, std::size_t>("h", &C::h, 1),
      count_field<C, std::size_t>("f", &C::f, 1),
      real_field<C>("gain", &C::gain, positive, "must be > 0"),
      real_field<C>("tau", &C::tau, positive, "must be > 0"),
      count_field<C, std::size_t>("classes", &C::classes, 2),
      count_field<C, std::size_t>("shots", &C::shots, 1),
      count_field<C, std::size_t>("test_shots", &C::test_shots, 1),
      count_field<C, std::size_t>("t", &C::t, 1),
      real_field<C>("noise", &C::noise, non_negative, "must be >= 0"),
      real_field<C>("offset_scale", &C::offset_scale, non_negative, "must be >= 0"),
      real_field<C>("token_jitter", &C::token_jitter, non_negative, "must be >= 0"),
      enum_field<C, TrainMode>("mode", &C::mode, parse_train_mode, to_string),
      count_field<C, std::size_t>("epochs", &C::epochs, 1),
      count_field<C, std::size_t>("batch_size", &C::batch_size, 1),
      real_field<C>("lr", &C::lr, non_negative, "must be >= 0"),
      enum_field<C, Schedule>("schedule", &C::schedule, parse_schedule, to_string),
      count_field<C, std::uint64_t>("seed", &C::seed),
      real_field<C>("threshold", &C::threshold, non_negative, "must be >= 0"),
      bool_field<C>("csv", &C::csv),
  };
  return fields;
}

Field<GradcheckConfig> modes_field() {
  using C = GradcheckConfig;
  return {"modes", true,
          [](const C& c) {
            Json out = Json::array();
            for (TrainMode mode : c.modes) out.push_back(std::string(to_string(mode)));
            return out;
          },
          [](C& c, const Json& v, Problems& out) {
            // a flag value is one comma-separated string
            std::vector<std::string> names;
            if (v.is_string()) {
              std::string_view text = v.get_ref<const std::string&>();
              while (!text.empty()) {
                const std::size_t comma = text.find(',');
                names.emplace_back(text.substr(0, comma));
                text = comma == std::string_view::npos ? "" : text.substr(comma + 1);
              }
            } else if (v.is_array()) {
              for (const Json& item : v) {
                if (!item.is_string()) {
                  out.push_back("modes: expected strings, got " + item.dump());
                  return;
                }
                names.push_back(item.get<std::string>());
              }
            } else {
              out.push_back("modes: expected a list of mode names, got " + v.dump());
              return;
            }
            std::vector<TrainMode> modes;
            for (const std::string& name : names) {
              try {
                modes.push_back(parse_train_mode(name));
              } catch (const InvalidArgument& e) {
                out.push_back(std::string("modes: ") + e.what());
                return;
              }
            }
            if (modes.empty()) {
              out.push_back("modes: need at least one mode");
              return;
            }
            c.modes = std::move(modes);
          }};
}

const std::vector<Field<GradcheckConfig>>& gradcheck_fields() {
  using C = GradcheckConfig;
  static const std::vector<Field<C>> fields = {
      count_field<C, std::size_t>("d", &C::d, 1),
      count_field<C, std::size_t>("k", &C::k, 1),
      count_field<C, std::size_t>("l", &C::l, 1),
      count_field<C, std::size_t>("classes", &C::classes, 2),
      count_field<C, std::size_t>("s", &C::s, 2),
      count_field<C, std::size_t>("h", &C::h, 1),
      count_field<C, std::size_t>("f", &C::f, 1),
      count_field<C, std::size_t>("t", &C::t, 1),
      count_field<C, std::size_t>("shots", &C::shots, 1),
      real_field<C>("gain", &C::gain, positive, "must be > 0"),
      real_field<C>("tau", &C::tau, positive, "must be > 0"),
      count_field<C, std::size_t>("draws", &C::draws, 1),
      real_field<C>("step", &C::step, positive, "must be > 0"),
      real_field<C>("rel_tol", &C::rel_tol, positive, "must be > 0"),
      real_field<C>("abs_floor", &C::abs_floor, non_negative, "must be >= 0"),
      count_field<C, std::uint64_t>("seed", &C::seed),
      modes_field(),
  };
  return fields;
}

template <class Cfg>
Json dump_fields(const std::vector<Field<Cfg>>& fields, const Cfg& cfg) {
  Json out = Json::object();
  for (const auto& field : fields) out[field.key] = field.get(cfg);
  return out;
}

template <class Cfg>
void apply_fields(const std::vector<Field<Cfg>>& fields, const Json& j, Cfg& cfg,
                  Problems& out) {
  if (!j.is_object()) {
    out.push_back("configuration must be a JSON object");
    return;
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& field : fields) {
      if (field.key == key) {
        field.set(cfg, value, out);
        known = true;
        break;
      }
    }
    if (!known) out.push_back("unknown key '" + key + "'");
  }
}

void check_run(const RunConfig& c, Problems& out) {
  if (c.classes % 2 != 0) {
    out.push_back("classes: must be even so base and new halves match, got " +
                  std::to_string(c.classes));
  }
  const bool has_factors = c.mode == TrainMode::CKCoOp || c.mode == TrainMode::KronOnly;
  if (has_factors && c.init == InitMode::Zero && c.norm != NormMode::None) {
    out.push_back("init: zero-initialized factors cannot be " +
                  std::string(to_string(c.norm)) + "-normalized; use norm \"none\"");
  }
  // a rejected alpha keeps its previous (valid) value, so effective_k cannot throw
  const std::size_t k = c.effective_k();
  if (k < 1) out.push_back("alpha: round(alpha * d) must be >= 1");
  if (c.dictionary.empty() && k > c.m) {
    out.push_back("k: " + std::to_string(k) + " centers exceed the " + std::to_string(c.m) +
                  " dictionary columns");
  }
}

void check_gradcheck(const GradcheckConfig& c, Problems& out) {
  if (c.classes % 2 != 0) {
    out.push_back("classes: must be even, got " + std::to_string(c.classes));
  }
}

template <class Cfg>
Json merged_document(const std::optional<std::filesystem::path>& path,
                     const std::vector<Field<Cfg>>& fields, const Overrides& overrides,
                     Problems& out) {
  Json doc = Json::object();
  if (path) {
    std::string text;
    try {
      text = read_file(*path);
    } catch (const Error& e) {
      throw ConfigError({std::string("config: ") + e.what()});
    }
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError({"config: " + path->string() + " is not valid JSON: " + e.what()});
    }
    if (!doc.is_object()) {
      throw ConfigError({"config: " + path->string() + " must hold a JSON object"});
    }
  }

  if (const char* env = std::getenv("CKCTX_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t seed = 0;
    const std::string_view text(env);
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || end != text.data() + text.size()) {
      out.push_back("CKCTX_SEED: expected a non-negative integer, got '" + std::string(text) +
                    "'");
    } else {
      doc["seed"] = seed;
    }
  }

  for (const auto& [key, raw] : overrides) {
    const Field<Cfg>* field = nullptr;
    for (const auto& candidate : fields) {
      if (candidate.key == key) field = &candidate;
    }
    if (field == nullptr) {
      out.push_back("unknown key '" + key + "'");
      continue;
    }
    if (field->textual) {
      doc[key] = raw;
      continue;
    }
    try {
      doc[key] = Json::parse(raw);
    } catch (const Json::parse_error&) {
      out.push_back(key + ": cannot parse '" + raw + "'");
      doc.erase(key);
    }
  }
  return doc;
}

}  // namespace

std::size_t RunConfig::effective_k() const { return k != 0 ? k : ratio_to_k(alpha, d); }

Json to_json(const RunConfig& cfg) { return dump_fields(run_fields(), cfg); }
Json to_json(const GradcheckConfig& cfg) { return dump_fields(gradcheck_fields(), cfg); }

RunConfig run_config_from_json(const Json& j, RunConfig base) {
  Problems problems;
  apply_fields(run_fields(), j, base, problems);
  check_run(base, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return base;
}

GradcheckConfig gradcheck_config_from_json(const Json& j, GradcheckConfig base) {
  Problems problems;
  apply_fields(gradcheck_fields(), j, base, problems);
  check_gradcheck(base, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return base;
}

std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const auto& field : run_fields()) keys.push_back(field.key);
  return keys;
}

std::vector<std::string> gradcheck_config_keys() {
  std::vector<std::string> keys;
  for (const auto& field : gradcheck_fields()) keys.push_back(field.key);
  return keys;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const Overrides& overrides) {
  Problems problems;
  const Json doc = merged_document(path, run_fields(), overrides, problems);
  RunConfig cfg;
  apply_fields(run_fields(), doc, cfg, problems);
  check_run(cfg, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

GradcheckConfig load_gradcheck_config(const std::optional<std::filesystem::path>& path,
                                      const Overrides& overrides) {
  Problems problems;
  const Json doc = merged_document(path, gradcheck_fields(), overrides, problems);
  GradcheckConfig cfg;
  apply_fields(gradcheck_fields(), doc, cfg, problems);
  check_gradcheck(cfg, problems);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

EmbeddingDictionary build_dictionary(const RunConfig& cfg) {
  if (cfg.dictionary.empty()) {
    return synthetic_dictionary(cfg.d, cfg.m, cfg.clusters, cfg.spread,
                                derive_seed(cfg.seed, kDictionaryStream));
  }
  Matrix imported = read_ckmx(cfg.dictionary);
  if (imported.rows() != cfg.d) {
    throw ConfigError({"d: config says " + std::to_string(cfg.d) + " but " + cfg.dictionary +
                       " has " + std::to_string(imported.rows()) + " rows"});
  }
  return EmbeddingDictionary(std::move(imported), cfg.dictionary);
}

CompressedDictionary build_quantization(const RunConfig& cfg, const EmbeddingDictionary& dict) {
  const std::size_t k = cfg.effective_k();
  if (k < 1 || k > dict.vocab_size()) {
    throw ConfigError({"k: need 1 <= k <= " + std::to_string(dict.vocab_size()) + ", got " +
                       std::to_string(k)});
  }
  const std::uint64_t seed = derive_seed(cfg.seed, kQuantStream);
  CompressedDictionary out = cfg.quant == QuantMethod::KMeans
                                 ? kmeans(dict, k, cfg.kmeans_iters, cfg.kmeans_tol, seed)
                                 : random_select(dict, k, seed);
  out.alpha = cfg.k != 0 ? 0.0 : cfg.alpha;
  return out;
}

TaskSpec task_spec(const RunConfig& cfg) {
  TaskSpec spec;
  spec.classes = cfg.classes;
  spec.shots = cfg.shots;
  spec.test_shots = cfg.test_shots;
  spec.t = cfg.t;
  spec.l = cfg.l;
  spec.noise = cfg.noise;
  spec.offset_scale = cfg.offset_scale;
  spec.token_jitter = cfg.token_jitter;
  spec.seed = derive_seed(cfg.seed, kTaskStream);
  return spec;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig train;
  train.epochs = cfg.epochs;
  train.batch_size = cfg.batch_size;
  train.lr = cfg.lr;
  train.schedule = cfg.schedule;
  train.seed = derive_seed(cfg.seed, kTrainStream);
  train.mode = cfg.mode;
  train.l = cfg.l;
  train.s = cfg.s;
  train.norm = cfg.norm;
  train.init = cfg.init;
  train.classifier.tau = cfg.tau;
  return train;
}

Experiment build_experiment(const RunConfig& cfg) {
  EmbeddingDictionary dict = build_dictionary(cfg);
  CompressedDictionary quant = build_quantization(cfg, dict);
  ToyEncoder enc =
      ToyEncoder::make(cfg.d, cfg.h, cfg.f, derive_seed(cfg.seed, kEncoderStream), cfg.gain);
  Task task = synth_task(task_spec(cfg), enc);
  return {std::move(dict), std::move(quant), std::move(enc), std::move(task), train_config(cfg)};
}

}  // namespace ckctx
