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

#include "ckctx/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ckctx/error.hpp"

namespace ckctx {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(bits & 0xFFu));
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    bits = static_cast<U>((bits << 8) | static_cast<unsigned char>(bytes[offset + i]));
  }
  return static_cast<T>(bits);
}

void require(std::string_view bytes, std::size_t offset, std::size_t count, const char* what) {
  if (bytes.size() < offset || bytes.size() - offset < count) {
    throw FormatError(std::string("truncated input while reading ") + what, bytes.size());
  }
}

void dump_value(const Json& j, int indent, int depth, std::string& out) {
  const auto newline = [&](int level) {
    if (indent < 0) return;
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent * level), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_value(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out.push_back('}');
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out.push_back('[');
      bool first = true;
      for (const auto& item : j) {
        if (!first) out.push_back(',');
        first = false;
        newline(depth + 1);
        dump_value(item, indent, depth + 1, out);
      }
      newline(depth);
      out.push_back(']');
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
      return;
  }
}

Json plan_json(const SplitPlan& plan) {
  Json dims = Json::array();
  for (const auto& [r, c] : plan.dims) dims.push_back(Json::array({r, c}));
  return Json{{"d", plan.d}, {"k", plan.k}, {"s", plan.s}, {"dims", dims}};
}

Matrix features_matrix(const std::vector<Example>& examples, std::size_t f) {
  Matrix out(examples.size(), f);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (std::size_t j = 0; j < f; ++j) out(i, j) = examples[i].feature.at(j);
  }
  return out;
}

Matrix labels_matrix(const std::vector<Example>& examples) {
  Matrix out(examples.size(), 1);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    out(i, 0) = static_cast<double>(examples[i].label);
  }
  return out;
}

std::vector<Example> examples_from(const Matrix& features, const Matrix& labels) {
  if (features.rows() != labels.rows() || labels.cols() != 1) {
    throw FormatError("task container: feature and label blocks disagree", 0);
  }
  std::vector<Example> out;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    Example ex;
    ex.feature.assign(&features(i, 0), &features(i, 0) + features.cols());
    ex.label = static_cast<std::size_t>(labels(i, 0));
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

void append_ckmx(std::string& out, const Matrix& m) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (m.rows() > kMax || m.cols() > kMax) {
    throw DimensionError("CKMX: dimensions exceed the 32-bit header fields");
  }
  if (m.empty()) {
    throw DimensionError("CKMX: cannot encode a matrix with a zero dimension");
  }
  out.reserve(out.size() + kCkmxHeaderSize + 8 * m.size());
  out.append("CKMX", 4);
  put_le<std::uint16_t>(out, kCkmxVersion);
  put_le<std::uint8_t>(out, kCkmxFloat64);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
}

std::string encode_ckmx(const Matrix& m) {
  std::string out;
  append_ckmx(out, m);
  return out;
}

Matrix decode_ckmx(std::string_view bytes, std::size_t& offset) {
  const std::size_t start = offset;
  require(bytes, start, kCkmxHeaderSize, "CKMX header");
  if (bytes.substr(start, 4) != "CKMX") {
    throw FormatError("bad CKMX magic", start);
  }
  const auto version = get_le<std::uint16_t>(bytes, start + 4);
  if (version != kCkmxVersion) {
    throw FormatError("unsupported CKMX version " + std::to_string(version), start + 4);
  }
  const auto dtype = get_le<std::uint8_t>(bytes, start + 6);
  if (dtype != kCkmxFloat64) {
    throw FormatError("unsupported CKMX dtype " + std::to_string(dtype), start + 6);
  }
  const std::size_t rows = get_le<std::uint32_t>(bytes, start + 7);
  const std::size_t cols = get_le<std::uint32_t>(bytes, start + 11);
  if (rows == 0 || cols == 0) {
    throw FormatError("CKMX matrix has a zero dimension", start + 7);
  }
  const std::size_t payload_at = start + kCkmxHeaderSize;
  const std::size_t count = rows * cols;
  if (count > (bytes.size() - payload_at) / 8) {
    throw FormatError("CKMX payload truncated: expected " + std::to_string(8 * count) +
                          " bytes, found " + std::to_string(bytes.size() - payload_at),
                      bytes.size());
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, payload_at + 8 * i));
  }
  offset = payload_at + 8 * count;
  return Matrix(rows, cols, std::move(data));
}

Matrix decode_ckmx(std::string_view bytes) {
  std::size_t offset = 0;
  Matrix m = decode_ckmx(bytes, offset);
  if (offset != bytes.size()) {
    throw FormatError("trailing bytes after CKMX payload", offset);
  }
  return m;
}

std::string encode_container(const Container& c) {
  if (c.magic.size() != 4) {
    throw InvalidArgument("container magic must be four bytes");
  }
  const std::string header = canonical_dump(c.header, -1);
  std::string out = c.magic;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  for (const Matrix& m : c.blocks) append_ckmx(out, m);
  return out;
}

Container decode_container(std::string_view bytes, std::string_view expected_magic) {
  require(bytes, 0, 8, "container header");
  if (bytes.substr(0, 4) != expected_magic) {
    throw FormatError("bad container magic, expected " + std::string(expected_magic), 0);
  }
  Container c;
  c.magic = std::string(expected_magic);
  const std::size_t header_len = get_le<std::uint32_t>(bytes, 4);
  require(bytes, 8, header_len, "container JSON header");
  try {
    c.header = Json::parse(bytes.substr(8, header_len));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("container JSON header: ") + e.what(), 8 + e.byte);
  }
  std::size_t offset = 8 + header_len;
  while (offset < bytes.size()) {
    c.blocks.push_back(decode_ckmx(bytes, offset));
  }
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidArgument("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_ckmx(const std::filesystem::path& path, const Matrix& m) {
  write_file(path, encode_ckmx(m));
}

Matrix read_ckmx(const std::filesystem::path& path) { return decode_ckmx(read_file(path)); }

std::string canonical_dump(const Json& j, int indent) {
  std::string out;
  dump_value(j, indent, 0, out);
  return out;
}

Container checkpoint_container(const PromptParams& params, std::uint64_t seed) {
  Container c;
  c.magic = "CKPT";
  c.header = Json{{"format", "ckctx-checkpoint"},
                  {"version", 1},
                  {"mode", std::string(to_string(params.mode))},
                  {"alpha", params.alpha},
                  {"l", params.l},
                  {"seed", seed}};
  if (params.uses_bias()) {
    c.header["s"] = params.bias.plan.s;
    c.header["norm_mode"] = std::string(to_string(params.bias.norm_mode));
    c.header["plan"] = plan_json(params.bias.plan);
  }
  for (const Matrix* block : params.blocks()) c.blocks.push_back(*block);
  return c;
}

PromptParams params_from_container(const Container& c) {
  PromptParams params;
  try {
    params.mode = parse_train_mode(c.header.at("mode").get<std::string>());
    params.alpha = c.header.at("alpha").get<double>();
    params.l = c.header.at("l").get<std::size_t>();
    if (params.uses_bias()) {
      const Json& plan = c.header.at("plan");
      params.bias.plan = plan_split(plan.at("d").get<std::size_t>(),
                                    plan.at("k").get<std::size_t>(),
                                    plan.at("s").get<std::size_t>());
      params.bias.norm_mode = parse_norm_mode(c.header.at("norm_mode").get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what(), 8);
  }
  std::size_t next = 0;
  const auto take = [&]() -> Matrix {
    if (next >= c.blocks.size()) throw FormatError("checkpoint: missing matrix block", 0);
    return c.blocks[next++];
  };
  if (params.uses_coeffs()) params.coeffs = take();
  if (params.uses_bias()) {
    for (std::size_t i = 0; i < params.bias.plan.dims.size(); ++i) {
      params.bias.submatrices.push_back(take());
    }
    params.bias.validate();
  }
  if (params.uses_context()) params.context = take();
  if (next != c.blocks.size()) throw FormatError("checkpoint: unexpected extra blocks", 0);
  return params;
}

Container task_container(const Task& task) {
  Container c;
  c.magic = "CKTK";
  const std::size_t f = task.concepts.empty() ? 0 : task.concepts.front().size();
  c.header = Json{{"format", "ckctx-task"},
                  {"version", 1},
                  {"classes", task.num_classes()},
                  {"d", task.dim()},
                  {"f", f},
                  {"shots", task.shots},
                  {"base_ids", task.base_ids},
                  {"new_ids", task.new_ids}};
  for (const Matrix& tokens : task.class_tokens) c.blocks.push_back(tokens);
  Matrix concepts(task.concepts.size(), f);
  for (std::size_t i = 0; i < task.concepts.size(); ++i) {
    for (std::size_t j = 0; j < f; ++j) concepts(i, j) = task.concepts[i][j];
  }
  c.blocks.push_back(std::move(concepts));
  c.blocks.push_back(task.ideal_context);
  c.blocks.push_back(features_matrix(task.train, f));
  c.blocks.push_back(labels_matrix(task.train));
  c.blocks.push_back(features_matrix(task.test, f));
  c.blocks.push_back(labels_matrix(task.test));
  return c;
}

Task task_from_container(const Container& c) {
  Task task;
  std::size_t classes = 0;
  try {
    classes = c.header.at("classes").get<std::size_t>();
    task.shots = c.header.at("shots").get<std::size_t>();
    task.base_ids = c.header.at("base_ids").get<std::vector<std::size_t>>();
    task.new_ids = c.header.at("new_ids").get<std::vector<std::size_t>>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("task header: ") + e.what(), 8);
  }
  if (c.blocks.size() != classes + 6) {
    throw FormatError("task container: expected " + std::to_string(classes + 6) +
                          " blocks, found " + std::to_string(c.blocks.size()),
                      0);
  }
  for (std::size_t i = 0; i < classes; ++i) task.class_tokens.push_back(c.blocks[i]);
  const Matrix& concepts = c.blocks[classes];
  for (std::size_t i = 0; i < concepts.rows(); ++i) {
    task.concepts.emplace_back(&concepts(i, 0), &concepts(i, 0) + concepts.cols());
  }
  task.ideal_context = c.blocks[classes + 1];
  task.train = examples_from(c.blocks[classes + 2], c.blocks[classes + 3]);
  task.test = examples_from(c.blocks[classes + 4], c.blocks[classes + 5]);
  return task;
}

}  // namespace ckctx
