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

#ifndef CKCTX_IO_HPP
#define CKCTX_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ckctx/linalg.hpp"
#include "ckctx/model.hpp"
#include "ckctx/training.hpp"

namespace ckctx {

using Json = nlohmann::ordered_json;

// CKMX layout, all integers little-endian:
//   0  char[4]  "CKMX"
//   4  u16      version (1)
//   6  u8       dtype (1 = IEEE-754 binary64)
//   7  u32      rows
//  11  u32      cols
//  15  f64[]    rows * cols entries, row-major
inline constexpr std::size_t kCkmxHeaderSize = 15;
inline constexpr std::uint16_t kCkmxVersion = 1;
inline constexpr std::uint8_t kCkmxFloat64 = 1;

std::string encode_ckmx(const Matrix& m);
void append_ckmx(std::string& out, const Matrix& m);

/// Decodes one CKMX block starting at `offset` and advances it past the block.
/// Errors report the absolute byte offset.
Matrix decode_ckmx(std::string_view bytes, std::size_t& offset);
Matrix decode_ckmx(std::string_view bytes);

// Containers (CKPT checkpoints, CKTK tasks):
//   char[4] magic, u32 header length, UTF-8 JSON header, then CKMX blocks.
struct Container {
  std::string magic;
  Json header;
  std::vector<Matrix> blocks;
};

std::string encode_container(const Container& c);
Container decode_container(std::string_view bytes, std::string_view expected_magic);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

void write_ckmx(const std::filesystem::path& path, const Matrix& m);
Matrix read_ckmx(const std::filesystem::path& path);

/// JSON text with fixed key order, two-space indent and every non-integral
/// number printed with 17 significant digits.
std::string canonical_dump(const Json& j, int indent = 2);

/// Checkpoint: header carries mode, plan dims, alpha, s, l, norm mode and seed;
/// blocks are the learnable matrices in PromptParams::blocks() order.
Container checkpoint_container(const PromptParams& params, std::uint64_t seed);
PromptParams params_from_container(const Container& c);

/// Task: header carries ids and dims; blocks are each class token matrix, then
/// train features (n x f), train labels (n x 1), test features, test labels.
Container task_container(const Task& task);
Task task_from_container(const Container& c);

}  // namespace ckctx

#endif  // CKCTX_IO_HPP
