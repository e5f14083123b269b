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

#include <gtest/gtest.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>

#include "ckctx/error.hpp"
#include "ckctx/io.hpp"
#include "ckctx/random.hpp"

namespace ckctx {
namespace {

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

std::uint64_t read_le(const std::string& s, std::size_t at, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  }
  return v;
}

TEST(Ckmx, HeaderLayoutIsExact) {
  const Matrix m = Matrix::from_rows({{1.0, -2.5, 3.0}, {0.0, 4.0, 1e-300}});
  const std::string bytes = encode_ckmx(m);
  ASSERT_EQ(bytes.size(), 15u + 8u * 6u);
  EXPECT_EQ(bytes.substr(0, 4), "CKMX");
  EXPECT_EQ(read_le(bytes, 4, 2), 1u);
  EXPECT_EQ(read_le(bytes, 6, 1), 1u);
  EXPECT_EQ(read_le(bytes, 7, 4), 2u);
  EXPECT_EQ(read_le(bytes, 11, 4), 3u);
  // row-major little-endian payload
  EXPECT_EQ(read_le(bytes, 15, 8), bits(1.0));
  EXPECT_EQ(read_le(bytes, 15 + 8, 8), bits(-2.5));
  EXPECT_EQ(read_le(bytes, 15 + 8 * 3, 8), bits(0.0));
}

TEST(Ckmx, RoundTripIsBitExactIncludingSpecialValues) {
  Matrix m(2, 4);
  m(0, 0) = -0.0;
  m(0, 1) = std::numeric_limits<double>::infinity();
  m(0, 2) = std::numeric_limits<double>::denorm_min();
  m(0, 3) = std::numeric_limits<double>::quiet_NaN();
  m(1, 0) = std::numeric_limits<double>::max();
  m(1, 1) = 0.1;
  m(1, 2) = -1.0 / 3.0;
  m(1, 3) = 6.02214076e23;
  const Matrix back = decode_ckmx(encode_ckmx(m));
  ASSERT_EQ(back.rows(), 2u);
  ASSERT_EQ(back.cols(), 4u);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(bits(back.data()[i]), bits(m.data()[i]));
  }
}

TEST(Ckmx, RandomRoundTrips) {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = random_normal(1 + rng() % 9, 1 + rng() % 9, rng, 0.0, 1e3);
    EXPECT_EQ(decode_ckmx(encode_ckmx(m)), m);
  }
}

TEST(Ckmx, ZeroDimensionsAreRejected) {
  EXPECT_THROW(encode_ckmx(Matrix()), DimensionError);
  std::string bytes = encode_ckmx(Matrix(1, 1, 2.0));
  bytes[7] = 0;  // rows = 0
  try {
    decode_ckmx(bytes);
    ADD_FAILURE() << "no FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 7u);
  }
}

TEST(Ckmx, MalformedInputsReportOffsets) {
  const std::string good = encode_ckmx(Matrix::from_rows({{1, 2}}));
  const auto offset_of = [](const std::string& bytes) -> std::size_t {
    try {
      decode_ckmx(bytes);
    } catch (const FormatError& e) {
      return e.offset();
    }
    ADD_FAILURE() << "no FormatError";
    return 0;
  };
  std::string bad_magic = good;
  bad_magic[1] = 'X';
  EXPECT_EQ(offset_of(bad_magic), 0u);
  std::string bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(offset_of(bad_version), 4u);
  std::string bad_dtype = good;
  bad_dtype[6] = 2;
  EXPECT_EQ(offset_of(bad_dtype), 6u);
  EXPECT_EQ(offset_of(good.substr(0, 10)), 10u);  // header itself truncated
  EXPECT_EQ(offset_of(good.substr(0, good.size() - 1)), good.size() - 1);
  EXPECT_EQ(offset_of(good + "x"), good.size());
}

TEST(Container, RoundTripsHeaderAndBlocks) {
  Container c;
  c.magic = "CKPT";
  c.header = Json{{"b", 1}, {"a", 0.5}};
  c.blocks = {Matrix::identity(2), Matrix::from_rows({{3, 4, 5}})};
  const std::string bytes = encode_container(c);
  const Container back = decode_container(bytes, "CKPT");
  EXPECT_EQ(back.header, c.header);
  EXPECT_EQ(back.blocks, c.blocks);
  EXPECT_THROW(decode_container(bytes, "CKTK"), FormatError);
  EXPECT_THROW(decode_container(bytes.substr(0, 6), "CKPT"), FormatError);
}

TEST(Checkpoint, RoundTripsEveryMode) {
  for (TrainMode mode : {TrainMode::CKCoOp, TrainMode::CKCoOpNoBias, TrainMode::CoOpBaseline,
                         TrainMode::KronOnly}) {
    TrainConfig tc;
    tc.mode = mode;
    tc.l = 4;
    tc.seed = 3;
    const PromptParams p = init_prompt(tc, 16, 6, 0.375);
    const Container c =
        decode_container(encode_container(checkpoint_container(p, 99)), "CKPT");
    EXPECT_EQ(c.header.at("seed").get<std::uint64_t>(), 99u);
    EXPECT_EQ(params_from_container(c), p) << to_string(mode);
  }
}

TEST(Checkpoint, MissingBlockIsAFormatError) {
  TrainConfig tc;
  tc.l = 2;
  Container c = checkpoint_container(init_prompt(tc, 8, 4, 0.5), 1);
  c.blocks.pop_back();
  EXPECT_THROW(params_from_container(c), FormatError);
}

TEST(TaskContainer, RoundTrips) {
  const ToyEncoder enc = ToyEncoder::make(8, 4, 3, 2);
  TaskSpec spec;
  spec.classes = 4;
  spec.shots = 2;
  spec.test_shots = 3;
  spec.l = 5;
  const Task task = synth_task(spec, enc);
  const Container c = decode_container(encode_container(task_container(task)), "CKTK");
  EXPECT_EQ(task_from_container(c), task);
}

TEST(CanonicalDump, SeventeenDigitsAndFixedOrder) {
  const Json j{{"z", 0.1}, {"a", 1}, {"m", Json::array({1.5, -2})}, {"t", true}};
  EXPECT_EQ(canonical_dump(j, -1), R"({"z":0.10000000000000001,"a":1,"m":[1.5,-2],"t":true})");
  const std::string pretty = canonical_dump(j);
  EXPECT_NE(pretty.find("\n  \"z\": 0.10000000000000001"), std::string::npos);
  EXPECT_EQ(Json::parse(pretty), j);
  EXPECT_EQ(canonical_dump(Json(std::numeric_limits<double>::quiet_NaN()), -1), "null");
  EXPECT_EQ(canonical_dump(Json(1.0), -1), "1");
}

TEST(Files, WriteThenReadCreatesDirectories) {
  const auto dir = std::filesystem::temp_directory_path() / "ckctx_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  write_ckmx(dir / "m.ckmx", m);
  EXPECT_EQ(read_ckmx(dir / "m.ckmx"), m);
  EXPECT_THROW(read_file(dir / "missing.ckmx"), InvalidArgument);
  std::filesystem::remove_all(dir.parent_path());
}

}  // namespace
}  // namespace ckctx
