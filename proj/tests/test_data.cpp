// Copyright 2026 The bornprior Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "bornprior/data.hpp"
#include "bornprior/errors.hpp"

namespace {

using namespace bornprior;

const std::filesystem::path kData = BORNPRIOR_TEST_DATA_DIR;

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> fixture(std::uint32_t magic, std::vector<std::uint32_t> dims, std::size_t payload) {
  std::vector<std::uint8_t> out = be32(magic);
  for (auto d : dims) {
    const auto b = be32(d);
    out.insert(out.end(), b.begin(), b.end());
  }
  for (std::size_t i = 0; i < payload; ++i) out.push_back(static_cast<std::uint8_t>(i * 7));
  return out;
}

TEST(Idx, ParsesHandBuiltArrays) {
  const auto images = parse_idx(fixture(0x00000803, {2, 3, 4}, 24));
  EXPECT_EQ(images.magic, kIdxImagesMagic);
  EXPECT_EQ(images.dims, (std::vector<std::uint32_t>{2, 3, 4}));
  ASSERT_EQ(images.payload.size(), 24u);
  EXPECT_EQ(images.payload[3], 21);
  const auto labels = parse_idx(fixture(0x00000801, {5}, 5));
  EXPECT_EQ(labels.dims, (std::vector<std::uint32_t>{5}));
  EXPECT_EQ(write_idx(labels), fixture(0x00000801, {5}, 5));
}

TEST(Idx, MalformedFixturesRaiseDistinctErrors) {
  auto wrong_magic = fixture(0x00000803, {1, 2, 2}, 4);
  wrong_magic[2] = 0x0D;  // 0x0D03: float element type
  EXPECT_THROW(parse_idx(wrong_magic), IdxMagicError);

  const auto truncated = fixture(0x00000803, {2, 28, 28}, 2 * 28 * 28 - 10);
  EXPECT_THROW(parse_idx(truncated), IdxTruncatedError);
  EXPECT_THROW(parse_idx(std::vector<std::uint8_t>{0, 0}), IdxTruncatedError);
  EXPECT_THROW(parse_idx(fixture(0x00000803, {2, 28}, 0)), IdxTruncatedError);

  const auto overflow = fixture(0x00000803, {0xFFFFFFFFu, 0xFFFFFFFFu, 2}, 16);
  EXPECT_THROW(parse_idx(overflow), IdxDimensionError);
  EXPECT_THROW(parse_idx(fixture(0x00000801, {3}, 4)), IdxDimensionError);

  // The three failures are distinguishable but share a base.
  EXPECT_THROW(parse_idx(overflow), IdxError);
  bool magic_caught_as_truncated = false;
  try {
    parse_idx(wrong_magic);
  } catch (const IdxTruncatedError&) {
    magic_caught_as_truncated = true;
  } catch (const IdxError&) {
  }
  EXPECT_FALSE(magic_caught_as_truncated);
}

TEST(Idx, WriteRejectsInconsistentArrays) {
  IdxArray a;
  a.magic = kIdxImagesMagic;
  a.dims = {1, 2};
  EXPECT_THROW(write_idx(a), IdxDimensionError);
  a.dims = {1, 2, 2};
  a.payload = {1, 2, 3};
  EXPECT_THROW(write_idx(a), IdxDimensionError);
  a.magic = 0x1234;
  EXPECT_THROW(write_idx(a), IdxMagicError);
}

TEST(Idx, RealMnistFileRoundTripsByteExact) {
  for (const char* name : {"mnist5k-images-idx3-ubyte.gz", "mnist5k-labels-idx1-ubyte.gz"}) {
    const auto bytes = read_file_bytes(kData / name);
    const auto parsed = parse_idx(bytes);
    EXPECT_EQ(write_idx(parsed), bytes) << name;
  }
  const auto images = read_idx(kData / "mnist5k-images-idx3-ubyte.gz");
  EXPECT_EQ(images.dims, (std::vector<std::uint32_t>{5000, 28, 28}));
  // Uncompressed files read the same way.
  const auto raw = std::filesystem::temp_directory_path() / "bornprior_labels.idx";
  const auto bytes = read_file_bytes(kData / "mnist5k-labels-idx1-ubyte.gz");
  {
    std::ofstream os(raw, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  EXPECT_EQ(read_file_bytes(raw), bytes);
  std::filesystem::remove(raw);
  EXPECT_THROW(read_file_bytes(kData / "missing.idx"), ConfigError);
}

TEST(Dataset, NormalizationEndpoints) {
  EXPECT_EQ(normalize_pixel(0), -1.0);
  EXPECT_EQ(normalize_pixel(255), 1.0);
  EXPECT_NEAR(normalize_pixel(128), 2.0 * 128 / 255 - 1, 1e-15);
  for (int v = 0; v < 255; ++v)
    EXPECT_LT(normalize_pixel(static_cast<std::uint8_t>(v)), normalize_pixel(static_cast<std::uint8_t>(v + 1)));
}

TEST(Dataset, LoadsMnistSubset) {
  const auto d = load_mnist(kData / "mnist5k-images-idx3-ubyte.gz", kData / "mnist5k-labels-idx1-ubyte.gz", 1000);
  EXPECT_EQ(d.count, 1000);
  EXPECT_EQ(d.height, 28);
  EXPECT_EQ(d.width, 28);
  EXPECT_EQ(d.pixels.size(), 1000u * 784u);
  EXPECT_EQ(d.labels.size(), 1000u);
  for (double p : d.pixels) {
    ASSERT_GE(p, -1.0);
    ASSERT_LE(p, 1.0);
  }
  for (int l : d.labels) {
    ASSERT_GE(l, 0);
    ASSERT_LE(l, 9);
  }
  const auto full = load_mnist(kData / "mnist5k-images-idx3-ubyte.gz", kData / "mnist5k-labels-idx1-ubyte.gz");
  std::set<int> classes(full.labels.begin(), full.labels.end());
  EXPECT_EQ(classes.size(), 10u);
  EXPECT_THROW(load_mnist(kData / "mnist5k-labels-idx1-ubyte.gz", kData / "mnist5k-labels-idx1-ubyte.gz"), ConfigError);
}

TEST(Dataset, DownsampleAveragesBlocks) {
  ImageDataset d;
  d.count = 1;
  d.height = 4;
  d.width = 4;
  for (int i = 0; i < 16; ++i) d.pixels.push_back(i);
  d.labels = {3};
  const auto s = downsample(d, 2);
  EXPECT_EQ(s.height, 2);
  EXPECT_EQ(s.width, 2);
  EXPECT_EQ(s.pixels, (std::vector<double>{2.5, 4.5, 10.5, 12.5}));
  EXPECT_EQ(s.labels, d.labels);
  EXPECT_THROW(downsample(d, 3), ConfigError);
  const std::vector<std::size_t> idx{0};
  EXPECT_EQ(subset(d, idx).pixels, d.pixels);
  const auto t = gather_images(d, idx);
  EXPECT_EQ(t.shape(), (nn::Shape{1, 1, 4, 4}));
}

bool is_bars_or_stripes(std::uint64_t idx, int rows, int cols) {
  auto px = [&](int r, int c) { return (idx >> (rows * cols - 1 - (r * cols + c))) & 1; };
  bool rows_const = true, cols_const = true;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (px(r, c) != px(r, 0)) rows_const = false;
      if (px(r, c) != px(0, c)) cols_const = false;
    }
  return rows_const || cols_const;
}

TEST(BarsAndStripes, SupportAndUniformity) {
  const auto d = bars_and_stripes(2, 2);
  EXPECT_EQ(d.counts().size(), 6u);
  for (const char* s : {"0000", "1111", "1100", "0011", "1010", "0101"})
    EXPECT_NEAR(d.frequency(string_to_index(s)), 1.0 / 6, 1e-15) << s;
  for (int rows = 1; rows <= 4; ++rows) {
    for (int cols = 1; cols <= 4; ++cols) {
      const auto b = bars_and_stripes(rows, cols);
      std::size_t valid = 0;
      for (std::uint64_t i = 0; i < (std::uint64_t{1} << (rows * cols)); ++i) valid += is_bars_or_stripes(i, rows, cols);
      EXPECT_EQ(b.counts().size(), valid);
      EXPECT_EQ(b.counts().size(), (std::size_t{1} << rows) + (std::size_t{1} << cols) - 2);
      for (const auto& [idx, c] : b.counts()) {
        EXPECT_TRUE(is_bars_or_stripes(idx, rows, cols));
        EXPECT_EQ(c, 1u);
      }
    }
  }
  EXPECT_THROW(bars_and_stripes(0, 2), ConfigError);
}

TEST(Batches, SeededPartition) {
  const auto a = epoch_batches(600, 100, 1, 0);
  ASSERT_EQ(a.size(), 6u);
  EXPECT_EQ(a, epoch_batches(600, 100, 1, 0));
  EXPECT_NE(a, epoch_batches(600, 100, 1, 1));
  EXPECT_NE(a, epoch_batches(600, 100, 2, 0));
  std::set<std::size_t> seen;
  for (const auto& b : a) {
    EXPECT_EQ(b.size(), 100u);
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(seen.size(), 600u);
  const auto r = epoch_batches(605, 100, 1, 0);
  EXPECT_EQ(r.size(), 6u);
  EXPECT_THROW(epoch_batches(10, 11, 1, 0), ConfigError);
  EXPECT_THROW(epoch_batches(10, 0, 1, 0), ConfigError);
}

TEST(Pgm, GridAndHistogramFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "bornprior_pgm";
  std::filesystem::remove_all(dir);
  nn::Tensor imgs({3, 1, 2, 2}, -1.0);
  imgs[0] = 1.0;
  write_pgm_grid(dir / "grid.pgm", imgs, 2);
  std::ifstream is(dir / "grid.pgm", std::ios::binary);
  std::string magic;
  int w, h, maxv;
  is >> magic >> w >> h >> maxv;
  is.get();
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w, 2 * 3 + 1);
  EXPECT_EQ(h, 2 * 3 + 1);
  EXPECT_EQ(maxv, 255);
  std::vector<char> pix(static_cast<std::size_t>(w * h));
  is.read(pix.data(), static_cast<std::streamsize>(pix.size()));
  EXPECT_EQ(is.gcount(), w * h);
  EXPECT_EQ(static_cast<unsigned char>(pix[static_cast<std::size_t>(1 * w + 1)]), 255);
  EXPECT_EQ(static_cast<unsigned char>(pix[static_cast<std::size_t>(1 * w + 2)]), 0);
  write_pgm_histogram(dir / "hist.pgm", std::vector<double>{0.1, 0.5, 0.4}, 10);
  EXPECT_GT(std::filesystem::file_size(dir / "hist.pgm"), 30u);
  EXPECT_THROW(write_pgm_grid(dir / "bad.pgm", nn::Tensor({2, 3}), 2), ConfigError);
  std::filesystem::remove_all(dir);
}

}  // namespace
