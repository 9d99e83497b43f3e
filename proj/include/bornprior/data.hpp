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


#ifndef BORNPRIOR_DATA_HPP
#define BORNPRIOR_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/nn.hpp"

namespace bornprior {

/// Base class of IDX decoding failures.
class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxDimensionError : public IdxError {
 public:
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Unsigned-byte IDX array: images (3 dims) or labels (1 dim).
struct IdxArray {
  std::uint32_t magic = kIdxLabelsMagic;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  bool operator==(const IdxArray&) const = default;
};

IdxArray parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_idx(const IdxArray& array);

/// Reads a file, transparently inflating gzip content.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
IdxArray read_idx(const std::filesystem::path& path);

struct ImageDataset {
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // count x height x width, in [-1, 1]
  std::vector<int> labels;     // empty when unlabeled
  std::string source;

  std::size_t image_size() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  std::span<const double> image(std::size_t i) const;
  bool labeled() const { return !labels.empty(); }
};

/// Maps byte v to 2 v / 255 - 1.
double normalize_pixel(std::uint8_t v);
ImageDataset normalize(const IdxArray& images, const IdxArray* labels = nullptr);

/// Loads (optionally gzipped) IDX images and labels; `limit` > 0 keeps the first `limit` images.
ImageDataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels, int limit = 0);

/// Average-pools each image by `factor` in both directions.
ImageDataset downsample(const ImageDataset& data, int factor);

/// Images (and labels) at the given indices.
ImageDataset subset(const ImageDataset& data, std::span<const std::size_t> indices);

/// Uniform distribution over all full-row and full-column patterns of a rows x cols grid
/// (pixel (r, c) is bit r cols + c).
EmpiricalDistribution bars_and_stripes(int rows, int cols);

/// Seeded epoch permutation cut into full batches; the trailing partial batch is dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch);

/// Batch tensor [B, 1, H, W].
nn::Tensor gather_images(const ImageDataset& data, std::span<const std::size_t> indices);

/// Writes images [B, 1, H, W] (values in [-1, 1]) as a binary PGM grid.
void write_pgm_grid(const std::filesystem::path& path, const nn::Tensor& images, int columns);
/// Writes a probability histogram as a PGM bar chart.
void write_pgm_histogram(const std::filesystem::path& path, std::span<const double> probabilities, int height = 64);

}  // namespace bornprior

#endif
