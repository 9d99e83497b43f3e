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

#include "bornprior/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"

namespace bornprior {

namespace {

constexpr std::uint64_t kMaxIdxElements = std::uint64_t{1} << 32;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::size_t expected_dims(std::uint32_t magic) {
  if (magic == kIdxImagesMagic) return 3;
  if (magic == kIdxLabelsMagic) return 1;
  return 0;
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IdxTruncatedError("IDX header truncated");
  IdxArray out;
  out.magic = read_be32(bytes.data());
  const std::size_t rank = expected_dims(out.magic);
  if (rank == 0) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08X", out.magic);
    throw IdxMagicError(std::string("wrong IDX magic ") + buf);
  }
  if (bytes.size() < 4 + 4 * rank) throw IdxTruncatedError("IDX dimension header truncated");
  std::uint64_t elements = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    const std::uint32_t n = read_be32(bytes.data() + 4 + 4 * d);
    out.dims.push_back(n);
    elements *= n;
    if (elements > kMaxIdxElements) throw IdxDimensionError("IDX dimensions overflow the element limit");
  }
  const std::size_t header = 4 + 4 * rank;
  const std::size_t available = bytes.size() - header;
  if (available < elements) {
    throw IdxTruncatedError("IDX payload truncated: expected " + std::to_string(elements) + " bytes, found " +
                            std::to_string(available));
  }
  if (available > elements) throw IdxDimensionError("IDX payload longer than its dimensions");
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> write_idx(const IdxArray& array) {
  const std::size_t rank = expected_dims(array.magic);
  if (rank == 0) throw IdxMagicError("cannot write IDX with unsupported magic");
  if (array.dims.size() != rank) throw IdxDimensionError("IDX dimension count does not match magic");
  std::uint64_t elements = 1;
  for (std::uint32_t n : array.dims) elements *= n;
  if (elements != array.payload.size()) throw IdxDimensionError("IDX payload size does not match dimensions");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * rank + array.payload.size());
  write_be32(out, array.magic);
  for (std::uint32_t n : array.dims) write_be32(out, n);
  out.insert(out.end(), array.payload.begin(), array.payload.end());
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("file not found: " + path.string());
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw StateError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof buf);
    if (n < 0) {
      gzclose(f);
      throw StateError("read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  gzclose(f);
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) { return parse_idx(read_file_bytes(path)); }

std::span<const double> ImageDataset::image(std::size_t i) const {
  if (i >= static_cast<std::size_t>(count)) throw ConfigError("image index out of range");
  return std::span<const double>(pixels).subspan(i * image_size(), image_size());
}

double normalize_pixel(std::uint8_t v) { return 2.0 * static_cast<double>(v) / 255.0 - 1.0; }

ImageDataset normalize(const IdxArray& images, const IdxArray* labels) {
  if (images.magic != kIdxImagesMagic) throw ConfigError("expected an IDX image array");
  ImageDataset out;
  out.count = static_cast<int>(images.dims[0]);
  out.height = static_cast<int>(images.dims[1]);
  out.width = static_cast<int>(images.dims[2]);
  out.pixels.resize(images.payload.size());
  std::transform(images.payload.begin(), images.payload.end(), out.pixels.begin(), normalize_pixel);
  if (labels != nullptr) {
    if (labels->magic != kIdxLabelsMagic) throw ConfigError("expected an IDX label array");
    if (labels->dims[0] != images.dims[0]) throw ConfigError("image and label counts differ");
    out.labels.assign(labels->payload.begin(), labels->payload.end());
  }
  return out;
}

ImageDataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels, int limit) {
  const IdxArray img = read_idx(images);
  const IdxArray lab = read_idx(labels);
  ImageDataset out = normalize(img, &lab);
  out.source = images.string();
  if (limit > 0 && limit < out.count) {
    out.count = limit;
    out.pixels.resize(static_cast<std::size_t>(limit) * out.image_size());
    out.labels.resize(static_cast<std::size_t>(limit));
  }
  return out;
}

ImageDataset downsample(const ImageDataset& data, int factor) {
  if (factor < 1 || data.height % factor != 0 || data.width % factor != 0) {
    throw ConfigError("downsample factor must divide the image size");
  }
  ImageDataset out;
  out.count = data.count;
  out.height = data.height / factor;
  out.width = data.width / factor;
  out.labels = data.labels;
  out.source = data.source;
  out.pixels.assign(static_cast<std::size_t>(out.count) * out.image_size(), 0.0);
  const double scale = 1.0 / (factor * factor);
  for (int n = 0; n < data.count; ++n) {
    const auto src = data.image(static_cast<std::size_t>(n));
    double* dst = out.pixels.data() + static_cast<std::size_t>(n) * out.image_size();
    for (int r = 0; r < data.height; ++r)
      for (int c = 0; c < data.width; ++c) {
        dst[(r / factor) * out.width + c / factor] += scale * src[static_cast<std::size_t>(r * data.width + c)];
      }
  }
  return out;
}

ImageDataset subset(const ImageDataset& data, std::span<const std::size_t> indices) {
  ImageDataset out;
  out.count = static_cast<int>(indices.size());
  out.height = data.height;
  out.width = data.width;
  out.source = data.source;
  out.pixels.reserve(indices.size() * data.image_size());
  for (std::size_t i : indices) {
    const auto img = data.image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    if (data.labeled()) out.labels.push_back(data.labels[i]);
  }
  return out;
}

EmpiricalDistribution bars_and_stripes(int rows, int cols) {
  if (rows < 1 || cols < 1 || rows * cols > 24) throw ConfigError("bars_and_stripes needs 1 <= rows, cols and rows cols <= 24");
  const int n = rows * cols;
  std::set<std::uint64_t> patterns;
  auto bit = [n](int pos) { return std::uint64_t{1} << (n - 1 - pos); };
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << rows); ++mask) {
    std::uint64_t idx = 0;
    for (int r = 0; r < rows; ++r)
      if ((mask >> r) & 1U)
        for (int c = 0; c < cols; ++c) idx |= bit(r * cols + c);
    patterns.insert(idx);
  }
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cols); ++mask) {
    std::uint64_t idx = 0;
    for (int c = 0; c < cols; ++c)
      if ((mask >> c) & 1U)
        for (int r = 0; r < rows; ++r) idx |= bit(r * cols + c);
    patterns.insert(idx);
  }
  EmpiricalDistribution out(n);
  for (std::uint64_t p : patterns) out.add(p);
  return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (batch_size > count) throw ConfigError("batch_size exceeds dataset size");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "epoch", {epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b + batch_size <= count; b += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(b + batch_size));
  }
  return out;
}

nn::Tensor gather_images(const ImageDataset& data, std::span<const std::size_t> indices) {
  nn::Tensor out({static_cast<int>(indices.size()), 1, data.height, data.width});
  double* dst = out.data();
  for (std::size_t i : indices) {
    const auto img = data.image(i);
    dst = std::copy(img.begin(), img.end(), dst);
  }
  return out;
}

namespace {

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& pixels) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StateError("cannot write " + path.string());
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

}  // namespace

void write_pgm_grid(const std::filesystem::path& path, const nn::Tensor& images, int columns) {
  if (images.rank() != 4 || images.dim(1) != 1) throw ConfigError("PGM grid expects [B, 1, H, W] images");
  if (columns < 1) throw ConfigError("PGM grid needs at least one column");
  const int b = images.dim(0), h = images.dim(2), w = images.dim(3);
  const int cols = std::min(columns, std::max(b, 1));
  const int rows = (b + cols - 1) / cols;
  const int gw = cols * (w + 1) + 1, gh = rows * (h + 1) + 1;
  std::vector<std::uint8_t> pix(static_cast<std::size_t>(gw) * gh, 0);
  for (int n = 0; n < b; ++n) {
    const int oy = (n / cols) * (h + 1) + 1, ox = (n % cols) * (w + 1) + 1;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = std::clamp(images[static_cast<std::size_t>((n * h + y) * w + x)], -1.0, 1.0);
        pix[static_cast<std::size_t>((oy + y) * gw + ox + x)] = static_cast<std::uint8_t>(std::lround((v + 1.0) * 127.5));
      }
  }
  write_pgm(path, gw, gh, pix);
}

void write_pgm_histogram(const std::filesystem::path& path, std::span<const double> probabilities, int height) {
  if (probabilities.empty() || height < 1) throw ConfigError("histogram needs bins and a positive height");
  const double top = *std::max_element(probabilities.begin(), probabilities.end());
  const int w = static_cast<int>(probabilities.size());
  std::vector<std::uint8_t> pix(static_cast<std::size_t>(w) * height, 255);
  for (int x = 0; x < w; ++x) {
    const int bar = top > 0.0 ? static_cast<int>(std::lround(probabilities[static_cast<std::size_t>(x)] / top * height)) : 0;
    for (int y = height - bar; y < height; ++y) pix[static_cast<std::size_t>(y * w + x)] = 0;
  }
  write_pgm(path, w, height, pix);
}

}  // namespace bornprior
