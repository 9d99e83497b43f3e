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

#include "bornprior/bits.hpp"

#include <algorithm>
#include <stdexcept>

#include "bornprior/errors.hpp"

namespace bornprior {

std::uint64_t bits_to_index(std::span<const std::uint8_t> bits) {
  std::uint64_t index = 0;
  for (std::uint8_t b : bits) index = (index << 1) | (b & 1u);
  return index;
}

void index_to_bits(std::uint64_t index, std::span<std::uint8_t> out) {
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>((index >> (n - 1 - i)) & 1u);
}

std::string index_to_string(std::uint64_t index, int width) {
  std::string s(static_cast<std::size_t>(width), '0');
  for (int i = 0; i < width; ++i) {
    if ((index >> (width - 1 - i)) & 1u) s[static_cast<std::size_t>(i)] = '1';
  }
  return s;
}

std::uint64_t string_to_index(std::string_view s) {
  if (s.empty() || s.size() > 63) throw ConfigError("bitstring width must be in [1, 63]");
  std::uint64_t index = 0;
  for (char c : s) {
    if (c != '0' && c != '1') throw ConfigError("bitstring contains non-binary character: " + std::string(s));
    index = (index << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return index;
}

std::string_view basis_name(Basis b) {
  switch (b) {
    case Basis::computational: return "computational";
    case Basis::post_rotated: return "post_rotated";
    case Basis::concatenated: return "concatenated";
  }
  return "computational";
}

Basis parse_basis(std::string_view name) {
  if (name == "computational") return Basis::computational;
  if (name == "post_rotated") return Basis::post_rotated;
  if (name == "concatenated") return Basis::concatenated;
  throw ConfigError("unknown basis: " + std::string(name));
}

SampleBatch::SampleBatch(int width, Basis basis) : width_(width), basis_(basis) {
  if (width < 1 || width > 63) throw ConfigError("sample width must be in [1, 63]");
}

std::span<const std::uint8_t> SampleBatch::row(std::size_t i) const {
  const auto w = static_cast<std::size_t>(width_);
  return std::span<const std::uint8_t>(bits_).subspan(i * w, w);
}

std::span<std::uint8_t> SampleBatch::row(std::size_t i) {
  const auto w = static_cast<std::size_t>(width_);
  return std::span<std::uint8_t>(bits_).subspan(i * w, w);
}

std::string SampleBatch::row_string(std::size_t i) const {
  std::string s;
  for (std::uint8_t b : row(i)) s.push_back(b ? '1' : '0');
  return s;
}

void SampleBatch::push_back(std::span<const std::uint8_t> bits) {
  if (static_cast<int>(bits.size()) != width_) throw ConfigError("bitstring width mismatch");
  bits_.insert(bits_.end(), bits.begin(), bits.end());
}

void SampleBatch::push_index(std::uint64_t index) {
  const std::size_t old = bits_.size();
  bits_.resize(old + static_cast<std::size_t>(width_));
  index_to_bits(index, std::span<std::uint8_t>(bits_).subspan(old));
}

void SampleBatch::append(const SampleBatch& other) {
  if (other.empty()) return;
  if (other.width_ != width_) throw ConfigError("bitstring width mismatch");
  bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
}

SampleBatch SampleBatch::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) throw std::out_of_range("SampleBatch::slice out of range");
  SampleBatch out(width_, basis_);
  const auto w = static_cast<std::size_t>(width_);
  out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(begin * w),
                   bits_.begin() + static_cast<std::ptrdiff_t>((begin + count) * w));
  return out;
}

SampleBatch concatenate(const SampleBatch& s, const SampleBatch& t) {
  if (s.size() != t.size()) throw ConfigError("concatenate: row counts differ");
  SampleBatch out(s.width() + t.width(), Basis::concatenated);
  out.reserve(s.size());
  std::vector<std::uint8_t> row(static_cast<std::size_t>(s.width() + t.width()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto a = s.row(i);
    auto b = t.row(i);
    std::copy(a.begin(), a.end(), row.begin());
    std::copy(b.begin(), b.end(), row.begin() + static_cast<std::ptrdiff_t>(a.size()));
    out.push_back(row);
  }
  return out;
}

EmpiricalDistribution::EmpiricalDistribution(int n_bits) : n_bits_(n_bits) {
  if (n_bits < 1 || n_bits > 63) throw ConfigError("distribution width must be in [1, 63]");
}

EmpiricalDistribution EmpiricalDistribution::from_batch(const SampleBatch& batch) {
  EmpiricalDistribution d(batch.width());
  d.add(batch);
  return d;
}

std::uint64_t EmpiricalDistribution::count(std::uint64_t index) const {
  auto it = counts_.find(index);
  return it == counts_.end() ? 0 : it->second;
}

double EmpiricalDistribution::frequency(std::uint64_t index) const {
  if (total_ == 0) return 0.0;
  return static_cast<double>(count(index)) / static_cast<double>(total_);
}

void EmpiricalDistribution::add(std::uint64_t index, std::uint64_t count) {
  if (n_bits_ < 63 && (index >> n_bits_) != 0) throw ConfigError("bitstring wider than distribution");
  if (count == 0) return;
  counts_[index] += count;
  total_ += count;
}

void EmpiricalDistribution::add(const SampleBatch& batch) {
  if (batch.empty()) return;
  if (batch.width() != n_bits_) throw ConfigError("bitstring width mismatch");
  for (std::size_t i = 0; i < batch.size(); ++i) add(batch.index(i));
}

EmpiricalDistribution EmpiricalDistribution::marginal(int first, int width) const {
  if (first < 0 || width < 1 || first + width > n_bits_) throw ConfigError("marginal range out of bounds");
  EmpiricalDistribution out(width);
  const int shift = n_bits_ - first - width;
  const std::uint64_t mask = (std::uint64_t{1} << width) - 1;
  for (const auto& [index, c] : counts_) out.add((index >> shift) & mask, c);
  return out;
}

std::vector<double> EmpiricalDistribution::dense() const {
  if (n_bits_ > 24) throw ConfigError("dense histogram limited to 24 bits");
  std::vector<double> out(std::size_t{1} << n_bits_, 0.0);
  if (total_ == 0) return out;
  for (const auto& [index, c] : counts_) out[index] = static_cast<double>(c) / static_cast<double>(total_);
  return out;
}

}  // namespace bornprior
