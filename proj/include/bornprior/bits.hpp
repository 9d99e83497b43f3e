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

#ifndef BORNPRIOR_BITS_HPP
#define BORNPRIOR_BITS_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bornprior {

// Bitstrings are indexed with bit 0 as the most significant bit: the string
// "100" over 3 bits is index 4. Qubit q of a statevector is bit q.

/// Index of the bitstring `bits` (each entry 0 or 1), bit 0 most significant.
std::uint64_t bits_to_index(std::span<const std::uint8_t> bits);
void index_to_bits(std::uint64_t index, std::span<std::uint8_t> out);
std::string index_to_string(std::uint64_t index, int width);
/// Parses a string of '0'/'1'; throws ConfigError on any other character or width > 63.
std::uint64_t string_to_index(std::string_view s);

enum class Basis { computational, post_rotated, concatenated };

std::string_view basis_name(Basis b);
Basis parse_basis(std::string_view name);

/// Row-major batch of fixed-width bitstrings.
class SampleBatch {
 public:
  SampleBatch() = default;
  SampleBatch(int width, Basis basis = Basis::computational);

  int width() const { return width_; }
  std::size_t size() const { return width_ == 0 ? 0 : bits_.size() / static_cast<std::size_t>(width_); }
  bool empty() const { return bits_.empty(); }
  Basis basis() const { return basis_; }
  void set_basis(Basis b) { basis_ = b; }

  std::span<const std::uint8_t> row(std::size_t i) const;
  std::span<std::uint8_t> row(std::size_t i);
  std::uint64_t index(std::size_t i) const { return bits_to_index(row(i)); }
  std::string row_string(std::size_t i) const;

  void push_back(std::span<const std::uint8_t> bits);
  void push_index(std::uint64_t index);
  void append(const SampleBatch& other);
  void reserve(std::size_t rows) { bits_.reserve(rows * static_cast<std::size_t>(width_)); }
  /// Rows [begin, begin + count).
  SampleBatch slice(std::size_t begin, std::size_t count) const;

  std::span<const std::uint8_t> data() const { return bits_; }

  bool operator==(const SampleBatch& o) const = default;

 private:
  int width_ = 0;
  Basis basis_ = Basis::computational;
  std::vector<std::uint8_t> bits_;
};

/// Row-wise concatenation s || t; both batches must have the same row count.
SampleBatch concatenate(const SampleBatch& s, const SampleBatch& t);

/// Histogram over fixed-width bitstrings.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(int n_bits);

  static EmpiricalDistribution from_batch(const SampleBatch& batch);

  int n_bits() const { return n_bits_; }
  std::uint64_t total() const { return total_; }
  const std::map<std::uint64_t, std::uint64_t>& counts() const { return counts_; }
  std::uint64_t count(std::uint64_t index) const;
  double frequency(std::uint64_t index) const;

  void add(std::uint64_t index, std::uint64_t count = 1);
  void add(const SampleBatch& batch);

  /// Histogram over the `width` bits starting at bit `first`.
  EmpiricalDistribution marginal(int first, int width) const;
  /// Dense vector of frequencies, length 2^n_bits (n_bits <= 24).
  std::vector<double> dense() const;

 private:
  int n_bits_ = 0;
  std::uint64_t total_ = 0;
  std::map<std::uint64_t, std::uint64_t> counts_;
};

}  // namespace bornprior

#endif
