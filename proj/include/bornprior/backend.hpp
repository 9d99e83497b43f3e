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


#ifndef BORNPRIOR_BACKEND_HPP
#define BORNPRIOR_BACKEND_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string_view>
#include <thread>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/qcbm.hpp"
#include "bornprior/statevector.hpp"

namespace bornprior {

enum class BackendKind { exact, shots, noisy_shots, replay };
std::string_view backend_kind_name(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

/// Depolarizing probabilities per gate and per-bit readout flip probability.
/// Defaults are 1 - fidelity of the trapped-ion device characterization.
struct NoiseModel {
  double p1 = 0.0065;
  double p2 = 0.0398;
  double readout = 0.007;

  void validate() const;
};

struct BackendSpec {
  BackendKind kind = BackendKind::exact;
  NoiseModel noise;
  std::filesystem::path replay_path;
};

/// Produces measurement samples of a circuit.
///   exact        inverse-CDF sampling of the full Born vector
///   shots        qubit-by-qubit projective measurement with collapse
///   noisy_shots  per-shot trajectories with stochastic Pauli errors after each
///                gate (uniform over the 3 one-qubit or 15 two-qubit Paulis)
///                and independent readout flips
///   replay       recorded samples served in file order
class SamplerBackend {
 public:
  explicit SamplerBackend(BackendSpec spec);

  const BackendSpec& spec() const { return spec_; }
  BackendKind kind() const { return spec_.kind; }

  /// `basis` only tags the batch and selects the replay section.
  SampleBatch draw(const Circuit& circuit, std::size_t shots, std::uint64_t seed,
                   Basis basis = Basis::computational);

 private:
  struct ReplaySection {
    Basis basis;
    std::uint64_t generation;
    SampleBatch rows;
    std::size_t cursor = 0;
  };

  BackendSpec spec_;
  std::vector<ReplaySection> replay_;
  std::unique_ptr<std::mutex> replay_mu_ = std::make_unique<std::mutex>();
};

/// Multi-basis rows s || s_{o/t} (s alone for basis_mode none) drawn through a
/// backend; matches sample_multibasis for the exact kind.
SampleBatch draw_multibasis(SamplerBackend& backend, const AnsatzSpec& spec, const ParamSet& params,
                            std::size_t shots, std::uint64_t seed);

/// Replay file text: "# basis=<name> generation=<g> width=<w>" then one bitstring per line.
/// Sections may repeat; `append` adds a section to an existing file.
void write_replay(const std::filesystem::path& path, const SampleBatch& batch, std::uint64_t generation,
                  bool append = false);

enum class TakePolicy { block, fail_fast };

/// Generation-fenced FIFO buffer of prior samples.
///
/// Rows are produced in chunks by a producer function of (generation, chunk
/// index); chunks enter the buffer in index order and rows leave in FIFO
/// order, so the served sequence does not depend on whether a background
/// producer thread is running. advance() drains the producer, discards every
/// buffered row and starts a new generation.
class SamplePool {
 public:
  using Producer = std::function<SampleBatch(std::uint64_t generation, std::uint64_t chunk)>;

  SamplePool(int width, std::size_t capacity, TakePolicy policy = TakePolicy::block);
  ~SamplePool();
  SamplePool(const SamplePool&) = delete;
  SamplePool& operator=(const SamplePool&) = delete;

  int width() const { return width_; }
  std::uint64_t generation() const;
  std::size_t buffered() const;
  /// Rows dropped because their generation was superseded.
  std::uint64_t discarded() const;

  /// Bumps the generation and installs the producer for it.
  void advance(Producer producer);
  /// Produces chunks on the calling thread until at least `rows` are buffered.
  void refill(std::size_t rows);
  /// Next `count` rows of the current generation. With no background producer,
  /// block mode produces inline; fail_fast throws StateError when short.
  SampleBatch take(std::size_t count);

  /// Background producer keeping the buffer topped up to capacity.
  void start();
  void stop();
  bool running() const;

 private:
  struct Chunk {
    std::uint64_t generation;
    SampleBatch rows;
    std::size_t offset = 0;
  };

  std::size_t buffered_locked() const;
  void produce_one_locked(std::unique_lock<std::mutex>& lock);
  void producer_loop();

  int width_;
  std::size_t capacity_;
  TakePolicy policy_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Chunk> chunks_;
  Producer producer_;
  std::uint64_t generation_ = 0;
  std::uint64_t next_chunk_ = 0;
  std::uint64_t discarded_ = 0;
  std::size_t demand_ = 0;
  bool producing_ = false;
  bool running_ = false;
  bool stop_requested_ = false;
  std::thread thread_;
};

}  // namespace bornprior

#endif
