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

#include "bornprior/backend.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "bornprior/errors.hpp"
#include "bornprior/random.hpp"

namespace bornprior {

std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::exact: return "exact";
    case BackendKind::shots: return "shots";
    case BackendKind::noisy_shots: return "noisy_shots";
    case BackendKind::replay: return "replay";
  }
  return "exact";
}

BackendKind parse_backend_kind(std::string_view s) {
  for (BackendKind k : {BackendKind::exact, BackendKind::shots, BackendKind::noisy_shots, BackendKind::replay})
    if (backend_kind_name(k) == s) return k;
  throw ConfigError("unknown backend kind: " + std::string(s));
}

void NoiseModel::validate() const {
  for (double p : {p1, p2, readout})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("noise probabilities must lie in [0, 1]");
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

// Conditional-marginal sampling: qubit 0 first, each outcome drawn from the
// probability of the current prefix extended by 1.
SampleBatch sample_sequential(std::span<const double> probs, int n, std::size_t shots, std::uint64_t seed) {
  std::vector<double> prefix(probs.size() + 1, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) prefix[i + 1] = prefix[i] + probs[i];
  auto block = [&](std::uint64_t lo, std::uint64_t len) { return prefix[lo + len] - prefix[lo]; };
  Rng rng(seed);
  SampleBatch out(n);
  out.reserve(shots);
  for (std::size_t s = 0; s < shots; ++s) {
    std::uint64_t lo = 0;
    std::uint64_t len = probs.size();
    for (int q = 0; q < n; ++q) {
      len >>= 1;
      const double p0 = block(lo, len);
      const double p1 = block(lo + len, len);
      if (uniform01(rng) * (p0 + p1) >= p0) lo += len;
    }
    out.push_index(lo);
  }
  return out;
}

struct ErrorEvent {
  std::size_t after_gate;
  int qubit;
  Pauli pauli;
};

constexpr std::array<Pauli, 3> kPaulis{Pauli::x, Pauli::y, Pauli::z};

SampleBatch sample_noisy(const Circuit& circuit, const NoiseModel& noise, std::size_t shots, std::uint64_t seed) {
  const int n = circuit.n_qubits;
  // Prefix states let error trajectories restart at their first error.
  const bool cache_prefix = (std::size_t{1} << n) * (circuit.ops.size() + 1) <= (std::size_t{1} << 22);
  std::vector<Statevector> prefix;
  Statevector st = init_zero(n);
  if (cache_prefix) prefix.push_back(st);
  for (const GateOp& g : circuit.ops) {
    apply_gate(st, g);
    if (cache_prefix) prefix.push_back(st);
  }
  const std::vector<double> clean = born_probabilities(st);

  Rng rng(seed);
  SampleBatch out(n);
  out.reserve(shots);
  std::vector<ErrorEvent> events;
  for (std::size_t s = 0; s < shots; ++s) {
    events.clear();
    for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
      const GateOp& g = circuit.ops[i];
      if (g.kind == GateKind::xx) {
        if (uniform01(rng) < noise.p2) {
          const int k = 1 + static_cast<int>(rng() % 15);  // base-4 digits (a, b), not both identity
          const int a = k / 4, b = k % 4;
          if (a) events.push_back({i, g.q0, kPaulis[static_cast<std::size_t>(a - 1)]});
          if (b) events.push_back({i, g.q1, kPaulis[static_cast<std::size_t>(b - 1)]});
        }
      } else if (uniform01(rng) < noise.p1) {
        events.push_back({i, g.q0, kPaulis[rng() % 3]});
      }
    }
    std::uint64_t index;
    if (events.empty()) {
      index = sample_indices(clean, 1, rng)[0];
    } else {
      const std::size_t first = events.front().after_gate;
      Statevector traj = cache_prefix ? prefix[first + 1] : init_zero(n);
      std::size_t next = cache_prefix ? first + 1 : 0;
      auto ev = events.begin();
      for (std::size_t i = 0; i < circuit.ops.size(); ++i) {
        if (i >= next) apply_gate(traj, circuit.ops[i]);
        for (; ev != events.end() && ev->after_gate == i; ++ev) apply_pauli(traj, ev->qubit, ev->pauli);
      }
      index = sample_indices(born_probabilities(traj), 1, rng)[0];
    }
    for (int q = 0; q < n; ++q) {
      if (noise.readout > 0.0 && uniform01(rng) < noise.readout) index ^= std::uint64_t{1} << (n - 1 - q);
    }
    out.push_index(index);
  }
  return out;
}

}  // namespace

SamplerBackend::SamplerBackend(BackendSpec spec) : spec_(std::move(spec)) {
  spec_.noise.validate();
  if (spec_.kind != BackendKind::replay) return;
  std::ifstream is(spec_.replay_path);
  if (!is) throw ConfigError("cannot open replay file: " + spec_.replay_path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      ReplaySection sec{Basis::computational, 0, SampleBatch(), 0};
      int width = -1;
      for (const auto& tok : split_ws(line.substr(1))) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed replay header at line " + std::to_string(line_no));
        const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
        if (key == "basis") sec.basis = parse_basis(value);
        else if (key == "generation") sec.generation = std::stoull(value);
        else if (key == "width") width = std::stoi(value);
        else throw ConfigError("unknown replay header key: " + key);
      }
      if (width < 1) throw ConfigError("replay header without width at line " + std::to_string(line_no));
      sec.rows = SampleBatch(width, sec.basis);
      replay_.push_back(std::move(sec));
      continue;
    }
    if (replay_.empty()) throw ConfigError("replay samples before any header");
    auto& rows = replay_.back().rows;
    if (static_cast<int>(line.size()) != rows.width()) {
      throw ConfigError("replay row width mismatch at line " + std::to_string(line_no));
    }
    rows.push_index(string_to_index(line));
  }
}

SampleBatch SamplerBackend::draw(const Circuit& circuit, std::size_t shots, std::uint64_t seed, Basis basis) {
  if (shots == 0) throw ConfigError("shots must be >= 1");
  if (circuit.n_qubits < 1 || circuit.n_qubits > kMaxQubits) throw ConfigError("circuit width outside backend limits");
  SampleBatch out;
  switch (spec_.kind) {
    case BackendKind::exact: out = sample(simulate(circuit), shots, seed); break;
    case BackendKind::shots:
      out = sample_sequential(born_probabilities(simulate(circuit)), circuit.n_qubits, shots, seed);
      break;
    case BackendKind::noisy_shots: out = sample_noisy(circuit, spec_.noise, shots, seed); break;
    case BackendKind::replay: {
      std::lock_guard lock(*replay_mu_);
      out = SampleBatch(circuit.n_qubits);
      for (auto& sec : replay_) {
        if (sec.basis != basis) continue;
        if (sec.rows.width() != circuit.n_qubits) throw ConfigError("replay width differs from circuit width");
        const std::size_t n = std::min(shots - out.size(), sec.rows.size() - sec.cursor);
        out.append(sec.rows.slice(sec.cursor, n));
        sec.cursor += n;
        if (out.size() == shots) break;
      }
      if (out.size() < shots) throw StateError("replay exhausted for basis " + std::string(basis_name(basis)));
      break;
    }
  }
  out.set_basis(basis);
  return out;
}

SampleBatch draw_multibasis(SamplerBackend& backend, const AnsatzSpec& spec, const ParamSet& params,
                            std::size_t shots, std::uint64_t seed) {
  SampleBatch s = backend.draw(build_circuit(spec, params, false), shots, derive_seed(seed, "computational"),
                               Basis::computational);
  if (spec.basis_mode == BasisMode::none) return s;
  SampleBatch t = backend.draw(build_circuit(spec, params, true), shots, derive_seed(seed, "post_rotated"),
                               Basis::post_rotated);
  return concatenate(s, t);
}

void write_replay(const std::filesystem::path& path, const SampleBatch& batch, std::uint64_t generation, bool append) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw StateError("cannot write replay file: " + path.string());
  os << "# basis=" << basis_name(batch.basis()) << " generation=" << generation << " width=" << batch.width() << '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) os << batch.row_string(i) << '\n';
}

SamplePool::SamplePool(int width, std::size_t capacity, TakePolicy policy)
    : width_(width), capacity_(capacity), policy_(policy) {
  if (width < 1) throw ConfigError("sample pool width must be >= 1");
  if (capacity < 1) throw ConfigError("sample pool capacity must be >= 1");
}

SamplePool::~SamplePool() { stop(); }

std::uint64_t SamplePool::generation() const {
  std::lock_guard lock(mu_);
  return generation_;
}

std::size_t SamplePool::buffered() const {
  std::lock_guard lock(mu_);
  return buffered_locked();
}

std::uint64_t SamplePool::discarded() const {
  std::lock_guard lock(mu_);
  return discarded_;
}

bool SamplePool::running() const {
  std::lock_guard lock(mu_);
  return running_;
}

std::size_t SamplePool::buffered_locked() const {
  std::size_t n = 0;
  for (const Chunk& c : chunks_) n += c.rows.size() - c.offset;
  return n;
}

void SamplePool::advance(Producer producer) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !producing_; });
  discarded_ += buffered_locked();
  chunks_.clear();
  ++generation_;
  next_chunk_ = 0;
  producer_ = std::move(producer);
  cv_.notify_all();
}

void SamplePool::produce_one_locked(std::unique_lock<std::mutex>& lock) {
  producing_ = true;
  const std::uint64_t g = generation_;
  const std::uint64_t k = next_chunk_++;
  Producer prod = producer_;
  lock.unlock();
  SampleBatch rows;
  std::exception_ptr error;
  try {
    rows = prod(g, k);
  } catch (...) {
    error = std::current_exception();
  }
  lock.lock();
  producing_ = false;
  cv_.notify_all();
  if (error) std::rethrow_exception(error);
  if (rows.width() != width_) throw StateError("producer returned rows of the wrong width");
  if (rows.empty()) throw StateError("producer returned no rows");
  if (g == generation_) {
    chunks_.push_back({g, std::move(rows), 0});
  } else {
    discarded_ += rows.size();
  }
}

void SamplePool::refill(std::size_t rows) {
  std::unique_lock lock(mu_);
  while (buffered_locked() < rows) {
    if (!producer_) throw StateError("sample pool has no producer");
    if (producing_) {
      cv_.wait(lock);
      continue;
    }
    produce_one_locked(lock);
  }
}

SampleBatch SamplePool::take(std::size_t count) {
  std::unique_lock lock(mu_);
  const std::uint64_t g = generation_;
  while (buffered_locked() < count) {
    if (policy_ == TakePolicy::fail_fast) throw StateError("sample pool has too few rows");
    if (!producer_) throw StateError("sample pool has no producer");
    if (running_ || producing_) {
      demand_ = std::max(demand_, count);
      cv_.notify_all();
      cv_.wait(lock);
    } else {
      produce_one_locked(lock);
    }
    if (generation_ != g) throw StateError("sample pool generation changed during take");
  }
  demand_ = 0;
  SampleBatch out(width_);
  out.reserve(count);
  while (out.size() < count) {
    Chunk& c = chunks_.front();
    if (c.generation != generation_) throw StateError("stale generation in sample pool");
    const std::size_t n = std::min(count - out.size(), c.rows.size() - c.offset);
    if (out.empty()) out.set_basis(c.rows.basis());
    out.append(c.rows.slice(c.offset, n));
    c.offset += n;
    if (c.offset == c.rows.size()) chunks_.pop_front();
  }
  cv_.notify_all();
  return out;
}

void SamplePool::start() {
  std::lock_guard lock(mu_);
  if (running_) return;
  if (thread_.joinable()) thread_.join();
  running_ = true;
  stop_requested_ = false;
  thread_ = std::thread([this] { producer_loop(); });
}

void SamplePool::stop() {
  {
    std::lock_guard lock(mu_);
    stop_requested_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  std::lock_guard lock(mu_);
  running_ = false;
}

void SamplePool::producer_loop() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [&] {
      return stop_requested_ || (producer_ && !producing_ && buffered_locked() < std::max(capacity_, demand_));
    });
    if (stop_requested_) return;
    try {
      produce_one_locked(lock);
    } catch (...) {
      // Leave the failure to the consumer, which produces inline once the thread is gone.
      running_ = false;
      cv_.notify_all();
      return;
    }
  }
}

}  // namespace bornprior
