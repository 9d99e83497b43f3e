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

#include "bornprior/statevector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "bornprior/errors.hpp"

namespace bornprior {
namespace {

void check_qubit(int qubit, int n_qubits) {
  if (qubit < 0 || qubit >= n_qubits) {
    throw ConfigError("qubit index " + std::to_string(qubit) + " out of range for " + std::to_string(n_qubits) +
                      " qubits");
  }
}

std::size_t qubit_mask(int qubit, int n_qubits) { return std::size_t{1} << (n_qubits - 1 - qubit); }

}  // namespace

void GateOp::validate(int n_qubits) const {
  check_qubit(q0, n_qubits);
  if (kind == GateKind::xx) {
    check_qubit(q1, n_qubits);
    if (q0 == q1) throw ConfigError("XX gate needs two distinct qubits");
  } else if (q1 != -1) {
    throw ConfigError("single-qubit gate carries a second target");
  }
}

double Statevector::norm_squared() const {
  double s = 0.0;
  for (const Complex& a : amplitudes_) s += std::norm(a);
  return s;
}

Statevector Statevector::from_amplitudes(std::vector<Complex> amplitudes) {
  const std::size_t dim = amplitudes.size();
  if (dim < 2 || !std::has_single_bit(dim) || dim > (std::size_t{1} << kMaxQubits)) {
    throw ConfigError("amplitude vector length must be 2^n with 1 <= n <= 24");
  }
  Statevector s;
  s.n_qubits_ = std::countr_zero(dim);
  s.amplitudes_ = std::move(amplitudes);
  return s;
}

Statevector init_zero(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ConfigError("qubit count must be in [1, 24], got " + std::to_string(n_qubits));
  }
  Statevector s;
  s.n_qubits_ = n_qubits;
  s.amplitudes_.assign(std::size_t{1} << n_qubits, Complex(0.0, 0.0));
  s.amplitudes_[0] = Complex(1.0, 0.0);
  return s;
}

void apply_gate(Statevector& state, const GateOp& gate) {
  gate.validate(state.n_qubits_);
  auto& amp = state.amplitudes_;
  const std::size_t dim = amp.size();
  const double c = std::cos(gate.angle / 2.0);
  const double s = std::sin(gate.angle / 2.0);
  switch (gate.kind) {
    case GateKind::rx: {
      const std::size_t m = qubit_mask(gate.q0, state.n_qubits_);
      const Complex mis(0.0, -s);
      for (std::size_t i = 0; i < dim; ++i) {
        if (i & m) continue;
        const Complex a0 = amp[i];
        const Complex a1 = amp[i | m];
        amp[i] = c * a0 + mis * a1;
        amp[i | m] = mis * a0 + c * a1;
      }
      break;
    }
    case GateKind::rz: {
      const std::size_t m = qubit_mask(gate.q0, state.n_qubits_);
      const Complex p0(c, -s);
      const Complex p1(c, s);
      for (std::size_t i = 0; i < dim; ++i) amp[i] *= (i & m) ? p1 : p0;
      break;
    }
    case GateKind::xx: {
      const std::size_t m = qubit_mask(gate.q0, state.n_qubits_) | qubit_mask(gate.q1, state.n_qubits_);
      const Complex mis(0.0, -s);
      for (std::size_t i = 0; i < dim; ++i) {
        const std::size_t j = i ^ m;
        if (j < i) continue;
        const Complex ai = amp[i];
        const Complex aj = amp[j];
        amp[i] = c * ai + mis * aj;
        amp[j] = mis * ai + c * aj;
      }
      break;
    }
  }
}

void apply_pauli(Statevector& state, int qubit, Pauli p) {
  check_qubit(qubit, state.n_qubits_);
  auto& amp = state.amplitudes_;
  const std::size_t m = qubit_mask(qubit, state.n_qubits_);
  for (std::size_t i = 0; i < amp.size(); ++i) {
    if (i & m) continue;
    Complex& a0 = amp[i];
    Complex& a1 = amp[i | m];
    switch (p) {
      case Pauli::x: std::swap(a0, a1); break;
      case Pauli::y: {
        const Complex t0 = a0;
        a0 = Complex(0.0, -1.0) * a1;
        a1 = Complex(0.0, 1.0) * t0;
        break;
      }
      case Pauli::z: a1 = -a1; break;
    }
  }
}

Statevector apply_rx(Statevector state, int qubit, double angle) {
  apply_gate(state, GateOp::rx(qubit, angle));
  return state;
}

Statevector apply_rz(Statevector state, int qubit, double angle) {
  apply_gate(state, GateOp::rz(qubit, angle));
  return state;
}

Statevector apply_xx(Statevector state, int q_i, int q_j, double angle) {
  apply_gate(state, GateOp::xx(q_i, q_j, angle));
  return state;
}

Statevector simulate(const Circuit& circuit) {
  Statevector s = init_zero(circuit.n_qubits);
  for (const GateOp& g : circuit.ops) apply_gate(s, g);
  return s;
}

std::vector<double> born_probabilities(const Statevector& state) {
  std::vector<double> p(state.dimension());
  auto amp = state.amplitudes();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(amp[i]);
  return p;
}

std::vector<std::uint64_t> sample_indices(std::span<const double> probabilities, std::size_t shots, Rng& rng) {
  if (probabilities.empty()) throw ConfigError("cannot sample an empty distribution");
  std::vector<double> cdf(probabilities.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (!(probabilities[i] >= 0.0)) throw ConfigError("negative or NaN probability");
    acc += probabilities[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw ConfigError("distribution has zero mass");
  std::vector<std::uint64_t> out(shots);
  for (std::size_t k = 0; k < shots; ++k) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
    if (idx >= cdf.size()) idx = cdf.size() - 1;
    // Skip zero-probability entries that share a CDF plateau with their predecessor.
    while (probabilities[idx] == 0.0 && idx > 0) --idx;
    out[k] = idx;
  }
  return out;
}

SampleBatch sample(const Statevector& state, std::size_t shots, std::uint64_t seed) {
  if (shots == 0) throw ConfigError("shots must be >= 1");
  Rng rng(seed);
  const auto probs = born_probabilities(state);
  SampleBatch batch(state.n_qubits());
  batch.reserve(shots);
  for (std::uint64_t idx : sample_indices(probs, shots, rng)) batch.push_index(idx);
  return batch;
}

}  // namespace bornprior
