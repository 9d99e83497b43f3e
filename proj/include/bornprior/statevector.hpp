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

#ifndef BORNPRIOR_STATEVECTOR_HPP
#define BORNPRIOR_STATEVECTOR_HPP

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/random.hpp"

namespace bornprior {

using Complex = std::complex<double>;

constexpr int kMaxQubits = 24;

/// Gates use the half-angle convention exp(-i angle G / 2):
///   RX(a) = exp(-i a X / 2), RZ(a) = diag(e^{-ia/2}, e^{ia/2}),
///   XX(a) = exp(-i a X(x)X / 2)  (Molmer-Sorensen).
enum class GateKind { rx, rz, xx };

struct GateOp {
  GateKind kind = GateKind::rx;
  int q0 = 0;
  int q1 = -1;  // second target, XX only
  double angle = 0.0;

  static GateOp rx(int q, double angle) { return {GateKind::rx, q, -1, angle}; }
  static GateOp rz(int q, double angle) { return {GateKind::rz, q, -1, angle}; }
  static GateOp xx(int a, int b, double angle) { return {GateKind::xx, a, b, angle}; }

  /// Throws ConfigError unless targets are valid for `n_qubits`.
  void validate(int n_qubits) const;
  GateOp inverse() const { return {kind, q0, q1, -angle}; }
};

/// A gate program on a fixed register, always starting from |0...0>.
struct Circuit {
  int n_qubits = 0;
  std::vector<GateOp> ops;
};

enum class Pauli { x, y, z };

/// Dense pure state. Amplitude index uses qubit 0 as the most significant bit.
class Statevector {
 public:
  int n_qubits() const { return n_qubits_; }
  std::size_t dimension() const { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const { return amplitudes_; }
  const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }
  double norm_squared() const;

  /// Wraps explicit amplitudes; length must be a power of two (not renormalized).
  static Statevector from_amplitudes(std::vector<Complex> amplitudes);

 private:
  friend Statevector init_zero(int);
  friend void apply_gate(Statevector&, const GateOp&);
  friend void apply_pauli(Statevector&, int, Pauli);

  int n_qubits_ = 0;
  std::vector<Complex> amplitudes_;
};

/// |0...0> on 1 <= n_qubits <= 24 qubits.
Statevector init_zero(int n_qubits);

void apply_gate(Statevector& state, const GateOp& gate);
void apply_pauli(Statevector& state, int qubit, Pauli p);

Statevector apply_rx(Statevector state, int qubit, double angle);
Statevector apply_rz(Statevector state, int qubit, double angle);
Statevector apply_xx(Statevector state, int q_i, int q_j, double angle);

/// init_zero followed by every gate of the circuit.
Statevector simulate(const Circuit& circuit);

std::vector<double> born_probabilities(const Statevector& state);

/// Draws `shots` indices i.i.d. from `probabilities` by inverse-CDF lookup.
std::vector<std::uint64_t> sample_indices(std::span<const double> probabilities, std::size_t shots, Rng& rng);

/// Computational-basis measurement samples; identical seed gives identical batch.
SampleBatch sample(const Statevector& state, std::size_t shots, std::uint64_t seed);

}  // namespace bornprior

#endif
