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

#include "bornprior/qcbm.hpp"

#include <cmath>
#include <string>

#include "bornprior/errors.hpp"

namespace bornprior {

std::string_view topology_name(Topology t) { return t == Topology::linear ? "linear" : "all_to_all"; }

Topology parse_topology(std::string_view s) {
  if (s == "linear") return Topology::linear;
  if (s == "all_to_all" || s == "all-to-all") return Topology::all_to_all;
  throw ConfigError("unknown topology: " + std::string(s));
}

std::string_view basis_mode_name(BasisMode m) {
  switch (m) {
    case BasisMode::none: return "none";
    case BasisMode::orthogonal: return "orthogonal";
    case BasisMode::trained: return "trained";
  }
  return "none";
}

BasisMode parse_basis_mode(std::string_view s) {
  if (s == "none") return BasisMode::none;
  if (s == "orthogonal") return BasisMode::orthogonal;
  if (s == "trained") return BasisMode::trained;
  throw ConfigError("unknown basis mode: " + std::string(s));
}

void AnsatzSpec::validate() const {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw ConfigError("QCBM qubit count must be in [1, 24]");
  if (layers < 1) throw ConfigError("QCBM layer count must be >= 1");
  if (basis_mode != BasisMode::none && 2 * n_qubits > 63) throw ConfigError("multi-basis width exceeds 63 bits");
}

std::vector<std::pair<int, int>> AnsatzSpec::entangling_pairs() const {
  std::vector<std::pair<int, int>> pairs;
  if (topology == Topology::linear) {
    for (int i = 0; i + 1 < n_qubits; ++i) pairs.emplace_back(i, i + 1);
  } else {
    for (int i = 0; i < n_qubits; ++i)
      for (int j = i + 1; j < n_qubits; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

int param_count(const AnsatzSpec& spec) {
  spec.validate();
  const int entangling = static_cast<int>(spec.entangling_pairs().size());
  const int basis = spec.basis_mode == BasisMode::trained ? spec.n_qubits : 0;
  return spec.rotation_layers() * 2 * spec.n_qubits + spec.entangling_layers() * entangling + basis;
}

void check_params(const AnsatzSpec& spec, const ParamSet& params) {
  spec.validate();
  const std::size_t single = static_cast<std::size_t>(spec.rotation_layers() * 2 * spec.n_qubits);
  const std::size_t ent = static_cast<std::size_t>(spec.entangling_layers()) * spec.entangling_pairs().size();
  const std::size_t basis = spec.basis_mode == BasisMode::trained ? static_cast<std::size_t>(spec.n_qubits) : 0;
  if (params.single_qubit_angles.size() != single || params.entangling_angles.size() != ent ||
      params.basis_angles.size() != basis) {
    throw ConfigError("parameter set does not match ansatz: expected " + std::to_string(param_count(spec)) +
                      " angles, got " + std::to_string(params.size()));
  }
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), single_qubit_angles.begin(), single_qubit_angles.end());
  flat.insert(flat.end(), entangling_angles.begin(), entangling_angles.end());
  flat.insert(flat.end(), basis_angles.begin(), basis_angles.end());
  return flat;
}

ParamSet ParamSet::unflatten(const AnsatzSpec& spec, std::span<const double> flat) {
  if (flat.size() != static_cast<std::size_t>(param_count(spec))) {
    throw ConfigError("flat parameter vector has " + std::to_string(flat.size()) + " entries, ansatz needs " +
                      std::to_string(param_count(spec)));
  }
  const std::size_t single = static_cast<std::size_t>(spec.rotation_layers() * 2 * spec.n_qubits);
  const std::size_t ent = static_cast<std::size_t>(spec.entangling_layers()) * spec.entangling_pairs().size();
  ParamSet p;
  p.single_qubit_angles.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(single));
  p.entangling_angles.assign(flat.begin() + static_cast<std::ptrdiff_t>(single),
                             flat.begin() + static_cast<std::ptrdiff_t>(single + ent));
  p.basis_angles.assign(flat.begin() + static_cast<std::ptrdiff_t>(single + ent), flat.end());
  return p;
}

ParamSet warm_start(const AnsatzSpec& spec) {
  spec.validate();
  ParamSet p;
  p.single_qubit_angles.assign(static_cast<std::size_t>(spec.rotation_layers() * 2 * spec.n_qubits), 0.0);
  // RX(pi/2) then RZ(pi/2) maps |0> to |+> up to phase. |+>^n is uniform in Z,
  // invariant under XX (an X(x)X eigenstate) and under any RX post-rotation.
  for (int q = 0; q < spec.n_qubits; ++q) {
    p.single_qubit_angles[static_cast<std::size_t>(2 * q)] = kOrthogonalBasisAngle;
    p.single_qubit_angles[static_cast<std::size_t>(2 * q + 1)] = kOrthogonalBasisAngle;
  }
  p.entangling_angles.assign(static_cast<std::size_t>(spec.entangling_layers()) * spec.entangling_pairs().size(),
                             0.0);
  if (spec.basis_mode == BasisMode::trained) {
    p.basis_angles.assign(static_cast<std::size_t>(spec.n_qubits), kOrthogonalBasisAngle);
  }
  return p;
}

std::vector<double> post_rotation_angles(const AnsatzSpec& spec, const ParamSet& params) {
  switch (spec.basis_mode) {
    case BasisMode::none: throw ConfigError("ansatz has no second measurement basis");
    case BasisMode::orthogonal:
      return std::vector<double>(static_cast<std::size_t>(spec.n_qubits), kOrthogonalBasisAngle);
    case BasisMode::trained: return params.basis_angles;
  }
  return {};
}

Circuit build_circuit(const AnsatzSpec& spec, const ParamSet& params, bool post_rotated) {
  check_params(spec, params);
  Circuit c;
  c.n_qubits = spec.n_qubits;
  const auto pairs = spec.entangling_pairs();
  std::size_t single = 0;
  std::size_t ent = 0;
  for (int layer = 0; layer < spec.layers; ++layer) {
    if (layer % 2 == 0) {
      for (int q = 0; q < spec.n_qubits; ++q) {
        c.ops.push_back(GateOp::rx(q, params.single_qubit_angles[single++]));
        c.ops.push_back(GateOp::rz(q, params.single_qubit_angles[single++]));
      }
    } else {
      for (const auto& [a, b] : pairs) c.ops.push_back(GateOp::xx(a, b, params.entangling_angles[ent++]));
    }
  }
  if (post_rotated) {
    const auto phi = post_rotation_angles(spec, params);
    for (int q = 0; q < spec.n_qubits; ++q) c.ops.push_back(GateOp::rx(q, phi[static_cast<std::size_t>(q)]));
  }
  return c;
}

Statevector prepare_state(const AnsatzSpec& spec, const ParamSet& params) {
  return simulate(build_circuit(spec, params, false));
}

std::vector<double> model_distribution(const AnsatzSpec& spec, const ParamSet& params, Basis basis) {
  if (basis == Basis::concatenated) throw ConfigError("model_distribution is defined per basis");
  return born_probabilities(simulate(build_circuit(spec, params, basis == Basis::post_rotated)));
}

SampleBatch sample_multibasis(const AnsatzSpec& spec, const ParamSet& params, std::size_t shots,
                              std::uint64_t seed) {
  if (shots == 0) throw ConfigError("shots must be >= 1");
  SampleBatch s = sample(prepare_state(spec, params), shots, derive_seed(seed, "computational"));
  if (spec.basis_mode == BasisMode::none) return s;
  SampleBatch t = sample(simulate(build_circuit(spec, params, true)), shots, derive_seed(seed, "post_rotated"));
  t.set_basis(Basis::post_rotated);
  return concatenate(s, t);
}

double clipped_nll(std::span<const double> model, const EmpiricalDistribution& data, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (data.total() == 0) throw ConfigError("data distribution is empty");
  if (data.n_bits() > 24 || model.size() != (std::size_t{1} << data.n_bits())) {
    throw ConfigError("model and data bit widths disagree");
  }
  double loss = 0.0;
  const double total = static_cast<double>(data.total());
  for (const auto& [index, c] : data.counts()) {
    loss -= static_cast<double>(c) / total * std::log(std::max(model[index], epsilon));
  }
  return loss;
}

double clipped_nll(const EmpiricalDistribution& model, const EmpiricalDistribution& data, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (data.total() == 0) throw ConfigError("data distribution is empty");
  if (model.n_bits() != data.n_bits()) throw ConfigError("model and data bit widths disagree");
  double loss = 0.0;
  const double total = static_cast<double>(data.total());
  for (const auto& [index, c] : data.counts()) {
    loss -= static_cast<double>(c) / total * std::log(std::max(model.frequency(index), epsilon));
  }
  return loss;
}

double multibasis_nll(const AnsatzSpec& spec, std::span<const double> computational,
                      std::span<const double> post_rotated, const EmpiricalDistribution& data, double epsilon) {
  if (data.n_bits() != spec.sample_width()) throw ConfigError("latent data width does not match prior width");
  if (spec.basis_mode == BasisMode::none) return clipped_nll(computational, data, epsilon);
  const int n = spec.n_qubits;
  return clipped_nll(computational, data.marginal(0, n), epsilon) +
         clipped_nll(post_rotated, data.marginal(n, n), epsilon);
}

double multibasis_nll(const AnsatzSpec& spec, const ParamSet& params, const EmpiricalDistribution& data,
                      double epsilon) {
  const auto comp = model_distribution(spec, params, Basis::computational);
  if (spec.basis_mode == BasisMode::none) return multibasis_nll(spec, comp, {}, data, epsilon);
  const auto rot = model_distribution(spec, params, Basis::post_rotated);
  return multibasis_nll(spec, comp, rot, data, epsilon);
}

double multibasis_nll(const AnsatzSpec& spec, const EmpiricalDistribution& computational,
                      const EmpiricalDistribution& post_rotated, const EmpiricalDistribution& data,
                      double epsilon) {
  if (data.n_bits() != spec.sample_width()) throw ConfigError("latent data width does not match prior width");
  if (spec.basis_mode == BasisMode::none) return clipped_nll(computational, data, epsilon);
  const int n = spec.n_qubits;
  return clipped_nll(computational, data.marginal(0, n), epsilon) +
         clipped_nll(post_rotated, data.marginal(n, n), epsilon);
}

}  // namespace bornprior
