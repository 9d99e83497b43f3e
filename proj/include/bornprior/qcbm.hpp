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

#ifndef BORNPRIOR_QCBM_HPP
#define BORNPRIOR_QCBM_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "bornprior/bits.hpp"
#include "bornprior/statevector.hpp"

namespace bornprior {

enum class Topology { linear, all_to_all };
enum class BasisMode { none, orthogonal, trained };

std::string_view topology_name(Topology t);
Topology parse_topology(std::string_view s);
std::string_view basis_mode_name(BasisMode m);
BasisMode parse_basis_mode(std::string_view s);

/// Layered hardware-efficient ansatz. Layers alternate starting with a
/// single-qubit layer (RX then RZ on every qubit) followed by an XX
/// entangling layer, so the default depth of 2 is one of each.
struct AnsatzSpec {
  int n_qubits = 8;
  int layers = 2;
  Topology topology = Topology::all_to_all;
  BasisMode basis_mode = BasisMode::none;

  void validate() const;
  int rotation_layers() const { return (layers + 1) / 2; }
  int entangling_layers() const { return layers / 2; }
  /// Qubit pairs of one entangling layer, in gate order.
  std::vector<std::pair<int, int>> entangling_pairs() const;
  /// Width of one multi-basis sample: 2n with a second basis, n otherwise.
  int sample_width() const { return basis_mode == BasisMode::none ? n_qubits : 2 * n_qubits; }
};

/// Trainable angles. Flat order: single-qubit angles by layer, qubit, gate
/// (RX, RZ); entangling angles by layer and gate order; basis angles last.
struct ParamSet {
  std::vector<double> single_qubit_angles;
  std::vector<double> entangling_angles;
  std::vector<double> basis_angles;  // non-empty iff basis_mode == trained

  std::vector<double> flatten() const;
  static ParamSet unflatten(const AnsatzSpec& spec, std::span<const double> flat);
  std::size_t size() const {
    return single_qubit_angles.size() + entangling_angles.size() + basis_angles.size();
  }
  bool operator==(const ParamSet&) const = default;
};

inline constexpr double kOrthogonalBasisAngle = 1.5707963267948966;  // pi/2

int param_count(const AnsatzSpec& spec);
void check_params(const AnsatzSpec& spec, const ParamSet& params);

/// Uniform in the computational basis and in every RX-post-rotated basis.
ParamSet warm_start(const AnsatzSpec& spec);

/// Ansatz circuit; with `post_rotated`, followed by the per-qubit RX basis layer.
Circuit build_circuit(const AnsatzSpec& spec, const ParamSet& params, bool post_rotated = false);

/// U(theta)|0>, without basis post-rotations.
Statevector prepare_state(const AnsatzSpec& spec, const ParamSet& params);

/// Per-qubit RX angles of the second measurement basis.
std::vector<double> post_rotation_angles(const AnsatzSpec& spec, const ParamSet& params);

/// Exact Born probabilities in the computational or post-rotated basis.
std::vector<double> model_distribution(const AnsatzSpec& spec, const ParamSet& params, Basis basis);

/// Multi-basis samples: each row is s || s_{o/t} (width 2n), or s alone for
/// basis_mode none. `shots` counts rows; the two halves of a row come from
/// independent circuit executions paired by draw order.
SampleBatch sample_multibasis(const AnsatzSpec& spec, const ParamSet& params, std::size_t shots,
                              std::uint64_t seed);

inline constexpr double kDefaultNllEpsilon = 1e-8;

/// -sum_x p(x) ln max(q(x), eps) over the distinct data bitstrings.
double clipped_nll(std::span<const double> model, const EmpiricalDistribution& data, double epsilon);
double clipped_nll(const EmpiricalDistribution& model, const EmpiricalDistribution& data, double epsilon);

/// Sum of the computational-half and post-rotated-half clipped NLLs against
/// the matching halves of 2n-bit data; plain clipped NLL for basis_mode none.
double multibasis_nll(const AnsatzSpec& spec, std::span<const double> computational,
                      std::span<const double> post_rotated, const EmpiricalDistribution& data, double epsilon);
double multibasis_nll(const AnsatzSpec& spec, const ParamSet& params, const EmpiricalDistribution& data,
                      double epsilon);
/// Same sum with sampled model histograms; `post_rotated` is ignored for basis_mode none.
double multibasis_nll(const AnsatzSpec& spec, const EmpiricalDistribution& computational,
                      const EmpiricalDistribution& post_rotated, const EmpiricalDistribution& data, double epsilon);

}  // namespace bornprior

#endif
