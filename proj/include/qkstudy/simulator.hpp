// Copyright 2026 The qkstudy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense statevector simulation of the Heisenberg-chain evolution feature map.
//
// Qubit ordering is big-endian throughout: qubit 0 is the most significant
// bit of an amplitude index, so for n qubits qubit q maps to bit (n - 1 - q).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qkstudy {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr int kMaxQubits = 8;
inline constexpr int kMaxFeatures = 7;

struct Statevector {
  int n_qubits = 0;
  ComplexVector amplitudes;

  Eigen::Index dim() const { return amplitudes.size(); }
};

struct FeatureMapParams {
  double t = 1.0;            // total evolution time
  int trotter_steps = 1;     // T
  std::uint64_t seed = 0;    // Haar initial-state seed
};

/// Haar-random single-qubit state. Deterministic in (seed, qubit_index):
/// the per-qubit stream is seeded with seed ^ splitmix64(qubit_index).
Statevector haar_random_qubit_state(std::uint64_t seed, int qubit_index);

/// Tensor product of `n_qubits` Haar-random qubits, qubit 0 first.
Statevector haar_product_state(std::uint64_t seed, int n_qubits);

/// exp(-i theta (XX + YY + ZZ)) on two qubits, basis |q_a q_b> with q_a the
/// high bit.
ComplexMatrix heisenberg_gate(double theta);

/// Applies a 4x4 gate to qubits (a, b) of `state` in place. `a` indexes the
/// high bit of the gate basis.
void apply_two_qubit_gate(Statevector& state, const ComplexMatrix& gate, int a, int b);

/// Trotterized evolution of the Haar product state on n+1 qubits. Gate for
/// feature j acts on (j, j+1); within a slice gates run in ascending j and the
/// slice repeats `trotter_steps` times.
Statevector embed(std::span<const double> x, const FeatureMapParams& params);

/// Exact evolution exp(-i t sum_j x_j H_j) of the same initial state, by
/// diagonalizing the full Hamiltonian. Convergence reference for `embed`.
Statevector embed_exact(std::span<const double> x, const FeatureMapParams& params);

/// sum_j x_j (X_j X_{j+1} + Y_j Y_{j+1} + Z_j Z_{j+1}) on n+1 qubits, built
/// from Pauli Kronecker products.
ComplexMatrix heisenberg_chain_hamiltonian(std::span<const double> couplings);

ComplexMatrix density_matrix(const Statevector& s);

/// Reduced density matrix over the qubits in `keep` (strictly ascending,
/// nonempty, each < number of qubits of rho).
ComplexMatrix partial_trace(const ComplexMatrix& rho, std::span<const int> keep);

/// Same as partial_trace(density_matrix(s), keep), computed from amplitudes.
ComplexMatrix reduced_density_matrix(const Statevector& s, std::span<const int> keep);

/// Number of qubits of a 2^m x 2^m operator; throws ArgumentError otherwise.
int qubit_count(const ComplexMatrix& m);

bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12);
bool is_unitary(const ComplexMatrix& m, double tol = 1e-10);

}  // namespace qkstudy
