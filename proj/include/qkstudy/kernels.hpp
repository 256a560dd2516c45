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

// Classical kernels and projected (reduced-density-matrix) quantum kernels.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qkstudy/simulator.hpp"

namespace qkstudy {

enum class QuantumBasis { inner, distance, inner_normalized };
enum class AlphaMode { mean, unit };
enum class ClassicalKind { linear, polynomial, rbf, laplacian, sigmoid };

inline constexpr ClassicalKind kClassicalKinds[] = {ClassicalKind::rbf, ClassicalKind::linear,
                                                    ClassicalKind::polynomial, ClassicalKind::laplacian,
                                                    ClassicalKind::sigmoid};

std::string_view to_string(QuantumBasis b);
std::string_view to_string(AlphaMode a);
std::string_view to_string(ClassicalKind k);
QuantumBasis parse_basis(std::string_view s);
AlphaMode parse_alpha_mode(std::string_view s);
ClassicalKind parse_classical_kind(std::string_view s);

struct KernelParams {
  QuantumBasis basis = QuantumBasis::distance;
  int K = 1;                 // RDM subsystem size
  double gamma = 1.0;        // distance basis only; ignored otherwise
  AlphaMode alpha_mode = AlphaMode::mean;
};

/// Textbook kernels: linear x.x', polynomial (gamma x.x' + coef0)^degree,
/// rbf exp(-gamma |x-x'|^2), laplacian exp(-gamma |x-x'|_1),
/// sigmoid tanh(gamma x.x' + coef0).
struct ClassicalKernel {
  ClassicalKind kind = ClassicalKind::rbf;
  double gamma = 1.0;
  int degree = 3;
  double coef0 = 0.0;
};

struct GramMatrix {
  Eigen::MatrixXd values;
  std::string kind;
  double trace = 0.0;

  GramMatrix() = default;
  GramMatrix(Eigen::MatrixXd v, std::string k);
  Eigen::Index n() const { return values.rows(); }
};

/// Rows of X are points. Throws ArgumentError on non-finite input.
GramMatrix classical_gram(const Eigen::MatrixXd& X, const ClassicalKernel& kernel);

/// Rectangular kernel matrix k(a_i, b_j).
Eigen::MatrixXd classical_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const ClassicalKernel& kernel);

/// All C(m, K) kept-qubit sets, ascending within each set, lexicographic order.
std::vector<std::vector<int>> subsystems(int m, int K);

/// Per-point concatenation of every size-K reduced density matrix, flattened
/// to reals (real and imaginary parts). Row i belongs to point i. With this
/// layout Tr(rho rho') summed over subsystems is a dot product of rows.
struct RdmFeatures {
  Eigen::MatrixXd rows;
  int n_qubits = 0;
  int K = 0;
  int n_subsystems = 0;
};

RdmFeatures rdm_features(std::span<const ComplexMatrix> rhos, int K);
RdmFeatures rdm_features(std::span<const Statevector> states, int K);

/// Pairwise quantities shared by every basis and bandwidth for one K.
struct RdmGeometry {
  Eigen::MatrixXd overlap;    // sum_k Tr(rho_k rho'_k)
  Eigen::MatrixXd sq_dist;    // sum_k |rho_k - rho'_k|_F^2
  int n_subsystems = 0;
};

RdmGeometry rdm_geometry(const RdmFeatures& features);

/// Gram matrix for `params` from precomputed geometry. params.K must match the
/// geometry it was built from (not checked here).
GramMatrix quantum_gram(const RdmGeometry& geometry, const KernelParams& params);

/// Convenience path from density matrices (all of equal dimension 2^m).
GramMatrix quantum_gram(std::span<const ComplexMatrix> rhos, const KernelParams& params);

/// N * G / Tr(G). Throws NumericError when Tr(G) <= 0.
GramMatrix rescale_trace(const GramMatrix& g, double N);

double min_eigenvalue(const Eigen::MatrixXd& g);
double max_eigenvalue(const Eigen::MatrixXd& g);

}  // namespace qkstudy
