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

#include "qkstudy/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qkstudy/errors.hpp"

namespace qkstudy {

std::string_view to_string(QuantumBasis b) {
  switch (b) {
    case QuantumBasis::inner: return "inner";
    case QuantumBasis::distance: return "distance";
    case QuantumBasis::inner_normalized: return "inner_normalized";
  }
  return "?";
}

std::string_view to_string(AlphaMode a) { return a == AlphaMode::mean ? "mean" : "unit"; }

std::string_view to_string(ClassicalKind k) {
  switch (k) {
    case ClassicalKind::linear: return "linear";
    case ClassicalKind::polynomial: return "polynomial";
    case ClassicalKind::rbf: return "rbf";
    case ClassicalKind::laplacian: return "laplacian";
    case ClassicalKind::sigmoid: return "sigmoid";
  }
  return "?";
}

QuantumBasis parse_basis(std::string_view s) {
  if (s == "inner") return QuantumBasis::inner;
  if (s == "distance") return QuantumBasis::distance;
  if (s == "inner_normalized") return QuantumBasis::inner_normalized;
  throw ArgumentError("unknown kernel basis '" + std::string(s) + "'");
}

AlphaMode parse_alpha_mode(std::string_view s) {
  if (s == "mean") return AlphaMode::mean;
  if (s == "unit") return AlphaMode::unit;
  throw ArgumentError("unknown alpha mode '" + std::string(s) + "'");
}

ClassicalKind parse_classical_kind(std::string_view s) {
  for (ClassicalKind k : kClassicalKinds) {
    if (to_string(k) == s) return k;
  }
  throw ArgumentError("unknown classical kernel '" + std::string(s) + "'");
}

GramMatrix::GramMatrix(Eigen::MatrixXd v, std::string k)
    : values(std::move(v)), kind(std::move(k)), trace(values.trace()) {}

namespace {

double evaluate(const ClassicalKernel& k, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  switch (k.kind) {
    case ClassicalKind::linear: return a.dot(b);
    case ClassicalKind::polynomial: return std::pow(k.gamma * a.dot(b) + k.coef0, k.degree);
    case ClassicalKind::rbf: return std::exp(-k.gamma * (a - b).squaredNorm());
    case ClassicalKind::laplacian: return std::exp(-k.gamma * (a - b).lpNorm<1>());
    case ClassicalKind::sigmoid: return std::tanh(k.gamma * a.dot(b) + k.coef0);
  }
  return 0.0;
}

std::string describe(const ClassicalKernel& k) {
  std::string s(to_string(k.kind));
  if (k.kind != ClassicalKind::linear) s += ":gamma=" + std::to_string(k.gamma);
  return s;
}

}  // namespace

Eigen::MatrixXd classical_cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const ClassicalKernel& kernel) {
  if (!A.allFinite() || !B.allFinite()) throw ArgumentError("classical kernel: non-finite feature");
  if (A.cols() != B.cols()) throw ArgumentError("classical kernel: feature dimension mismatch");
  Eigen::MatrixXd out(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) out(i, j) = evaluate(kernel, A.row(i), B.row(j));
  }
  return out;
}

GramMatrix classical_gram(const Eigen::MatrixXd& X, const ClassicalKernel& kernel) {
  if (!X.allFinite()) throw ArgumentError("classical kernel: non-finite feature");
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      g(i, j) = evaluate(kernel, X.row(i), X.row(j));
      g(j, i) = g(i, j);
    }
  }
  return {std::move(g), "classical:" + describe(kernel)};
}

std::vector<std::vector<int>> subsystems(int m, int K) {
  if (K < 1 || K > m) throw ArgumentError("subsystem size K=" + std::to_string(K) + " outside [1, " + std::to_string(m) + "]");
  std::vector<std::vector<int>> out;
  std::vector<int> current(K);
  for (int i = 0; i < K; ++i) current[i] = i;
  while (true) {
    out.push_back(current);
    int i = K - 1;
    while (i >= 0 && current[i] == m - K + i) --i;
    if (i < 0) break;
    ++current[i];
    for (int j = i + 1; j < K; ++j) current[j] = current[j - 1] + 1;
  }
  return out;
}

namespace {

template <typename Source, typename Reduce>
RdmFeatures build_features(std::span<const Source> points, int m, int K, Reduce&& reduce) {
  const auto sets = subsystems(m, K);
  const Eigen::Index block = Eigen::Index{1} << (2 * K);
  RdmFeatures f;
  f.n_qubits = m;
  f.K = K;
  f.n_subsystems = static_cast<int>(sets.size());
  f.rows.resize(static_cast<Eigen::Index>(points.size()), 2 * block * f.n_subsystems);
  for (std::size_t i = 0; i < points.size(); ++i) {
    Eigen::Index offset = 0;
    for (const auto& keep : sets) {
      const ComplexMatrix rdm = reduce(points[i], keep);
      for (Eigen::Index e = 0; e < block; ++e) {
        f.rows(static_cast<Eigen::Index>(i), offset + e) = rdm(e).real();
        f.rows(static_cast<Eigen::Index>(i), offset + block + e) = rdm(e).imag();
      }
      offset += 2 * block;
    }
  }
  return f;
}

}  // namespace

RdmFeatures rdm_features(std::span<const ComplexMatrix> rhos, int K) {
  if (rhos.empty()) throw ArgumentError("quantum kernel: no density matrices");
  const int m = qubit_count(rhos.front());
  for (const auto& r : rhos) {
    if (r.rows() != rhos.front().rows()) throw ArgumentError("quantum kernel: density matrices differ in dimension");
  }
  return build_features(rhos, m, K, [](const ComplexMatrix& rho, const std::vector<int>& keep) {
    return partial_trace(rho, keep);
  });
}

RdmFeatures rdm_features(std::span<const Statevector> states, int K) {
  if (states.empty()) throw ArgumentError("quantum kernel: no states");
  const int m = states.front().n_qubits;
  for (const auto& s : states) {
    if (s.n_qubits != m) throw ArgumentError("quantum kernel: states differ in qubit count");
  }
  return build_features(states, m, K, [](const Statevector& s, const std::vector<int>& keep) {
    return reduced_density_matrix(s, keep);
  });
}

RdmGeometry rdm_geometry(const RdmFeatures& features) {
  RdmGeometry g;
  g.n_subsystems = features.n_subsystems;
  g.overlap = features.rows * features.rows.transpose();
  g.overlap = (g.overlap + g.overlap.transpose()).eval() / 2.0;
  const Eigen::Index n = g.overlap.rows();
  const Eigen::VectorXd sq = g.overlap.diagonal();
  g.sq_dist.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      g.sq_dist(i, j) = i == j ? 0.0 : std::max(0.0, sq(i) + sq(j) - 2.0 * g.overlap(i, j));
    }
  }
  return g;
}

GramMatrix quantum_gram(const RdmGeometry& geometry, const KernelParams& params) {
  const double alpha = params.alpha_mode == AlphaMode::mean ? 1.0 / geometry.n_subsystems : 1.0;
  std::string kind = "quantum:" + std::string(to_string(params.basis)) + ":K=" + std::to_string(params.K) +
                     ":alpha=" + std::string(to_string(params.alpha_mode));
  switch (params.basis) {
    case QuantumBasis::inner:
      return {alpha * geometry.overlap, std::move(kind)};
    case QuantumBasis::inner_normalized: {
      const Eigen::VectorXd inv = geometry.overlap.diagonal().cwiseSqrt().cwiseInverse();
      Eigen::MatrixXd v = inv.asDiagonal() * geometry.overlap * inv.asDiagonal();
      v.diagonal().setOnes();
      return {std::move(v), std::move(kind)};
    }
    case QuantumBasis::distance: {
      if (!(params.gamma > 0.0) || !std::isfinite(params.gamma)) {
        throw ArgumentError("distance kernel requires finite gamma > 0");
      }
      Eigen::MatrixXd v = (-params.gamma * alpha * geometry.sq_dist).array().exp().matrix();
      return {std::move(v), kind + ":gamma=" + std::to_string(params.gamma)};
    }
  }
  throw ArgumentError("unknown basis");
}

GramMatrix quantum_gram(std::span<const ComplexMatrix> rhos, const KernelParams& params) {
  if (rhos.empty()) throw ArgumentError("quantum kernel: no density matrices");
  const int m = qubit_count(rhos.front());
  if (params.K < 1 || params.K > m) {
    throw ArgumentError("subsystem size K=" + std::to_string(params.K) + " outside [1, " + std::to_string(m) + "]");
  }
  return quantum_gram(rdm_geometry(rdm_features(rhos, params.K)), params);
}

GramMatrix rescale_trace(const GramMatrix& g, double N) {
  const double tr = g.values.trace();
  if (!(tr > 0.0) || !std::isfinite(tr)) throw NumericError("cannot rescale Gram matrix with trace " + std::to_string(tr));
  GramMatrix out{g.values * (N / tr), g.kind + ":rescaled"};
  if (g.kind.ends_with(":rescaled")) out.kind = g.kind;
  return out;
}

double min_eigenvalue(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

}  // namespace qkstudy
