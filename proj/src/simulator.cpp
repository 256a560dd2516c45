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

#include "qkstudy/simulator.hpp"

#include <cmath>
#include <random>
#include <string>

#include "qkstudy/errors.hpp"
#include "qkstudy/seeding.hpp"

namespace qkstudy {

namespace {

using cd = std::complex<double>;

void require_feature_count(std::size_t n) {
  if (n < 1 || n > static_cast<std::size_t>(kMaxFeatures)) {
    throw DimensionError("feature map supports 1.." + std::to_string(kMaxFeatures) +
                         " features, got " + std::to_string(n));
  }
}

void require_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw ArgumentError("non-finite feature value");
  }
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Operator acting as `op` on qubits q and q+1 of an n-qubit register.
ComplexMatrix pauli_pair(const ComplexMatrix& op, int q, int n) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (int k = 0; k < n; ++k) {
    if (k == q || k == q + 1) {
      out = kron(out, op);
    } else {
      out = kron(out, ComplexMatrix::Identity(2, 2));
    }
  }
  return out;
}

}  // namespace

Statevector haar_random_qubit_state(std::uint64_t seed, int qubit_index) {
  std::mt19937_64 rng(seed ^ splitmix64(static_cast<std::uint64_t>(qubit_index)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double re0 = normal(rng);
  const double im0 = normal(rng);
  const double re1 = normal(rng);
  const double im1 = normal(rng);
  Statevector s{1, ComplexVector(2)};
  s.amplitudes << cd(re0, im0), cd(re1, im1);
  s.amplitudes /= s.amplitudes.norm();
  return s;
}

Statevector haar_product_state(std::uint64_t seed, int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw DimensionError("qubit count out of range: " + std::to_string(n_qubits));
  }
  ComplexVector amps = ComplexVector::Ones(1);
  for (int q = 0; q < n_qubits; ++q) {
    const ComplexVector single = haar_random_qubit_state(seed, q).amplitudes;
    ComplexVector next(amps.size() * 2);
    for (Eigen::Index i = 0; i < amps.size(); ++i) {
      next(2 * i) = amps(i) * single(0);
      next(2 * i + 1) = amps(i) * single(1);
    }
    amps = std::move(next);
  }
  return {n_qubits, std::move(amps)};
}

ComplexMatrix heisenberg_gate(double theta) {
  // XX + YY + ZZ = 2 SWAP - I, and SWAP^2 = I.
  const cd phase = std::exp(cd(0.0, theta));
  const cd diag = phase * std::cos(2.0 * theta);
  const cd off = phase * cd(0.0, -std::sin(2.0 * theta));
  ComplexMatrix u = ComplexMatrix::Zero(4, 4);
  u(0, 0) = phase * std::exp(cd(0.0, -2.0 * theta));
  u(3, 3) = u(0, 0);
  u(1, 1) = diag;
  u(2, 2) = diag;
  u(1, 2) = off;
  u(2, 1) = off;
  return u;
}

void apply_two_qubit_gate(Statevector& state, const ComplexMatrix& gate, int a, int b) {
  const int n = state.n_qubits;
  if (a == b || a < 0 || b < 0 || a >= n || b >= n) {
    throw ArgumentError("invalid qubit pair for two-qubit gate");
  }
  const std::size_t bit_a = std::size_t{1} << (n - 1 - a);
  const std::size_t bit_b = std::size_t{1} << (n - 1 - b);
  const std::size_t dim = std::size_t{1} << n;
  auto& amp = state.amplitudes;
  for (std::size_t base = 0; base < dim; ++base) {
    if (base & (bit_a | bit_b)) continue;
    const std::size_t idx[4] = {base, base | bit_b, base | bit_a, base | bit_a | bit_b};
    const cd in[4] = {amp(idx[0]), amp(idx[1]), amp(idx[2]), amp(idx[3])};
    for (int r = 0; r < 4; ++r) {
      amp(idx[r]) = gate(r, 0) * in[0] + gate(r, 1) * in[1] + gate(r, 2) * in[2] + gate(r, 3) * in[3];
    }
  }
}

Statevector embed(std::span<const double> x, const FeatureMapParams& params) {
  require_feature_count(x.size());
  require_finite(x);
  if (params.trotter_steps < 1) throw ArgumentError("trotter_steps must be >= 1");
  if (!std::isfinite(params.t)) throw ArgumentError("evolution time must be finite");

  const int n = static_cast<int>(x.size());
  Statevector state = haar_product_state(params.seed, n + 1);
  const double dt = params.t / params.trotter_steps;
  std::vector<ComplexMatrix> gates;
  gates.reserve(x.size());
  for (double xj : x) gates.push_back(heisenberg_gate(dt * xj));

  for (int step = 0; step < params.trotter_steps; ++step) {
    for (int j = 0; j < n; ++j) apply_two_qubit_gate(state, gates[j], j, j + 1);
  }
  return state;
}

ComplexMatrix heisenberg_chain_hamiltonian(std::span<const double> couplings) {
  require_feature_count(couplings.size());
  const int n_qubits = static_cast<int>(couplings.size()) + 1;
  ComplexMatrix x(2, 2), y(2, 2), z(2, 2);
  x << 0, 1, 1, 0;
  y << 0, cd(0, -1), cd(0, 1), 0;
  z << 1, 0, 0, -1;

  const Eigen::Index dim = Eigen::Index{1} << n_qubits;
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  for (int j = 0; j + 1 < n_qubits; ++j) {
    const double c = couplings[j];
    if (c == 0.0) continue;
    h += c * (pauli_pair(x, j, n_qubits) + pauli_pair(y, j, n_qubits) + pauli_pair(z, j, n_qubits));
  }
  return h;
}

Statevector embed_exact(std::span<const double> x, const FeatureMapParams& params) {
  require_feature_count(x.size());
  require_finite(x);
  const int n = static_cast<int>(x.size());
  Statevector state = haar_product_state(params.seed, n + 1);
  const ComplexMatrix h = heisenberg_chain_hamiltonian(x);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(h);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const ComplexMatrix& v = eig.eigenvectors();
  ComplexVector coeffs = v.adjoint() * state.amplitudes;
  for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
    coeffs(k) *= std::exp(cd(0.0, -params.t * lambda(k)));
  }
  state.amplitudes = v * coeffs;
  return state;
}

ComplexMatrix density_matrix(const Statevector& s) {
  return s.amplitudes * s.amplitudes.adjoint();
}

int qubit_count(const ComplexMatrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) throw ArgumentError("operator must be square");
  const auto dim = static_cast<std::uint64_t>(m.rows());
  if ((dim & (dim - 1)) != 0) throw ArgumentError("operator dimension is not a power of two");
  int q = 0;
  while ((std::uint64_t{1} << q) < dim) ++q;
  return q;
}

namespace {

// Index tables splitting a register into kept and traced qubits: the full
// index of (kept value a, traced value c) is kept[a] | traced[c].
struct IndexSplit {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> traced;
};

IndexSplit split_indices(int m, std::span<const int> keep) {
  if (keep.empty()) throw ArgumentError("partial_trace: keep set is empty");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= m) throw ArgumentError("partial_trace: qubit index out of range");
    if (i > 0 && keep[i] <= keep[i - 1]) throw ArgumentError("partial_trace: keep set must be strictly ascending");
  }
  std::vector<int> kept(keep.begin(), keep.end());
  std::vector<int> traced;
  for (int q = 0, pos = 0; q < m; ++q) {
    if (pos < static_cast<int>(kept.size()) && kept[pos] == q) {
      ++pos;
    } else {
      traced.push_back(q);
    }
  }
  auto table = [m](const std::vector<int>& qubits) {
    const int width = static_cast<int>(qubits.size());
    std::vector<std::size_t> out(std::size_t{1} << width, 0);
    for (std::size_t value = 0; value < out.size(); ++value) {
      for (int i = 0; i < width; ++i) {
        if (value & (std::size_t{1} << (width - 1 - i))) out[value] |= std::size_t{1} << (m - 1 - qubits[i]);
      }
    }
    return out;
  };
  return {table(kept), table(traced)};
}

}  // namespace

ComplexMatrix partial_trace(const ComplexMatrix& rho, std::span<const int> keep) {
  const IndexSplit split = split_indices(qubit_count(rho), keep);
  const auto dk = static_cast<Eigen::Index>(split.kept.size());
  ComplexMatrix out(dk, dk);
  for (Eigen::Index a = 0; a < dk; ++a) {
    for (Eigen::Index b = 0; b < dk; ++b) {
      cd acc = 0.0;
      for (std::size_t c : split.traced) acc += rho(split.kept[a] | c, split.kept[b] | c);
      out(a, b) = acc;
    }
  }
  return out;
}

ComplexMatrix reduced_density_matrix(const Statevector& s, std::span<const int> keep) {
  const IndexSplit split = split_indices(s.n_qubits, keep);
  const auto dk = static_cast<Eigen::Index>(split.kept.size());
  const auto dt = static_cast<Eigen::Index>(split.traced.size());
  ComplexMatrix psi(dk, dt);
  for (Eigen::Index a = 0; a < dk; ++a) {
    for (Eigen::Index c = 0; c < dt; ++c) psi(a, c) = s.amplitudes(split.kept[a] | split.traced[c]);
  }
  return psi * psi.adjoint();
}

bool is_hermitian(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_unitary(const ComplexMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const ComplexMatrix d = m * m.adjoint() - ComplexMatrix::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace qkstudy
