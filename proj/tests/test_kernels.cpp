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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "qkstudy/errors.hpp"
#include "qkstudy/kernels.hpp"
#include "support.hpp"

using namespace qkstudy;

namespace {

std::vector<ComplexMatrix> random_rhos(int count, int n_qubits, std::uint64_t seed) {
  std::vector<ComplexMatrix> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(density_matrix(qkstudy::testing::random_state(n_qubits, seed + static_cast<std::uint64_t>(i))));
  }
  return out;
}

// Reference: explicit partial traces and matrix products per entry.
Eigen::MatrixXd oracle_gram(const std::vector<ComplexMatrix>& rhos, const KernelParams& p) {
  const int m = qubit_count(rhos.front());
  const auto sets = subsystems(m, p.K);
  const double alpha = p.alpha_mode == AlphaMode::mean ? 1.0 / static_cast<double>(sets.size()) : 1.0;
  const auto n = static_cast<Eigen::Index>(rhos.size());
  std::vector<std::vector<ComplexMatrix>> red(rhos.size());
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    for (const auto& s : sets) red[i].push_back(partial_trace(rhos[i], s));
  }
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double inner = 0.0, dist = 0.0, purity_i = 0.0, purity_j = 0.0;
      for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto& a = red[static_cast<std::size_t>(i)][k];
        const auto& b = red[static_cast<std::size_t>(j)][k];
        inner += (a * b).trace().real();
        dist += (a - b).squaredNorm();
        purity_i += (a * a).trace().real();
        purity_j += (b * b).trace().real();
      }
      switch (p.basis) {
        case QuantumBasis::inner: out(i, j) = alpha * inner; break;
        case QuantumBasis::distance: out(i, j) = std::exp(-p.gamma * alpha * dist); break;
        case QuantumBasis::inner_normalized: out(i, j) = inner / std::sqrt(purity_i * purity_j); break;
      }
    }
  }
  return out;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("classical kernels") {
  Eigen::MatrixXd X(2, 2);
  X << 1, 2, 3, 4;
  const GramMatrix lin = classical_gram(X, {ClassicalKind::linear});
  CHECK(lin.values(0, 1) == 11.0);
  CHECK(lin.values(0, 0) == 5.0);
  CHECK(lin.trace == 30.0);

  Eigen::MatrixXd x1(2, 1);
  x1 << 0, 1;
  const GramMatrix rbf = classical_gram(x1, {ClassicalKind::rbf, 1.0});
  CHECK(rbf.values(0, 1) == doctest::Approx(0.3678794).epsilon(1e-7));
  CHECK(rbf.values(0, 0) == 1.0);

  const GramMatrix poly = classical_gram(X, {ClassicalKind::polynomial, 0.5, 2, 1.0});
  CHECK(poly.values(0, 1) == doctest::Approx(std::pow(0.5 * 11 + 1, 2)));
  const GramMatrix lap = classical_gram(X, {ClassicalKind::laplacian, 0.25});
  CHECK(lap.values(0, 1) == doctest::Approx(std::exp(-0.25 * 4)));
  CHECK(lap.values(1, 1) == 1.0);
  const GramMatrix sig = classical_gram(X, {ClassicalKind::sigmoid, 0.1, 3, -0.5});
  CHECK(sig.values(0, 1) == doctest::Approx(std::tanh(0.1 * 11 - 0.5)));

  const Eigen::MatrixXd R = qkstudy::testing::random_matrix(15, 3, 4);
  for (ClassicalKind kind : kClassicalKinds) {
    const ClassicalKernel k{kind, 0.3, 3, 0.2};
    const GramMatrix g = classical_gram(R, k);
    CHECK(max_abs(g.values - g.values.transpose()) < 1e-12);
    CHECK(max_abs(classical_cross(R, R, k) - g.values) < 1e-12);
  }
  Eigen::MatrixXd bad = R;
  bad(3, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(classical_gram(bad, {}), ArgumentError);
  CHECK_THROWS_AS(classical_cross(R, bad, {}), ArgumentError);
}

TEST_CASE("subsystem enumeration") {
  const auto s = subsystems(4, 2);
  CHECK(s.size() == 6);
  CHECK(s.front() == std::vector<int>{0, 1});
  CHECK(s[1] == std::vector<int>{0, 2});
  CHECK(s.back() == std::vector<int>{2, 3});
  auto binom = [](int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return static_cast<std::size_t>(std::lround(r));
  };
  for (int m = 1; m <= 8; ++m) {
    for (int k = 1; k <= m; ++k) CHECK(subsystems(m, k).size() == binom(m, k));
  }
  CHECK_THROWS_AS(subsystems(3, 0), ArgumentError);
  CHECK_THROWS_AS(subsystems(3, 4), ArgumentError);
}

TEST_CASE("quantum kernels agree with explicit partial traces") {
  const auto rhos = random_rhos(6, 4, 30);
  for (QuantumBasis b : {QuantumBasis::inner, QuantumBasis::distance, QuantumBasis::inner_normalized}) {
    for (AlphaMode a : {AlphaMode::mean, AlphaMode::unit}) {
      for (int K = 1; K <= 4; ++K) {
        const KernelParams p{b, K, 0.7, a};
        CHECK(max_abs(quantum_gram(rhos, p).values - oracle_gram(rhos, p)) < 1e-12);
      }
    }
  }
}

TEST_CASE("statevector and density-matrix paths coincide") {
  std::vector<Statevector> states;
  std::vector<ComplexMatrix> rhos;
  for (int i = 0; i < 5; ++i) {
    states.push_back(qkstudy::testing::random_state(3, 50 + static_cast<std::uint64_t>(i)));
    rhos.push_back(density_matrix(states.back()));
  }
  for (int K = 1; K <= 3; ++K) {
    const RdmFeatures a = rdm_features(std::span<const Statevector>(states), K);
    const RdmFeatures b = rdm_features(std::span<const ComplexMatrix>(rhos), K);
    CHECK(a.n_subsystems == static_cast<int>(subsystems(3, K).size()));
    CHECK(max_abs(a.rows - b.rows) < 1e-14);
  }
}

TEST_CASE("fidelity equivalence at full subsystem size") {
  std::vector<Statevector> states;
  std::vector<ComplexMatrix> rhos;
  for (int i = 0; i < 8; ++i) {
    states.push_back(qkstudy::testing::random_state(3, 70 + static_cast<std::uint64_t>(i)));
    rhos.push_back(density_matrix(states.back()));
  }
  const GramMatrix g = quantum_gram(rhos, {QuantumBasis::inner, 3, 1.0, AlphaMode::unit});
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      const double fidelity = std::norm(states[i].amplitudes.dot(states[j].amplitudes));
      CHECK(std::abs(g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - fidelity) < 1e-10);
    }
  }
}

TEST_CASE("quantum kernel properties") {
  const auto rhos = random_rhos(10, 4, 90);
  SUBCASE("unit diagonal for distance and normalized inner") {
    for (int K = 1; K <= 4; ++K) {
      const GramMatrix d = quantum_gram(rhos, {QuantumBasis::distance, K, 2.0, AlphaMode::mean});
      const GramMatrix n = quantum_gram(rhos, {QuantumBasis::inner_normalized, K, 1.0, AlphaMode::mean});
      for (Eigen::Index i = 0; i < 10; ++i) {
        CHECK(d.values(i, i) == 1.0);
        CHECK(std::abs(n.values(i, i) - 1.0) < 1e-10);
      }
      CHECK(std::abs(d.trace - 10.0) < 1e-12);
    }
  }
  SUBCASE("inner entries lie in [0, 1] with mean weighting") {
    for (int K = 1; K <= 4; ++K) {
      const GramMatrix g = quantum_gram(rhos, {QuantumBasis::inner, K, 1.0, AlphaMode::mean});
      CHECK(g.values.minCoeff() >= 0.0);
      CHECK(g.values.maxCoeff() <= 1.0 + 1e-12);
    }
  }
  SUBCASE("distance entries shrink as gamma grows") {
    Eigen::MatrixXd prev = quantum_gram(rhos, {QuantumBasis::distance, 2, 0.01, AlphaMode::mean}).values;
    for (double gamma : {0.1, 1.0, 10.0, 100.0}) {
      const Eigen::MatrixXd cur = quantum_gram(rhos, {QuantumBasis::distance, 2, gamma, AlphaMode::mean}).values;
      CHECK((cur.array() <= prev.array()).all());
      CHECK(cur.minCoeff() > 0.0);
      prev = cur;
    }
  }
  SUBCASE("unit weighting equals mean weighting with gamma scaled by the subsystem count") {
    for (int K = 1; K <= 4; ++K) {
      const double nk = static_cast<double>(subsystems(4, K).size());
      const GramMatrix unit = quantum_gram(rhos, {QuantumBasis::distance, K, 0.3, AlphaMode::unit});
      const GramMatrix mean = quantum_gram(rhos, {QuantumBasis::distance, K, 0.3 * nk, AlphaMode::mean});
      CHECK(max_abs(unit.values - mean.values) < 1e-12);
    }
  }
  SUBCASE("symmetric and positive semidefinite") {
    for (QuantumBasis b : {QuantumBasis::inner, QuantumBasis::distance, QuantumBasis::inner_normalized}) {
      const GramMatrix g = quantum_gram(rhos, {b, 2, 1.5, AlphaMode::mean});
      CHECK(max_abs(g.values - g.values.transpose()) < 1e-14);
      CHECK(min_eigenvalue(g.values) >= -1e-8 * max_eigenvalue(g.values));
    }
  }
  SUBCASE("gamma is ignored by the inner bases") {
    const GramMatrix a = quantum_gram(rhos, {QuantumBasis::inner, 2, 0.1, AlphaMode::mean});
    const GramMatrix b = quantum_gram(rhos, {QuantumBasis::inner, 2, 50.0, AlphaMode::mean});
    CHECK(a.values == b.values);
    CHECK_NOTHROW(quantum_gram(rhos, {QuantumBasis::inner, 2, -1.0, AlphaMode::mean}));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(quantum_gram(rhos, {QuantumBasis::inner, 0, 1.0, AlphaMode::mean}), ArgumentError);
    CHECK_THROWS_AS(quantum_gram(rhos, {QuantumBasis::inner, 5, 1.0, AlphaMode::mean}), ArgumentError);
    CHECK_THROWS_AS(quantum_gram(rhos, {QuantumBasis::distance, 1, 0.0, AlphaMode::mean}), ArgumentError);
    std::vector<ComplexMatrix> mixed = rhos;
    mixed.push_back(ComplexMatrix::Identity(4, 4) / 4.0);
    CHECK_THROWS_AS(quantum_gram(mixed, {QuantumBasis::inner, 1, 1.0, AlphaMode::mean}), ArgumentError);
  }
}

TEST_CASE("trace rescaling") {
  const GramMatrix g(2.0 * Eigen::MatrixXd::Identity(3, 3), "test");
  const GramMatrix r = rescale_trace(g, 3);
  CHECK(max_abs(r.values - Eigen::MatrixXd::Identity(3, 3)) < 1e-15);
  CHECK(r.trace == doctest::Approx(3.0));

  const auto rhos = random_rhos(7, 3, 5);
  const GramMatrix d = quantum_gram(rhos, {QuantumBasis::distance, 1, 1.0, AlphaMode::mean});
  CHECK(rescale_trace(d, 7).values == d.values);

  const GramMatrix in = quantum_gram(rhos, {QuantumBasis::inner, 2, 1.0, AlphaMode::mean});
  const GramMatrix once = rescale_trace(in, 7);
  CHECK(std::abs(once.trace - 7.0) < 1e-8);
  CHECK(max_abs(rescale_trace(once, 7).values - once.values) < 1e-14);
  CHECK(std::abs(once.values(0, 1) / once.values(1, 2) - in.values(0, 1) / in.values(1, 2)) < 1e-12);

  CHECK_THROWS_AS(rescale_trace(GramMatrix(Eigen::MatrixXd::Zero(2, 2), "zero"), 2), NumericError);
  CHECK_THROWS_AS(rescale_trace(GramMatrix(-Eigen::MatrixXd::Identity(2, 2), "neg"), 2), NumericError);
}

TEST_CASE("extreme eigenvalues") {
  CHECK(min_eigenvalue(Eigen::MatrixXd::Identity(3, 3)) == doctest::Approx(1.0));
  Eigen::MatrixXd d = Eigen::Vector2d(0.0, 1.0).asDiagonal();
  CHECK(min_eigenvalue(d) == doctest::Approx(0.0));
  CHECK(max_eigenvalue(d) == doctest::Approx(1.0));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd a = qkstudy::testing::random_matrix(4, 9, seed);
    CHECK(min_eigenvalue(a.transpose() * a) >= -1e-10);
  }
}
