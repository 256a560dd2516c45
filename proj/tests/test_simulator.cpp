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
#include <complex>
#include <vector>

#include <Eigen/Eigenvalues>

#include "qkstudy/errors.hpp"
#include "qkstudy/simulator.hpp"
#include "support.hpp"

using namespace qkstudy;
using cd = std::complex<double>;

namespace {

// XX + YY + ZZ written out by hand.
ComplexMatrix heisenberg_term() {
  ComplexMatrix h = ComplexMatrix::Zero(4, 4);
  h(0, 0) = 1.0;
  h(3, 3) = 1.0;
  h(1, 1) = -1.0;
  h(2, 2) = -1.0;
  h(1, 2) = 2.0;
  h(2, 1) = 2.0;
  return h;
}

ComplexMatrix expm_hermitian(const ComplexMatrix& h, double scale) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const Eigen::VectorXcd phases =
      (es.eigenvalues().cast<cd>() * cd(0.0, -scale)).array().exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

// Full-register operator of a two-qubit gate on neighbours (j, j+1).
ComplexMatrix lift(const ComplexMatrix& gate, int j, int n_qubits) {
  const ComplexMatrix left = ComplexMatrix::Identity(Eigen::Index{1} << j, Eigen::Index{1} << j);
  const int rest = n_qubits - j - 2;
  const ComplexMatrix right = ComplexMatrix::Identity(Eigen::Index{1} << rest, Eigen::Index{1} << rest);
  return kron(kron(left, gate), right);
}

double distance(const Statevector& a, const Statevector& b) { return (a.amplitudes - b.amplitudes).norm(); }

// Direct sum over traced-out bits, independent of the library's index maps.
ComplexMatrix brute_partial_trace(const ComplexMatrix& rho, const std::vector<int>& keep, int m) {
  const int k = static_cast<int>(keep.size());
  ComplexMatrix out = ComplexMatrix::Zero(Eigen::Index{1} << k, Eigen::Index{1} << k);
  const Eigen::Index dim = Eigen::Index{1} << m;
  auto kept_index = [&](Eigen::Index full) {
    Eigen::Index r = 0;
    for (int q : keep) r = (r << 1) | ((full >> (m - 1 - q)) & 1);
    return r;
  };
  auto traced_bits = [&](Eigen::Index full) {
    Eigen::Index r = full;
    for (int q : keep) r &= ~(Eigen::Index{1} << (m - 1 - q));
    return r;
  };
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (traced_bits(i) == traced_bits(j)) out(kept_index(i), kept_index(j)) += rho(i, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("haar qubit states are normalized and deterministic") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Statevector s = haar_random_qubit_state(seed, static_cast<int>(seed % 5));
    CHECK(s.n_qubits == 1);
    CHECK(std::abs(s.amplitudes.norm() - 1.0) < 1e-12);
  }
  const Statevector a = haar_random_qubit_state(7, 0);
  const Statevector b = haar_random_qubit_state(7, 0);
  CHECK(a.amplitudes == b.amplitudes);
  CHECK(haar_random_qubit_state(7, 1).amplitudes != a.amplitudes);
}

TEST_CASE("haar qubit population of |0> averages one half") {
  double sum = 0.0;
  const int samples = 100000;
  for (int s = 0; s < samples; ++s) sum += std::norm(haar_random_qubit_state(static_cast<std::uint64_t>(s), 0).amplitudes(0));
  CHECK(std::abs(sum / samples - 0.5) < 0.01);
}

TEST_CASE("haar product state is the tensor product of its qubits") {
  const Statevector p = haar_product_state(11, 3);
  ComplexMatrix acc = haar_random_qubit_state(11, 0).amplitudes;
  for (int q = 1; q < 3; ++q) acc = kron(acc, haar_random_qubit_state(11, q).amplitudes);
  CHECK((p.amplitudes - acc.col(0)).norm() < 1e-14);
  CHECK_THROWS_AS(haar_product_state(1, 0), DimensionError);
  CHECK_THROWS_AS(haar_product_state(1, kMaxQubits + 1), DimensionError);
}

TEST_CASE("heisenberg gate") {
  CHECK((heisenberg_gate(0.0) - ComplexMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
  const ComplexMatrix u = heisenberg_gate(0.7);
  CHECK((u * u.adjoint() - ComplexMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(is_unitary(u));

  SUBCASE("matches the eigendecomposition exponential") {
    for (double theta : {0.3, -1.1, 2.5}) {
      const ComplexMatrix oracle = expm_hermitian(heisenberg_term(), theta);
      CHECK((heisenberg_gate(theta) - oracle).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("triplet and singlet eigenphases") {
    const double theta = 0.4;
    Eigen::ComplexEigenSolver<ComplexMatrix> es(heisenberg_gate(theta));
    int triplet = 0, singlet = 0;
    for (Eigen::Index i = 0; i < 4; ++i) {
      const cd v = es.eigenvalues()(i);
      if (std::abs(v - std::exp(cd(0, -theta))) < 1e-10) ++triplet;
      if (std::abs(v - std::exp(cd(0, 3 * theta))) < 1e-10) ++singlet;
    }
    CHECK(triplet == 3);
    CHECK(singlet == 1);
  }
  SUBCASE("one-parameter group") {
    CHECK((heisenberg_gate(0.2) * heisenberg_gate(0.5) - heisenberg_gate(0.7)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("embed") {
  SUBCASE("zero features leave the initial state") {
    for (int n : {1, 3, 7}) {
      const std::vector<double> x(static_cast<std::size_t>(n), 0.0);
      const Statevector s = embed(x, {1.3, 9, 5});
      CHECK(s.n_qubits == n + 1);
      CHECK(s.amplitudes == haar_product_state(5, n + 1).amplitudes);
    }
  }
  SUBCASE("unit norm") {
    const std::vector<double> x = {0.3, -1.2, 2.0, 0.5, -0.7};
    for (int T : {1, 3, 27}) CHECK(std::abs(embed(x, {4.0, T, 2}).amplitudes.norm() - 1.0) < 1e-10);
  }
  SUBCASE("single feature is exact for every T") {
    const std::vector<double> x = {0.83};
    const Statevector ref = embed(x, {2.0, 1, 3});
    for (int T : {3, 9, 27, 81}) CHECK(distance(embed(x, {2.0, T, 3}), ref) < 1e-12);
    for (int T : {1, 9, 81}) CHECK(distance(embed_exact(x, {2.0, T, 3}), embed(x, {2.0, T, 3})) < 1e-10);
  }
  SUBCASE("matches an explicit product of lifted gates") {
    const std::vector<double> x = {0.4, -0.9, 1.3};
    const int n_qubits = 4;
    const double t = 0.8;
    const int T = 3;
    ComplexMatrix slice = ComplexMatrix::Identity(16, 16);
    for (int j = 0; j < 3; ++j) {
      const ComplexMatrix g = expm_hermitian(heisenberg_term(), t / T * x[static_cast<std::size_t>(j)]);
      slice = lift(g, j, n_qubits) * slice;  // ascending j: feature 0 acts first
    }
    ComplexVector psi = haar_product_state(17, n_qubits).amplitudes;
    for (int r = 0; r < T; ++r) psi = slice * psi;
    CHECK((embed(x, {t, T, 17}).amplitudes - psi).norm() < 1e-10);
  }
  SUBCASE("exact evolution matches the explicit exponential") {
    const std::vector<double> x = {0.5, 1.5};
    ComplexMatrix h = ComplexMatrix::Zero(8, 8);
    h += 0.5 * lift(heisenberg_term(), 0, 3);
    h += 1.5 * lift(heisenberg_term(), 1, 3);
    const ComplexVector psi = expm_hermitian(h, 0.9) * haar_product_state(4, 3).amplitudes;
    CHECK((embed_exact(x, {0.9, 1, 4}).amplitudes - psi).norm() < 1e-10);
    CHECK((heisenberg_chain_hamiltonian(x) - h).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("trotter error shrinks with more steps") {
    const std::vector<double> x = {0.7, -1.1, 0.9};
    const Statevector exact = embed_exact(x, {0.5, 1, 8});
    const double coarse = distance(embed(x, {0.5, 1, 8}), exact);
    const double fine = distance(embed(x, {0.5, 81, 8}), exact);
    CHECK(fine < coarse);
    CHECK(fine < coarse / 20.0);
  }
  SUBCASE("equal features are permutation invariant") {
    const std::vector<double> x(4, 0.6);
    std::vector<double> y = x;
    std::reverse(y.begin(), y.end());
    CHECK(distance(embed(x, {1.0, 3, 2}), embed(y, {1.0, 3, 2})) == 0.0);
  }
  SUBCASE("feature order matters in general") {
    CHECK(distance(embed(std::vector<double>{0.2, 1.4}, {1.0, 1, 2}), embed(std::vector<double>{1.4, 0.2}, {1.0, 1, 2})) >
          1e-6);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(embed(std::vector<double>{}, {}), DimensionError);
    CHECK_THROWS_AS(embed(std::vector<double>(8, 0.1), {}), DimensionError);
    CHECK_THROWS_AS(embed(std::vector<double>{NAN}, {}), ArgumentError);
    CHECK_THROWS_AS(embed(std::vector<double>{0.1}, {1.0, 0, 0}), ArgumentError);
  }
}

TEST_CASE("density matrices") {
  Statevector zero{1, ComplexVector::Zero(2)};
  zero.amplitudes(0) = 1.0;
  const ComplexMatrix r0 = density_matrix(zero);
  CHECK(r0(0, 0) == cd(1.0));
  CHECK(std::abs(r0(1, 1)) == 0.0);

  const Statevector s = qkstudy::testing::random_state(3, 21);
  const ComplexMatrix rho = density_matrix(s);
  CHECK(is_hermitian(rho));
  CHECK(std::abs(rho.trace() - 1.0) < 1e-10);
  CHECK(std::abs((rho * rho).trace() - 1.0) < 1e-10);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho);
  CHECK(es.eigenvalues()(es.eigenvalues().size() - 2) < 1e-10);
  CHECK(qubit_count(rho) == 3);
  CHECK_THROWS_AS(qubit_count(ComplexMatrix::Identity(3, 3)), ArgumentError);
}

TEST_CASE("partial trace") {
  SUBCASE("product state factorizes") {
    const Statevector a = qkstudy::testing::random_state(1, 1);
    const Statevector b = qkstudy::testing::random_state(2, 2);
    const Statevector ab{3, kron(a.amplitudes, b.amplitudes).col(0)};
    const ComplexMatrix rho = density_matrix(ab);
    const std::vector<int> keep_a = {0};
    const std::vector<int> keep_b = {1, 2};
    CHECK((partial_trace(rho, keep_a) - density_matrix(a)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((partial_trace(rho, keep_b) - density_matrix(b)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("bell state reduces to the maximally mixed state") {
    Statevector bell{2, ComplexVector::Zero(4)};
    bell.amplitudes(0) = bell.amplitudes(3) = 1.0 / std::sqrt(2.0);
    const std::vector<int> keep = {1};
    CHECK((partial_trace(density_matrix(bell), keep) - 0.5 * ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-15);
  }
  SUBCASE("agrees with a direct summation") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Statevector s = qkstudy::testing::random_state(4, 100 + seed);
      const ComplexMatrix rho = density_matrix(s);
      for (const std::vector<int>& keep : {std::vector<int>{0, 2}, std::vector<int>{3}, std::vector<int>{1, 2, 3}}) {
        const ComplexMatrix got = partial_trace(rho, keep);
        CHECK((got - brute_partial_trace(rho, keep, 4)).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((reduced_density_matrix(s, keep) - got).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(std::abs(got.trace() - 1.0) < 1e-12);
        CHECK(is_hermitian(got));
      }
    }
  }
  SUBCASE("keeping everything is the identity map") {
    const ComplexMatrix rho = density_matrix(qkstudy::testing::random_state(3, 9));
    const std::vector<int> all = {0, 1, 2};
    CHECK((partial_trace(rho, all) - rho).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("invalid keep sets") {
    const ComplexMatrix rho = density_matrix(qkstudy::testing::random_state(2, 9));
    CHECK_THROWS_AS(partial_trace(rho, std::vector<int>{}), ArgumentError);
    CHECK_THROWS_AS(partial_trace(rho, std::vector<int>{2}), ArgumentError);
    CHECK_THROWS_AS(partial_trace(rho, std::vector<int>{-1}), ArgumentError);
    CHECK_THROWS_AS(partial_trace(rho, std::vector<int>{1, 0}), ArgumentError);
    CHECK_THROWS_AS(partial_trace(rho, std::vector<int>{0, 0}), ArgumentError);
  }
}
