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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "qkstudy/errors.hpp"
#include "qkstudy/gd.hpp"
#include "support.hpp"

using namespace qkstudy;

namespace {

GramMatrix gram(const Eigen::MatrixXd& m) { return GramMatrix(m, "test"); }

// Eigenvalues clipped at zero so rank-deficient inputs stay real.
Eigen::MatrixXd clipped_root(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  const Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

// Shifted away from singularity, then back to trace n.
Eigen::MatrixXd well_conditioned(Eigen::Index n, std::uint64_t seed) {
  Eigen::MatrixXd m = qkstudy::testing::random_psd(n, seed) + Eigen::MatrixXd::Identity(n, n);
  return m * (static_cast<double>(n) / m.trace());
}

// Plain inverse in place of the floored pseudo-inverse.
double oracle_g(const Eigen::MatrixXd& kc, const Eigen::MatrixXd& kq) {
  const Eigen::MatrixXd root = clipped_root(kq);
  const Eigen::MatrixXd m = root * kc.inverse() * root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()));
  return std::sqrt(em.eigenvalues().cwiseAbs().maxCoeff());
}

std::vector<int> oracle_labels(const Eigen::MatrixXd& kc, const Eigen::MatrixXd& kq, double lambda) {
  const auto n = kc.rows();
  const Eigen::MatrixXd root = clipped_root(kq);
  const Eigen::MatrixXd inv = (kc + lambda * Eigen::MatrixXd::Identity(n, n)).inverse();
  Eigen::MatrixXd m = root * inv * root;
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m);
  Eigen::Index top = 0;
  em.eigenvalues().cwiseAbs().maxCoeff(&top);
  Eigen::VectorXd y = root * em.eigenvectors().col(top);
  if (y.sum() < 0) y = -y;
  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 ? sorted[static_cast<std::size_t>(n / 2)]
                              : 0.5 * (sorted[static_cast<std::size_t>(n / 2 - 1)] + sorted[static_cast<std::size_t>(n / 2)]);
  std::vector<int> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(y(i) > median ? 1 : 0);
  return out;
}

}  // namespace

TEST_CASE("geometric difference of a matrix with itself is one") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(5, 5);
  CHECK(geometric_difference(gram(id), gram(id)).g == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd k = qkstudy::testing::random_psd(20, seed);
    CHECK(std::abs(geometric_difference(gram(k), gram(k)).g - 1.0) < 1e-6);
  }
}

TEST_CASE("diagonal instance") {
  Eigen::MatrixXd kc = Eigen::Vector2d(0.5, 1.5).asDiagonal();
  const GdResult r = geometric_difference(gram(kc), gram(Eigen::MatrixXd::Identity(2, 2)));
  CHECK(std::abs(r.g - std::sqrt(2.0)) < 1e-9);
  CHECK(r.condition_diagnostic == doctest::Approx(3.0));
}

TEST_CASE("agrees with a plain-inverse computation") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd kc = well_conditioned(15, 10 + seed);
    const Eigen::MatrixXd kq = well_conditioned(15, 20 + seed);
    CHECK(geometric_difference(gram(kc), gram(kq)).g == doctest::Approx(oracle_g(kc, kq)).epsilon(1e-8));
    CHECK(geometric_difference(prepare_classical(gram(kc)), gram(kq)).g ==
          geometric_difference(gram(kc), gram(kq)).g);
  }
}

TEST_CASE("asymmetry and basis independence") {
  const Eigen::MatrixXd a = qkstudy::testing::random_psd(8, 1);
  const Eigen::MatrixXd b = qkstudy::testing::random_psd(8, 2);
  const double ab = geometric_difference(gram(a), gram(b)).g;
  const double ba = geometric_difference(gram(b), gram(a)).g;
  CHECK(std::abs(ab - ba) > 1e-6);

  const Eigen::MatrixXd o = qkstudy::testing::random_orthogonal(8, 3);
  const double rotated = geometric_difference(gram(o * a * o.transpose()), gram(o * b * o.transpose())).g;
  CHECK(std::abs(rotated - ab) < 1e-8);
}

TEST_CASE("singular classical matrices use the floored pseudo-inverse") {
  const Eigen::MatrixXd kc = qkstudy::testing::random_psd(10, 5, 3);
  const GdResult r = geometric_difference(gram(kc), gram(Eigen::MatrixXd::Identity(10, 10)));
  CHECK(std::isfinite(r.g));
  CHECK(std::isinf(r.condition_diagnostic));
}

TEST_CASE("preconditions") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(geometric_difference(gram(2.0 * id), gram(id)), ArgumentError);
  CHECK_THROWS_AS(geometric_difference(gram(id), gram(2.0 * id)), ArgumentError);
  CHECK_THROWS_AS(geometric_difference(gram(id), gram(Eigen::MatrixXd::Identity(4, 4))), ArgumentError);
  CHECK_NOTHROW(geometric_difference(gram((1.0 + 1e-7) * id), gram(id)));
  Eigen::MatrixXd skew = id;
  skew(0, 1) = 0.1;
  CHECK_THROWS_AS(geometric_difference(gram(id), gram(skew)), ArgumentError);
}

TEST_CASE("relabel") {
  const int n = 200;
  const Eigen::MatrixXd kc = qkstudy::testing::random_psd(n, 40);
  const Eigen::MatrixXd kq = qkstudy::testing::random_psd(n, 41, 30);

  SUBCASE("median split matches the direct construction") {
    const auto labels = relabel(gram(kc), gram(kq), {1.1, 0.0, 9});
    CHECK(labels == oracle_labels(kc, kq, 1.1));
    CHECK(std::count(labels.begin(), labels.end(), 0) == n / 2);
  }
  SUBCASE("odd sizes put the median in class 0") {
    const Eigen::MatrixXd c = qkstudy::testing::random_psd(31, 1);
    const Eigen::MatrixXd q = qkstudy::testing::random_psd(31, 2);
    const auto labels = relabel(gram(c), gram(q), {1.1, 0.0, 0});
    CHECK(std::count(labels.begin(), labels.end(), 0) == 16);
    CHECK(labels == oracle_labels(c, q, 1.1));
  }
  SUBCASE("five percent of positions are forced to zero") {
    const auto clean = relabel(gram(kc), gram(kq), {1.1, 0.0, 9});
    const auto flipped = relabel(gram(kc), gram(kq), {1.1, 0.05, 9});
    int changed = 0;
    for (int i = 0; i < n; ++i) {
      if (clean[static_cast<std::size_t>(i)] != flipped[static_cast<std::size_t>(i)]) {
        ++changed;
        CHECK(flipped[static_cast<std::size_t>(i)] == 0);
      }
    }
    CHECK(changed <= 10);
    CHECK(changed >= 1);
    // Ten forced positions over a half-positive vector change five labels on average.
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const auto f = relabel(gram(kc), gram(kq), {1.1, 0.05, seed});
      int c = 0;
      for (int i = 0; i < n; ++i) c += clean[static_cast<std::size_t>(i)] != f[static_cast<std::size_t>(i)];
      CHECK(c <= 10);
      total += c;
    }
    CHECK(std::abs(total / 200.0 - 5.0) < 0.5);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(relabel(gram(kc), gram(kq), {1.1, 0.05, 3}) == relabel(gram(kc), gram(kq), {1.1, 0.05, 3}));
    CHECK(relabel(gram(kc), gram(kq), {1.1, 0.05, 3}) != relabel(gram(kc), gram(kq), {1.1, 0.05, 4}));
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(relabel(gram(kc), gram(kq), {0.0, 0.05, 0}), ArgumentError);
    CHECK_THROWS_AS(relabel(gram(kc), gram(kq), {1.1, 1.0, 0}), ArgumentError);
    CHECK_THROWS_AS(relabel(gram(kc), gram(kq), {1.1, -0.1, 0}), ArgumentError);
    CHECK_THROWS_AS(relabel(gram(2.0 * kc), gram(kq), {}), ArgumentError);
  }
}
