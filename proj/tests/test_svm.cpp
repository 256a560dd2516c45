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
#include <limits>
#include <random>

#include "qkstudy/errors.hpp"
#include "qkstudy/kernels.hpp"
#include "qkstudy/svm.hpp"
#include "support.hpp"

using namespace qkstudy;

namespace {

double objective(const Eigen::MatrixXd& K, const std::vector<int>& y, const Eigen::VectorXd& a) {
  double lin = a.sum();
  double quad = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      quad += a(i) * a(j) * y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * K(i, j);
    }
  }
  return lin - 0.5 * quad;
}

// Exhaustive search over the feasible grid; the last multiplier is fixed by
// the equality constraint and must land inside the box.
double brute_force_dual(const Eigen::MatrixXd& K, const std::vector<int>& y, double C, double step) {
  const auto n = static_cast<int>(y.size());
  const int steps = static_cast<int>(std::lround(C / step));
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd a(n);
  std::vector<int> idx(static_cast<std::size_t>(n - 1), 0);
  while (true) {
    double balance = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      a(i) = idx[static_cast<std::size_t>(i)] * step;
      balance += a(i) * y[static_cast<std::size_t>(i)];
    }
    const double last = -balance * y[static_cast<std::size_t>(n - 1)];
    if (last >= -1e-12 && last <= C + 1e-12) {
      a(n - 1) = std::clamp(last, 0.0, C);
      best = std::max(best, objective(K, y, a));
    }
    int d = 0;
    while (d < n - 1 && ++idx[static_cast<std::size_t>(d)] > steps) idx[static_cast<std::size_t>(d++)] = 0;
    if (d == n - 1) break;
  }
  return best;
}

double equality_residual(const SvmModel& m) { return std::abs(m.dual_coefficients.sum()); }

}  // namespace

TEST_CASE("two symmetric points") {
  const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(2, 2);
  const std::vector<int> y = {1, -1};
  const SvmModel m = train(K, y, 10.0);
  CHECK(m.support_indices.size() == 2);
  CHECK(m.converged);
  CHECK(decision_value(m, std::vector<double>{1.0, 0.0}) > 0.0);
  CHECK(decision_value(m, std::vector<double>{0.0, 1.0}) < 0.0);
  CHECK(m.dual_coefficients(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m.dual_coefficients(1) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("dual objective matches exhaustive search on four points") {
  const Eigen::MatrixXd X = qkstudy::testing::random_matrix(4, 2, 77);
  const Eigen::MatrixXd K = classical_gram(X, {ClassicalKind::rbf, 0.5}).values;
  const std::vector<int> y = {1, -1, 1, -1};
  const double C = 0.5;
  const DualSolution sol = solve_dual(K, y, C, 1e-6);
  const double oracle = brute_force_dual(K, y, C, 1e-3);
  CHECK(std::abs(sol.objective - oracle) < 1e-3);
  CHECK(sol.objective >= oracle - 1e-6);
  CHECK(std::abs(sol.objective - dual_objective(K, y, sol.alpha)) < 1e-12);
}

TEST_CASE("dual objective matches exhaustive search on three points") {
  const Eigen::MatrixXd K = qkstudy::testing::random_psd(3, 5);
  for (const std::vector<int>& y : {std::vector<int>{1, 1, -1}, std::vector<int>{-1, 1, 1}, std::vector<int>{1, -1, -1}}) {
    const DualSolution sol = solve_dual(K, y, 1.0, 1e-6);
    const double oracle = brute_force_dual(K, y, 1.0, 1e-3);
    CHECK(std::abs(sol.objective - oracle) < 1e-3);
    CHECK(sol.objective >= oracle - 1e-6);
  }
}

TEST_CASE("constraints hold at convergence") {
  const Dataset ds = qkstudy::testing::blobs(80, 3, 1.5, 4);
  const Eigen::MatrixXd K = classical_gram(ds.X, {ClassicalKind::rbf, 0.3}).values;
  const std::vector<int> y = to_signed(ds.y);
  for (double C : {0.1, 1.0, 100.0}) {
    const SvmModel m = train(K, y, C);
    CHECK(m.converged);
    CHECK(equality_residual(m) < 1e-8);
    CHECK(m.kkt_gap <= 1e-3);
    for (Eigen::Index i = 0; i < m.dual_coefficients.size(); ++i) {
      const double a = m.dual_coefficients(i) * y[static_cast<std::size_t>(i)];
      CHECK(a >= 0.0);
      CHECK(a <= C + 1e-12);
    }
    const DualSolution sol = solve_dual(K, y, C);
    CHECK(kkt_gap(K, y, sol.alpha, C) <= 1e-3);
  }
}

TEST_CASE("non-PSD kernels still converge") {
  const Dataset ds = qkstudy::testing::blobs(40, 2, 1.0, 8);
  const Eigen::MatrixXd K = classical_gram(ds.X, {ClassicalKind::sigmoid, 1.0, 3, -1.0}).values;
  const SvmModel m = train(K, to_signed(ds.y), 1.0);
  CHECK(m.converged);
  CHECK(equality_residual(m) < 1e-8);
}

TEST_CASE("prediction") {
  SvmModel m;
  m.dual_coefficients = Eigen::VectorXd::Zero(3);
  m.bias = 0.5;
  CHECK(predict(m, std::vector<double>{0, 0, 0}) == 1);
  m.bias = 0.0;
  CHECK(predict(m, std::vector<double>{0, 0, 0}) == 1);
  m.bias = -0.1;
  CHECK(predict(m, std::vector<double>{0, 0, 0}) == -1);
  CHECK_THROWS_AS(predict(m, std::vector<double>{0, 0}), ArgumentError);

  SUBCASE("separable training data is fit exactly") {
    const Dataset ds = qkstudy::testing::blobs(40, 2, 8.0, 2);
    const Eigen::MatrixXd K = classical_gram(ds.X, {ClassicalKind::linear}).values;
    const std::vector<int> y = to_signed(ds.y);
    const SvmModel model = train(K, y, 100.0);
    CHECK(accuracy(predict(model, K), y) == 1.0);
  }
  SUBCASE("random labels generalize at chance") {
    std::mt19937_64 rng(12);
    const Eigen::MatrixXd X = qkstudy::testing::random_matrix(400, 3, 13);
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) y.push_back(rng() % 2 ? 1 : -1);
    std::vector<int> tr, te;
    for (int i = 0; i < 400; ++i) (i < 200 ? tr : te).push_back(i);
    const Eigen::MatrixXd K = classical_gram(X, {ClassicalKind::rbf, 1.0}).values;
    std::vector<int> ytr(y.begin(), y.begin() + 200), yte(y.begin() + 200, y.end());
    const SvmModel model = train(submatrix(K, tr, tr), ytr, 1.0);
    CHECK(std::abs(accuracy(predict(model, submatrix(K, te, tr)), yte) - 0.5) <= 0.1);
  }
  SUBCASE("zero coefficients do not change predictions") {
    const Dataset ds = qkstudy::testing::blobs(30, 2, 2.0, 3);
    const Eigen::MatrixXd K = classical_gram(ds.X, {ClassicalKind::rbf, 0.5}).values;
    const SvmModel model = train(K, to_signed(ds.y), 0.5);
    SvmModel copy = model;
    for (Eigen::Index i = 0; i < copy.dual_coefficients.size(); ++i) {
      if (copy.dual_coefficients(i) == 0.0) copy.dual_coefficients(i) += 0.0;
    }
    CHECK(predict(copy, K) == predict(model, K));
  }
}

TEST_CASE("accuracy") {
  CHECK(accuracy(std::vector<int>{1, -1, 1, 1}, std::vector<int>{1, 1, 1, -1}) == 0.5);
  CHECK_THROWS_AS(accuracy(std::vector<int>{1}, std::vector<int>{1, 1}), ArgumentError);
}

TEST_CASE("stratified folds") {
  std::vector<int> y;
  for (int i = 0; i < 47; ++i) y.push_back(i % 3 == 0 ? 1 : -1);
  const auto folds = stratified_folds(y, 5, 9);
  CHECK(folds == stratified_folds(y, 5, 9));
  CHECK(folds != stratified_folds(y, 5, 10));
  std::vector<int> size(5, 0), pos(5, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ++size[static_cast<std::size_t>(folds[i])];
    if (y[i] == 1) ++pos[static_cast<std::size_t>(folds[i])];
  }
  CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
  CHECK(*std::max_element(pos.begin(), pos.end()) - *std::min_element(pos.begin(), pos.end()) <= 1);
}

TEST_CASE("cross validation") {
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) y.push_back(i < 10 ? 1 : -1);
  Eigen::MatrixXd block(20, 20);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) block(i, j) = y[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
  }
  CHECK(cross_validate(block, y, 1.0, 5, 1) == 1.0);
  CHECK(cross_validate(block, y, 1.0, 5, 1) == cross_validate(block, y, 1.0, 5, 1));
  CHECK_THROWS_AS(cross_validate(block.topLeftCorner(4, 4), std::vector<int>{1, -1, 1, -1}, 1.0, 5, 1), ArgumentError);
}

TEST_CASE("input validation") {
  const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(train(K, std::vector<int>{1, 1, 1}, 1.0), DegenerateProblemError);
  CHECK_NOTHROW(solve_dual(K, std::vector<int>{1, 1, 1}, 1.0));
  CHECK(solve_dual(K, std::vector<int>{1, 1, 1}, 1.0).alpha.isZero());
  CHECK_THROWS_AS(train(K, std::vector<int>{1, -1, 0}, 1.0), ArgumentError);
  CHECK_THROWS_AS(train(K, std::vector<int>{1, -1}, 1.0), ArgumentError);
  CHECK_THROWS_AS(train(K, std::vector<int>{1, -1, 1}, 0.0), ArgumentError);
  CHECK_THROWS_AS(train(Eigen::MatrixXd::Identity(3, 2), std::vector<int>{1, -1, 1}, 1.0), ArgumentError);
  CHECK(to_signed(std::vector<int>{0, 1}) == std::vector<int>{-1, 1});
  CHECK(to_binary(std::vector<int>{-1, 1}) == std::vector<int>{0, 1});
}
