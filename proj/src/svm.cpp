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

#include "qkstudy/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "qkstudy/errors.hpp"

namespace qkstudy {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const Eigen::MatrixXd& K, std::span<const int> y, double C) {
  if (K.rows() != K.cols()) throw ArgumentError("svm: Gram matrix must be square");
  if (static_cast<std::size_t>(K.rows()) != y.size()) throw ArgumentError("svm: label count does not match Gram matrix");
  if (!(C > 0.0) || !std::isfinite(C)) throw ArgumentError("svm: C must be finite and > 0");
  for (int v : y) {
    if (v != 1 && v != -1) throw ArgumentError("svm: labels must be +1 or -1");
  }
}

bool in_up(int y, double a, double C) { return (y == 1 && a < C) || (y == -1 && a > 0.0); }
bool in_low(int y, double a, double C) { return (y == 1 && a > 0.0) || (y == -1 && a < C); }

// Gradient of the minimization form 1/2 a'Qa - e'a.
Eigen::VectorXd gradient(const Eigen::MatrixXd& K, std::span<const int> y, const Eigen::VectorXd& alpha) {
  const Eigen::Index n = K.rows();
  Eigen::VectorXd ya(n);
  for (Eigen::Index i = 0; i < n; ++i) ya(i) = y[i] * alpha(i);
  Eigen::VectorXd g = K * ya;
  for (Eigen::Index i = 0; i < n; ++i) g(i) = y[i] * g(i) - 1.0;
  return g;
}

// m(a) - M(a) over the up/low index sets.
double violation(std::span<const int> y, const Eigen::VectorXd& alpha, const Eigen::VectorXd& g, double C) {
  double gmax = -kInf, gmin = kInf;
  for (Eigen::Index t = 0; t < alpha.size(); ++t) {
    const double v = -y[t] * g(t);
    if (in_up(y[t], alpha(t), C)) gmax = std::max(gmax, v);
    if (in_low(y[t], alpha(t), C)) gmin = std::min(gmin, v);
  }
  if (gmax == -kInf || gmin == kInf) return 0.0;
  return gmax - gmin;
}

double compute_rho(std::span<const int> y, const Eigen::VectorXd& alpha, const Eigen::VectorXd& g, double C) {
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < alpha.size(); ++t) {
    const double yg = y[t] * g(t);
    if (alpha(t) >= C) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  if (n_free > 0) return sum_free / n_free;
  if (std::isinf(ub) && std::isinf(lb)) return 0.0;
  if (std::isinf(ub)) return lb;
  if (std::isinf(lb)) return ub;
  return 0.5 * (ub + lb);
}

}  // namespace

double dual_objective(const Eigen::MatrixXd& K, std::span<const int> y, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd ya(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) ya(i) = y[i] * alpha(i);
  return alpha.sum() - 0.5 * ya.dot(K * ya);
}

double kkt_gap(const Eigen::MatrixXd& K, std::span<const int> y, const Eigen::VectorXd& alpha, double C) {
  return violation(y, alpha, gradient(K, y, alpha), C);
}

DualSolution solve_dual(const Eigen::MatrixXd& K, std::span<const int> y, double C, double tol, long max_iterations) {
  validate(K, y, C);
  const Eigen::Index n = K.rows();
  if (max_iterations <= 0) max_iterations = std::max<long>(10L * n * n, 100000L);

  DualSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd& alpha = sol.alpha;
  Eigen::VectorXd g = Eigen::VectorXd::Constant(n, -1.0);

  while (sol.iterations < max_iterations) {
    Eigen::Index i = -1, j = -1;
    double gmax = -kInf, gmin = kInf;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * g(t);
      if (in_up(y[t], alpha(t), C) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(y[t], alpha(t), C) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < tol) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    const double qij = y[i] * y[j] * K(i, j);
    const double old_i = alpha(i), old_j = alpha(j);
    if (y[i] != y[j]) {
      double quad = K(i, i) + K(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g(i) - g(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = -diff; }
      }
      if (diff > 0.0) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = C - diff; }
      } else {
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = C + diff; }
      }
    } else {
      double quad = K(i, i) + K(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g(i) - g(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = sum - C; }
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = sum - C; }
      } else {
        if (alpha(j) < 0.0) { alpha(j) = 0.0; alpha(i) = sum; }
        if (alpha(i) < 0.0) { alpha(i) = 0.0; alpha(j) = sum; }
      }
    }

    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) {
      g(t) += y[t] * (y[i] * K(t, i) * di + y[j] * K(t, j) * dj);
    }
  }

  sol.kkt_gap = violation(y, alpha, g, C);
  sol.rho = compute_rho(y, alpha, g, C);
  sol.objective = dual_objective(K, y, alpha);
  return sol;
}

SvmModel train(const Eigen::MatrixXd& K, std::span<const int> y, double C, double tol) {
  validate(K, y, C);
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!has_pos || !has_neg) throw DegenerateProblemError("svm: training labels contain a single class");

  const DualSolution sol = solve_dual(K, y, C, tol);
  SvmModel model;
  model.C = C;
  model.bias = -sol.rho;
  model.kkt_gap = sol.kkt_gap;
  model.iterations = sol.iterations;
  model.converged = sol.converged;
  model.dual_coefficients.resize(sol.alpha.size());
  for (Eigen::Index i = 0; i < sol.alpha.size(); ++i) {
    model.dual_coefficients(i) = sol.alpha(i) * y[i];
    if (sol.alpha(i) > 0.0) model.support_indices.push_back(static_cast<int>(i));
  }
  return model;
}

SvmModel train(const GramMatrix& G, std::span<const int> y, double C, double tol) {
  return train(G.values, y, C, tol);
}

double decision_value(const SvmModel& model, std::span<const double> kernel_row) {
  if (kernel_row.size() != static_cast<std::size_t>(model.dual_coefficients.size())) {
    throw ArgumentError("svm: kernel row length " + std::to_string(kernel_row.size()) + " does not match " +
                        std::to_string(model.dual_coefficients.size()) + " training points");
  }
  double acc = model.bias;
  for (int i : model.support_indices) acc += model.dual_coefficients(i) * kernel_row[i];
  return acc;
}

int predict(const SvmModel& model, std::span<const double> kernel_row) {
  return decision_value(model, kernel_row) >= 0.0 ? 1 : -1;
}

std::vector<int> predict(const SvmModel& model, const Eigen::MatrixXd& kernel_rows) {
  if (kernel_rows.cols() != model.dual_coefficients.size()) {
    throw ArgumentError("svm: kernel rows do not match training set size");
  }
  const Eigen::VectorXd d = kernel_rows * model.dual_coefficients;
  std::vector<int> out(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) out[i] = d(i) + model.bias >= 0.0 ? 1 : -1;
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("accuracy: length mismatch");
  if (truth.empty()) throw ArgumentError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
  if (folds < 2) throw ArgumentError("cross validation needs at least 2 folds");
  if (y.size() < static_cast<std::size_t>(folds)) {
    throw ArgumentError("cross validation: " + std::to_string(y.size()) + " samples for " + std::to_string(folds) +
                        " folds");
  }
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? pos : neg).push_back(static_cast<int>(i));
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<int> assignment(y.size());
  std::size_t slot = 0;
  for (const auto* group : {&pos, &neg}) {
    for (int idx : *group) assignment[idx] = static_cast<int>(slot++ % folds);
  }
  return assignment;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& K, std::span<const int> rows, std::span<const int> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = K(rows[i], cols[j]);
  }
  return out;
}

double cross_validate(const Eigen::MatrixXd& K, std::span<const int> y, double C, int folds, std::uint64_t seed,
                      double tol) {
  validate(K, y, C);
  const std::vector<int> assignment = stratified_folds(y, folds, seed);
  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_idx, test_idx, y_train, y_test;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (assignment[i] == f) {
        test_idx.push_back(static_cast<int>(i));
        y_test.push_back(y[i]);
      } else {
        train_idx.push_back(static_cast<int>(i));
        y_train.push_back(y[i]);
      }
    }
    const SvmModel model = train(submatrix(K, train_idx, train_idx), y_train, C, tol);
    total += accuracy(predict(model, submatrix(K, test_idx, train_idx)), y_test);
  }
  return total / folds;
}

std::vector<int> to_signed(std::span<const int> labels01) {
  std::vector<int> out(labels01.size());
  for (std::size_t i = 0; i < labels01.size(); ++i) {
    if (labels01[i] != 0 && labels01[i] != 1) throw ArgumentError("labels must be 0 or 1");
    out[i] = labels01[i] == 1 ? 1 : -1;
  }
  return out;
}

std::vector<int> to_binary(std::span<const int> labels_pm) {
  std::vector<int> out(labels_pm.size());
  for (std::size_t i = 0; i < labels_pm.size(); ++i) out[i] = labels_pm[i] > 0 ? 1 : 0;
  return out;
}

}  // namespace qkstudy
