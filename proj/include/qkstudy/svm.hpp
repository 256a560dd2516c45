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

// Soft-margin C-SVM on precomputed Gram matrices.
//
// The dual
//   max_a  sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij
//   s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0
// is solved by sequential minimal optimization, updating the maximal
// violating pair (first-order working-set selection) until the KKT gap
// drops below `tol`. Labels are +1/-1 here; use to_signed/to_binary at the
// data boundary.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qkstudy/kernels.hpp"

namespace qkstudy {

struct DualSolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;          // decision(x) = sum_i a_i y_i k(x_i, x) - rho
  double objective = 0.0;    // dual objective (maximization form)
  double kkt_gap = 0.0;      // max violation m(a) - M(a) at exit
  long iterations = 0;
  bool converged = false;
};

struct SvmModel {
  Eigen::VectorXd dual_coefficients;  // a_i * y_i, one per training point
  double bias = 0.0;
  std::vector<int> support_indices;
  double C = 1.0;
  double kkt_gap = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Raw solver. Accepts single-class labelings (the optimum is then a = 0).
/// `max_iterations` = 0 selects max(10 n^2, 100000).
DualSolution solve_dual(const Eigen::MatrixXd& K, std::span<const int> y, double C, double tol = 1e-3,
                        long max_iterations = 0);

double dual_objective(const Eigen::MatrixXd& K, std::span<const int> y, const Eigen::VectorXd& alpha);

/// Largest KKT violation of `alpha`; <= 0 means optimal.
double kkt_gap(const Eigen::MatrixXd& K, std::span<const int> y, const Eigen::VectorXd& alpha, double C);

/// Throws DegenerateProblemError when y has one class, ArgumentError on bad
/// labels, C <= 0, or a non-square / mismatched Gram matrix.
SvmModel train(const Eigen::MatrixXd& K, std::span<const int> y, double C, double tol = 1e-3);
SvmModel train(const GramMatrix& G, std::span<const int> y, double C, double tol = 1e-3);

double decision_value(const SvmModel& model, std::span<const double> kernel_row);

/// sign(decision); an exact zero maps to +1.
int predict(const SvmModel& model, std::span<const double> kernel_row);

/// One prediction per row of `kernel_rows` (rows: queries, columns: training points).
std::vector<int> predict(const SvmModel& model, const Eigen::MatrixXd& kernel_rows);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Fold index per sample. Class members are shuffled and dealt round-robin,
/// so fold sizes and per-fold class counts each differ by at most one.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

/// Mean held-out accuracy over stratified folds; sub-blocks of K are indexed,
/// never recomputed. Throws ArgumentError when n < folds.
double cross_validate(const Eigen::MatrixXd& K, std::span<const int> y, double C, int folds, std::uint64_t seed,
                      double tol = 1e-3);

std::vector<int> to_signed(std::span<const int> labels01);
std::vector<int> to_binary(std::span<const int> labels_pm);

/// K[rows, cols].
Eigen::MatrixXd submatrix(const Eigen::MatrixXd& K, std::span<const int> rows, std::span<const int> cols);

}  // namespace qkstudy
