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

// Hyperparameter grid, sweep execution and result persistence.

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qkstudy/data.hpp"
#include "qkstudy/gd.hpp"
#include "qkstudy/kernels.hpp"

namespace qkstudy {

/// Placeholder gamma carried by records of bases without a bandwidth.
inline constexpr double kGammaPlaceholder = 0.0;

struct GridSpec {
  std::vector<double> t_values;
  std::vector<int> T_values;
  std::vector<double> gamma_values;
  std::vector<int> K_values;  // empty: 1..n_features+1
  std::vector<double> C_values;
  std::vector<QuantumBasis> bases;
  std::vector<std::uint64_t> seeds;
  AlphaMode alpha_mode = AlphaMode::mean;
};

/// The study grid: t = 2^-6..2^6 (13), T = 1,3,9,27,81, gamma = 10^-3..10^3
/// (13), C = 10^-1..10^5 (13), K = 1..D+1, bases inner and distance, seed 0.
GridSpec default_grid_spec();

/// `count` log-spaced values from 10^lo to 10^hi inclusive.
std::vector<double> logspace10(double lo, double hi, int count);

struct GridPoint {
  QuantumBasis basis = QuantumBasis::distance;
  double t = 1.0;
  int T = 1;
  double gamma = kGammaPlaceholder;
  int K = 1;
  double C = 1.0;
  std::uint64_t seed = 0;
};

/// Cartesian product, nested as seed, t, T, K, basis, gamma, C (C fastest).
/// Bases other than distance get a single placeholder gamma.
std::vector<GridPoint> build_grid(const GridSpec& spec, int n_features);

inline constexpr std::size_t kBaselineCount = 5;

struct ResultRecord {
  std::string dataset_id;
  QuantumBasis basis = QuantumBasis::distance;
  double t = 0.0;
  int T = 0;
  double gamma = kGammaPlaceholder;
  int K = 0;
  double C = 0.0;
  std::uint64_t seed = 0;
  AlphaMode alpha_mode = AlphaMode::mean;
  double acc_test = 0.0;
  double acc_cv = 0.0;
  /// Geometric difference to each baseline, ordered as kClassicalKinds
  /// (rbf, linear, polynomial, laplacian, sigmoid). NaN when not computable.
  std::array<double, kBaselineCount> gd{};
  std::string error;  // empty on success
};

struct ClassicalRecord {
  std::string dataset_id;
  ClassicalKind kernel = ClassicalKind::rbf;
  double gamma = kGammaPlaceholder;
  double C = 0.0;
  double acc_test = 0.0;
  double acc_cv = 0.0;
  std::string error;
};

struct SweepOptions {
  std::uint64_t global_seed = 0;
  double train_fraction = 2.0 / 3.0;
  int cv_folds = 5;
  double svm_tol = 1e-3;
  int workers = 1;
  /// Skip cross validation (acc_cv = NaN); used by callers that only need
  /// test accuracy or GD.
  bool cross_validation = true;
};

/// Baseline kernels for the GD columns, with sklearn's "scale" bandwidth
/// gamma = 1 / (D * Var(X)); polynomial degree 3 and coef0 = 1
/// (the pairwise-kernel default).
std::array<ClassicalKernel, kBaselineCount> gd_baselines(const Eigen::MatrixXd& X);

/// Split of `ds` used by every sweep over it; depends only on (global seed,
/// dataset id, labels).
SplitIndices sweep_split(const Dataset& ds, const SweepOptions& options);

/// Evaluates arbitrary grid points. Embeddings, RDMs, Gram matrices and GD
/// values are shared between points that agree on their defining
/// parameters; GD is computed on the full dataset (label- and split-free).
/// Per-point failures land in ResultRecord::error. Output order = input order.
std::vector<ResultRecord> run_points(const Dataset& ds, const std::vector<GridPoint>& points, AlphaMode alpha_mode,
                                     const SweepOptions& options);

std::vector<ResultRecord> run_sweep(const Dataset& ds, const GridSpec& spec, const SweepOptions& options);

/// gamma grid for classical baselines: the quantum grid plus 1/D and 1/(D Var(X)).
std::vector<double> classical_gamma_grid(const GridSpec& spec, const Eigen::MatrixXd& X);

/// Classical SVM baselines over every kernel kind, gamma and C.
std::vector<ClassicalRecord> run_classical(const Dataset& ds, const GridSpec& spec, const SweepOptions& options);

struct PipelineOverrides {
  std::uint64_t seed = 0;
  int T = 9;
  double t_min = 0.1;
  double t_max = 1.0;
  int t_count = 5;
  double target_std_inner = 0.49;
  double target_std_distance = 0.22;
  std::vector<QuantumBasis> bases = {QuantumBasis::inner, QuantumBasis::distance};
  std::vector<double> gamma_values;  // empty: default grid
  std::vector<double> C_values;      // empty: default grid
};

/// Starting t for a basis: the value scaling the data to the target standard
/// deviation, clamped into [t_min, t_max].
double pipeline_start_t(const Dataset& ds, QuantumBasis basis, const PipelineOverrides& o);

/// Reduced grid: K = number of qubits, fixed T and seed, the start t plus
/// t_count log-spaced values in [t_min, t_max]; joint gamma x C grid for the
/// distance basis.
std::vector<GridPoint> pipeline_grid(const Dataset& ds, const PipelineOverrides& o);

std::vector<ResultRecord> run_pipeline(const Dataset& ds, const PipelineOverrides& o, const SweepOptions& options);

/// A single quantum kernel configuration applied to a whole dataset.
struct QuantumKernelSpec {
  QuantumBasis basis = QuantumBasis::distance;
  double t = 1.0;
  int T = 9;
  int K = 0;  // 0: all qubits
  double gamma = 1.0;
  AlphaMode alpha_mode = AlphaMode::mean;
  std::uint64_t seed = 1;  // Haar initial state
};

/// Quantum Gram matrix of all rows of X, rescaled to trace n.
GramMatrix dataset_quantum_gram(const Eigen::MatrixXd& X, const QuantumKernelSpec& spec);

/// Same rows and features with quantum-favorable labels: K_Q from `kernel`,
/// K_C the rbf baseline of gd_baselines, both with trace n.
Dataset relabel_dataset(const Dataset& ds, const QuantumKernelSpec& kernel, const RelabelParams& params);

// Persistence. CSV columns are fixed:
//   dataset_id,basis,t,T,gamma,K,C,seed,alpha_mode,acc_test,acc_cv,
//   gd_rbf,gd_linear,gd_polynomial,gd_laplacian,gd_sigmoid,error
const std::vector<std::string>& record_columns();
void write_records_csv(const std::vector<ResultRecord>& records, std::ostream& out);
void write_records_jsonl(const std::vector<ResultRecord>& records, std::ostream& out);
std::vector<ResultRecord> read_records_csv(std::istream& in);

void write_classical_csv(const std::vector<ClassicalRecord>& records, std::ostream& out);

}  // namespace qkstudy
