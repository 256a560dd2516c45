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

// Shared fixtures for the test suites.

#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qkstudy/data.hpp"
#include "qkstudy/simulator.hpp"

namespace qkstudy::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  }
  return m;
}

// A^T A scaled to trace n; full rank when rank >= n.
inline Eigen::MatrixXd random_psd(Eigen::Index n, std::uint64_t seed, Eigen::Index rank = -1) {
  const Eigen::MatrixXd a = random_matrix(rank < 0 ? n : rank, n, seed);
  Eigen::MatrixXd m = a.transpose() * a;
  m = 0.5 * (m + m.transpose()).eval();
  return m * (static_cast<double>(n) / m.trace());
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(n, n, seed));
  return qr.householderQ();
}

inline Statevector random_state(int n_qubits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Statevector s;
  s.n_qubits = n_qubits;
  s.amplitudes.resize(Eigen::Index{1} << n_qubits);
  for (Eigen::Index i = 0; i < s.amplitudes.size(); ++i) s.amplitudes(i) = {n(rng), n(rng)};
  s.amplitudes.normalize();
  return s;
}

// Labelled Gaussian blobs, already standardized.
inline Dataset blobs(int n, int d, double separation, std::uint64_t seed, const std::string& id = "blobs") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Dataset ds;
  ds.id = id;
  ds.X.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    ds.y.push_back(label);
    for (int j = 0; j < d; ++j) ds.X(i, j) = g(rng) + (j == 0 ? separation * (label ? 0.5 : -0.5) : 0.0);
  }
  for (int j = 0; j < d; ++j) {
    const double mean = ds.X.col(j).mean();
    ds.X.col(j).array() -= mean;
    const double sd = std::sqrt(ds.X.col(j).squaredNorm() / n);
    ds.X.col(j) /= sd;
    ds.feature_names.push_back("f" + std::to_string(j));
  }
  return ds;
}

}  // namespace qkstudy::testing
