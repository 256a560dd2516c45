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

// Geometric difference between a classical and a quantum Gram matrix, and
// the quantum-favorable relabeling built from the same spectral quantities.
//
// Both matrices must already carry trace n (see rescale_trace). The measure is
//   g = sqrt( || sqrt(K_Q) K_C^+ sqrt(K_Q) ||_inf )
// where K_C^+ is the eigenvalue-floored pseudo-inverse.

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qkstudy/kernels.hpp"
#include "qkstudy/linalg.hpp"

namespace qkstudy {

inline constexpr double kTraceTolerance = 1e-6;

struct GdResult {
  double g = 0.0;
  /// lambda_max / lambda_min of K_C; +inf when lambda_min <= 0.
  double condition_diagnostic = 0.0;
};

/// Pseudo-inverse and conditioning of a classical Gram matrix, reusable
/// against many quantum kernels.
struct ClassicalInverse {
  Eigen::MatrixXd pinv;
  double condition = 0.0;
  Eigen::Index n = 0;
};

ClassicalInverse prepare_classical(const GramMatrix& kc, double floor = kDefaultPinvFloor);

GdResult geometric_difference(const GramMatrix& kc, const GramMatrix& kq);
GdResult geometric_difference(const ClassicalInverse& kc, const GramMatrix& kq);

struct RelabelParams {
  double lambda = 1.1;
  double flip_fraction = 0.05;
  std::uint64_t seed = 0;
};

/// Binary labels (0/1) from the dominant eigenvector of
/// sqrt(K_Q) (K_C + lambda I)^-1 sqrt(K_Q). The eigenvector sign is fixed so
/// that sum(sqrt(K_Q) v) > 0; entries strictly above the median become 1.
/// Afterwards floor(flip_fraction * n) distinct positions are set to 0.
std::vector<int> relabel(const GramMatrix& kc, const GramMatrix& kq, const RelabelParams& params);

}  // namespace qkstudy
