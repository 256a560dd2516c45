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

// Spectral functions of symmetric / Hermitian matrices.

#pragma once

#include <Eigen/Dense>

namespace qkstudy {

inline constexpr double kSymmetryTolerance = 1e-8;
inline constexpr double kDefaultPinvFloor = 1e-12;

/// Square root with negative eigenvalues clipped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);
Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& m);

/// Pseudo-inverse that inverts eigenvalues >= floor * lambda_max and zeroes
/// the rest.
Eigen::MatrixXd psd_pinv(const Eigen::MatrixXd& m, double floor = kDefaultPinvFloor);
Eigen::MatrixXcd psd_pinv(const Eigen::MatrixXcd& m, double floor = kDefaultPinvFloor);

/// Largest eigenvalue magnitude.
double spectral_norm(const Eigen::MatrixXd& m);
double spectral_norm(const Eigen::MatrixXcd& m);

/// Throws ArgumentError when max |m - m^H| exceeds `tol`.
void require_symmetric(const Eigen::MatrixXd& m, double tol = kSymmetryTolerance);
void require_symmetric(const Eigen::MatrixXcd& m, double tol = kSymmetryTolerance);

}  // namespace qkstudy
