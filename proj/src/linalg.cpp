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

#include "qkstudy/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "qkstudy/errors.hpp"

namespace qkstudy {

namespace {

template <typename Matrix>
void check_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) throw ArgumentError("matrix must be square");
  if (m.size() == 0) throw ArgumentError("matrix is empty");
  const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (!(asym <= tol)) throw ArgumentError("matrix is not symmetric (asymmetry " + std::to_string(asym) + ")");
}

template <typename Matrix, typename F>
Matrix spectral_map(const Matrix& m, F&& f) {
  check_symmetric(m, kSymmetryTolerance);
  // Symmetrize before decomposing; the solver reads only one triangle.
  const Matrix sym = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  const Eigen::VectorXd mapped = f(eig.eigenvalues());
  return eig.eigenvectors() * mapped.asDiagonal() * eig.eigenvectors().adjoint();
}

template <typename Matrix>
Matrix sqrt_impl(const Matrix& m) {
  return spectral_map(m, [](const Eigen::VectorXd& lambda) {
    return lambda.unaryExpr([](double v) { return v > 0.0 ? std::sqrt(v) : 0.0; }).eval();
  });
}

template <typename Matrix>
Matrix pinv_impl(const Matrix& m, double floor) {
  return spectral_map(m, [floor](const Eigen::VectorXd& lambda) {
    const double cutoff = floor * lambda.maxCoeff();
    return lambda.unaryExpr([cutoff](double v) { return (v > 0.0 && v >= cutoff) ? 1.0 / v : 0.0; }).eval();
  });
}

template <typename Matrix>
double norm_impl(const Matrix& m) {
  check_symmetric(m, kSymmetryTolerance);
  const Matrix sym = (m + m.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) { return sqrt_impl(m); }
Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& m) { return sqrt_impl(m); }

Eigen::MatrixXd psd_pinv(const Eigen::MatrixXd& m, double floor) { return pinv_impl(m, floor); }
Eigen::MatrixXcd psd_pinv(const Eigen::MatrixXcd& m, double floor) { return pinv_impl(m, floor); }

double spectral_norm(const Eigen::MatrixXd& m) { return norm_impl(m); }
double spectral_norm(const Eigen::MatrixXcd& m) { return norm_impl(m); }

void require_symmetric(const Eigen::MatrixXd& m, double tol) { check_symmetric(m, tol); }
void require_symmetric(const Eigen::MatrixXcd& m, double tol) { check_symmetric(m, tol); }

}  // namespace qkstudy
