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

#include "qkstudy/gd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "qkstudy/errors.hpp"

namespace qkstudy {

namespace {

void require_trace_normalized(const GramMatrix& g, const char* which) {
  require_symmetric(g.values);
  const double n = static_cast<double>(g.n());
  const double tr = g.values.trace();
  if (!(std::abs(tr - n) <= kTraceTolerance * std::max(1.0, n))) {
    throw ArgumentError(std::string(which) + " must have trace n (got " + std::to_string(tr) + ", n = " +
                        std::to_string(g.n()) + "); rescale first");
  }
}

void require_pair(const GramMatrix& kc, const GramMatrix& kq) {
  if (kc.n() != kq.n() || kc.values.cols() != kq.values.cols()) {
    throw ArgumentError("Gram matrices differ in dimension");
  }
  require_trace_normalized(kc, "K_C");
  require_trace_normalized(kq, "K_Q");
}

double condition_of(const Eigen::VectorXd& lambda) {
  const double lo = lambda.minCoeff();
  const double hi = lambda.maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

ClassicalInverse prepare_classical(const GramMatrix& kc, double floor) {
  require_trace_normalized(kc, "K_C");
  const Eigen::MatrixXd sym = (kc.values + kc.values.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of K_C failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = floor * lambda.maxCoeff();
  const Eigen::VectorXd inv = lambda.unaryExpr([cutoff](double v) { return (v > 0.0 && v >= cutoff) ? 1.0 / v : 0.0; });
  ClassicalInverse out;
  out.pinv = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  out.condition = condition_of(lambda);
  out.n = kc.n();
  return out;
}

GdResult geometric_difference(const ClassicalInverse& kc, const GramMatrix& kq) {
  if (kc.n != kq.n()) throw ArgumentError("Gram matrices differ in dimension");
  require_trace_normalized(kq, "K_Q");
  const Eigen::MatrixXd root = psd_sqrt(kq.values);
  Eigen::MatrixXd m = root * kc.pinv * root;
  m = (m + m.transpose()).eval() / 2.0;
  return {std::sqrt(spectral_norm(m)), kc.condition};
}

GdResult geometric_difference(const GramMatrix& kc, const GramMatrix& kq) {
  require_pair(kc, kq);
  return geometric_difference(prepare_classical(kc), kq);
}

std::vector<int> relabel(const GramMatrix& kc, const GramMatrix& kq, const RelabelParams& params) {
  require_pair(kc, kq);
  if (!(params.lambda > 0.0)) throw ArgumentError("relabel: lambda must be > 0");
  if (!(params.flip_fraction >= 0.0 && params.flip_fraction < 1.0)) {
    throw ArgumentError("relabel: flip_fraction must lie in [0, 1)");
  }
  const Eigen::Index n = kc.n();
  const Eigen::MatrixXd root = psd_sqrt(kq.values);
  const Eigen::MatrixXd regularized = kc.values + params.lambda * Eigen::MatrixXd::Identity(n, n);
  // K_C + lambda I is SPD for PSD K_C; LDLT tolerates mild indefiniteness.
  const Eigen::MatrixXd solved = regularized.ldlt().solve(root);
  Eigen::MatrixXd m = root * solved;
  m = (m + m.transpose()).eval() / 2.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericError("relabel: eigendecomposition failed");
  Eigen::Index top = 0;
  eig.eigenvalues().cwiseAbs().maxCoeff(&top);
  Eigen::VectorXd y = root * eig.eigenvectors().col(top);
  if (y.sum() < 0.0) y = -y;

  std::vector<double> sorted(y.data(), y.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) labels[i] = y(i) > median ? 1 : 0;

  const auto flips = static_cast<std::size_t>(std::floor(params.flip_fraction * static_cast<double>(n) + 1e-9));
  if (flips > 0) {
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(params.seed);
    // Partial Fisher-Yates: the first `flips` entries are a uniform sample.
    for (std::size_t i = 0; i < flips; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
      labels[idx[i]] = 0;
    }
  }
  return labels;
}

}  // namespace qkstudy
