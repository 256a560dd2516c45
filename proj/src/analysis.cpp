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

#include "qkstudy/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "qkstudy/errors.hpp"

namespace qkstudy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanStd {
  double mean = kNaN;
  double std = kNaN;
};

MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

void require_metric(std::string_view metric) {
  const auto& m = metric_names();
  if (std::find(m.begin(), m.end(), metric) == m.end()) {
    throw ArgumentError(fmt::format("unknown metric '{}'", metric));
  }
}

void require_parameter(std::string_view p) {
  const auto& h = hyperparameter_names();
  if (std::find(h.begin(), h.end(), p) == h.end()) {
    throw ArgumentError(fmt::format("unknown hyperparameter '{}'", p));
  }
}

// Per-dataset divisor for unit scaling.
std::map<std::string, double> dataset_maxima(std::span<const ResultRecord> records, std::string_view metric) {
  std::map<std::string, std::vector<double>> by_ds;
  for (const auto& r : records) by_ds[r.dataset_id].push_back(record_field(r, metric));
  std::map<std::string, double> out;
  for (auto& [id, vals] : by_ds) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : vals) {
      if (std::isfinite(v)) mx = std::max(mx, v);
    }
    if (!std::isfinite(mx)) continue;  // nothing finite: every value is excluded anyway
    if (mx <= 0.0) throw NumericError(fmt::format("unit scaling of '{}' on '{}': maximum is not positive", metric, id));
    out[id] = mx;
  }
  return out;
}

// ---- gradient-boosted regression trees on binned features ----

struct BinnedData {
  int n = 0;
  int n_features = 0;
  std::vector<std::vector<int>> codes;  // [feature][row]
  std::vector<int> n_bins;
  std::vector<double> y;
};

struct Booster {
  const BinnedData& data;
  BoostingParams params;
  std::vector<double> residual;
  std::vector<double> prediction;
  std::vector<double> gain;

  void grow(const std::vector<int>& rows, int depth, std::vector<double>& leaf_of_row) {
    double total = 0.0;
    for (int i : rows) total += residual[i];
    const double n = static_cast<double>(rows.size());
    int best_f = -1;
    int best_bin = -1;
    double best_gain = 0.0;
    if (depth < params.depth && rows.size() >= 2) {
      for (int f = 0; f < data.n_features; ++f) {
        const int nb = data.n_bins[f];
        if (nb < 2) continue;
        std::vector<double> sum(nb, 0.0);
        std::vector<int> cnt(nb, 0);
        for (int i : rows) {
          sum[data.codes[f][i]] += residual[i];
          ++cnt[data.codes[f][i]];
        }
        double sl = 0.0;
        int nl = 0;
        for (int b = 0; b + 1 < nb; ++b) {
          sl += sum[b];
          nl += cnt[b];
          if (cnt[b] == 0 || nl == 0 || nl == static_cast<int>(rows.size())) continue;
          const double sr = total - sl;
          const double nr = n - nl;
          const double g = sl * sl / nl + sr * sr / nr - total * total / n;
          if (g > best_gain * (1.0 + 1e-12) + 1e-15) {
            best_gain = g;
            best_f = f;
            best_bin = b;
          }
        }
      }
    }
    if (best_f < 0) {
      const double leaf = total / n;
      for (int i : rows) leaf_of_row[i] = leaf;
      return;
    }
    gain[best_f] += best_gain;
    std::vector<int> left, right;
    for (int i : rows) (data.codes[best_f][i] <= best_bin ? left : right).push_back(i);
    grow(left, depth + 1, leaf_of_row);
    grow(right, depth + 1, leaf_of_row);
  }

  void fit() {
    prediction.assign(data.n, 0.0);
    gain.assign(data.n_features, 0.0);
    std::vector<int> all(data.n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> leaf(data.n, 0.0);
    residual.resize(data.n);
    for (int tree = 0; tree < params.trees; ++tree) {
      for (int i = 0; i < data.n; ++i) residual[i] = data.y[i] - prediction[i];
      grow(all, 0, leaf);
      for (int i = 0; i < data.n; ++i) prediction[i] += params.learning_rate * leaf[i];
    }
  }
};

// Importance-model inputs: log scale for the log-spaced axes, the gamma
// placeholder one decade below the smallest real gamma.
std::vector<std::vector<double>> encode_features(std::span<const ResultRecord> rows) {
  double min_log_gamma = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.gamma > 0.0) min_log_gamma = std::min(min_log_gamma, std::log10(r.gamma));
  }
  const double placeholder = std::isfinite(min_log_gamma) ? min_log_gamma - 1.0 : 0.0;
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({static_cast<double>(r.basis), std::log2(r.t), std::log10(static_cast<double>(r.T)),
                   r.gamma > 0.0 ? std::log10(r.gamma) : placeholder, static_cast<double>(r.K), std::log10(r.C)});
  }
  return out;
}

}  // namespace

const std::vector<std::string>& hyperparameter_names() {
  static const std::vector<std::string> names = {"basis", "t", "T", "gamma", "K", "C"};
  return names;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"acc_test", "acc_cv", "gd_rbf", "gd_linear",
                                                 "gd_polynomial", "gd_laplacian", "gd_sigmoid"};
  return names;
}

bool is_gd_metric(std::string_view metric) { return metric.starts_with("gd_"); }

double record_field(const ResultRecord& r, std::string_view name) {
  if (name == "basis") return static_cast<double>(r.basis);
  if (name == "t") return r.t;
  if (name == "T") return r.T;
  if (name == "gamma") return r.gamma;
  if (name == "K") return r.K;
  if (name == "C") return r.C;
  if (name == "seed") return static_cast<double>(r.seed);
  if (name == "acc_test") return r.acc_test;
  if (name == "acc_cv") return r.acc_cv;
  for (std::size_t k = 0; k < kBaselineCount; ++k) {
    if (name == "gd_" + std::string(to_string(kClassicalKinds[k]))) return r.gd[k];
  }
  throw ArgumentError(fmt::format("unknown record field '{}'", name));
}

MarginalCurve marginal(std::span<const ResultRecord> records, std::string_view parameter, std::string_view metric,
                       const MarginalOptions& options) {
  require_parameter(parameter);
  require_metric(metric);
  if (records.empty()) throw ArgumentError("marginal: no records");
  std::map<std::string, double> divisor;
  if (options.unit_scale_per_dataset) divisor = dataset_maxima(records, metric);

  std::map<double, std::vector<double>> groups;
  std::map<double, int> excluded;
  for (const auto& r : records) {
    const double key = record_field(r, parameter);
    double v = record_field(r, metric);
    auto& g = groups[key];
    if (!std::isfinite(v)) {
      ++excluded[key];
      continue;
    }
    if (options.unit_scale_per_dataset) v /= divisor.at(r.dataset_id);
    g.push_back(v);
  }
  MarginalCurve c;
  c.parameter = parameter;
  c.metric = metric;
  for (const auto& [key, vals] : groups) {
    const int ex = excluded.count(key) ? excluded.at(key) : 0;
    c.total_excluded += ex;
    if (vals.empty()) continue;
    const MeanStd ms = mean_std(vals);
    c.values.push_back(key);
    c.mean.push_back(ms.mean);
    c.std.push_back(ms.std);
    c.count.push_back(static_cast<int>(vals.size()));
    c.excluded.push_back(ex);
  }
  return c;
}

std::vector<BasisScore> marginal_gamma_optimized(std::span<const ResultRecord> records, std::string_view metric) {
  require_metric(metric);
  if (records.empty()) throw ArgumentError("marginal_gamma_optimized: no records");
  using Key = std::tuple<std::string, int, double, int, int, double, std::uint64_t, int>;
  std::map<Key, double> best;
  for (const auto& r : records) {
    const double v = record_field(r, metric);
    if (!std::isfinite(v)) continue;
    const Key k{r.dataset_id, static_cast<int>(r.basis), r.t, r.T, r.K, r.C, r.seed, static_cast<int>(r.alpha_mode)};
    auto [it, inserted] = best.try_emplace(k, v);
    if (!inserted) it->second = std::max(it->second, v);
  }
  std::map<int, std::vector<double>> per_basis;
  for (const auto& [k, v] : best) per_basis[std::get<1>(k)].push_back(v);
  std::vector<BasisScore> out;
  for (const auto& [b, vals] : per_basis) {
    const MeanStd ms = mean_std(vals);
    out.push_back({static_cast<QuantumBasis>(b), ms.mean, ms.std, static_cast<int>(vals.size())});
  }
  return out;
}

std::vector<ResultRecord> trim_gd_outliers(std::span<const ResultRecord> records, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("trim fraction must lie in [0, 1]");
  std::vector<ResultRecord> out(records.begin(), records.end());
  std::map<std::string, std::vector<std::size_t>> by_ds;
  for (std::size_t i = 0; i < out.size(); ++i) by_ds[out[i].dataset_id].push_back(i);
  for (const auto& [id, rows] : by_ds) {
    for (std::size_t k = 0; k < kBaselineCount; ++k) {
      std::vector<std::size_t> finite;
      for (std::size_t i : rows) {
        if (std::isfinite(out[i].gd[k])) finite.push_back(i);
      }
      const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(finite.size()) + 1e-9));
      std::stable_sort(finite.begin(), finite.end(),
                       [&](std::size_t a, std::size_t b) { return out[a].gd[k] > out[b].gd[k]; });
      for (std::size_t j = 0; j < drop; ++j) out[finite[j]].gd[k] = kNaN;
    }
  }
  return out;
}

std::vector<double> scale_unit(std::span<const double> values) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (std::isfinite(v)) mx = std::max(mx, v);
  }
  if (!(mx > 0.0) || !std::isfinite(mx)) throw NumericError("scale_unit: maximum is not positive");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(v / mx);
  return out;
}

ImportanceReport gini_importance(std::span<const ResultRecord> records, std::string_view metric,
                                 const BoostingParams& params) {
  require_metric(metric);
  if (params.trees < 1 || params.depth < 1 || !(params.learning_rate > 0.0)) {
    throw ArgumentError("boosting parameters must be positive");
  }
  ImportanceReport report;
  report.metric = metric;
  report.parameters = hyperparameter_names();
  const std::size_t nf = report.parameters.size();

  std::vector<ResultRecord> rows;
  for (const auto& r : records) {
    if (std::isfinite(record_field(r, metric))) rows.push_back(r);
  }
  if (!records.empty()) report.dataset_id = records.front().dataset_id;
  report.n_records = static_cast<int>(rows.size());

  // Canonical row order makes every floating-point sum order-independent.
  const auto features = encode_features(rows);
  std::vector<std::pair<std::vector<double>, double>> table;
  for (std::size_t i = 0; i < rows.size(); ++i) table.emplace_back(features[i], record_field(rows[i], metric));
  std::sort(table.begin(), table.end());

  std::set<double> distinct;
  for (const auto& [x, y] : table) distinct.insert(y);
  if (distinct.size() < 2) {
    report.degenerate = true;
    report.importance.assign(nf, 1.0 / static_cast<double>(nf));
    return report;
  }

  BinnedData data;
  data.n = static_cast<int>(table.size());
  data.n_features = static_cast<int>(nf);
  std::vector<double> ys;
  for (const auto& [x, y] : table) ys.push_back(y);
  const MeanStd ms = mean_std(ys);
  for (double y : ys) data.y.push_back((y - ms.mean) / ms.std);
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<double> levels;
    for (const auto& [x, y] : table) levels.push_back(x[f]);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<int> codes;
    for (const auto& [x, y] : table) {
      codes.push_back(static_cast<int>(std::lower_bound(levels.begin(), levels.end(), x[f]) - levels.begin()));
    }
    data.codes.push_back(std::move(codes));
    data.n_bins.push_back(static_cast<int>(levels.size()));
  }

  Booster booster{data, params, {}, {}, {}};
  booster.fit();
  const double total = std::accumulate(booster.gain.begin(), booster.gain.end(), 0.0);
  if (!(total > 0.0)) {
    report.degenerate = true;
    report.importance.assign(nf, 1.0 / static_cast<double>(nf));
    return report;
  }
  for (double g : booster.gain) report.importance.push_back(g / total);
  return report;
}

AggregateImportance aggregate_importance(std::span<const ResultRecord> records, std::string_view metric,
                                         const BoostingParams& params) {
  require_metric(metric);
  if (records.empty()) throw ArgumentError("aggregate_importance: no records");
  std::map<std::string, std::vector<ResultRecord>> by_ds;
  for (const auto& r : records) by_ds[r.dataset_id].push_back(r);

  AggregateImportance agg;
  agg.metric = metric;
  agg.parameters = hyperparameter_names();
  std::vector<std::vector<double>> per_param(agg.parameters.size());
  for (const auto& [id, rows] : by_ds) {
    const ImportanceReport rep = gini_importance(rows, metric, params);
    ++agg.n_datasets;
    if (rep.degenerate) ++agg.degenerate_datasets;
    for (std::size_t f = 0; f < rep.importance.size(); ++f) per_param[f].push_back(rep.importance[f]);
  }
  for (const auto& v : per_param) {
    const MeanStd ms = mean_std(v);
    agg.mean.push_back(ms.mean);
    agg.std.push_back(ms.std);
  }
  return agg;
}

double scaled_feature_std(const Dataset& ds, double t) {
  if (ds.X.size() == 0) throw ArgumentError("scaled_feature_std: empty dataset");
  const Eigen::ArrayXXd s = t * ds.X.array();
  return std::sqrt((s - s.mean()).square().mean());
}

std::vector<ScalingRow> scaling_diagnostic(std::span<const ResultRecord> records, std::span<const Dataset> datasets,
                                           std::string_view metric) {
  require_metric(metric);
  std::map<std::pair<std::string, int>, std::vector<ResultRecord>> groups;
  for (const auto& r : records) groups[{r.dataset_id, static_cast<int>(r.basis)}].push_back(r);
  std::vector<ScalingRow> out;
  for (const auto& [key, rows] : groups) {
    const MarginalCurve c = marginal(rows, "t", metric);
    if (c.values.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.mean.size(); ++i) {
      if (c.mean[i] > c.mean[best]) best = i;
    }
    ScalingRow row;
    row.dataset_id = key.first;
    row.basis = static_cast<QuantumBasis>(key.second);
    row.best_t = c.values[best];
    row.best_metric = c.mean[best];
    row.scaled_std = kNaN;
    for (const auto& ds : datasets) {
      if (ds.id == key.first) row.scaled_std = scaled_feature_std(ds, row.best_t);
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_marginal_csv(const MarginalCurve& curve, std::ostream& out) {
  out << "value,mean,std,count,excluded\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    if (curve.parameter == "basis") {
      out << to_string(static_cast<QuantumBasis>(static_cast<int>(curve.values[i])));
    } else {
      out << num(curve.values[i]);
    }
    out << ',' << num(curve.mean[i]) << ',' << num(curve.std[i]) << ',' << curve.count[i] << ',' << curve.excluded[i]
        << '\n';
  }
}

void write_importance_csv(const AggregateImportance& report, std::ostream& out) {
  out << "parameter,mean,std,n_datasets,degenerate_datasets\n";
  for (std::size_t i = 0; i < report.parameters.size(); ++i) {
    out << report.parameters[i] << ',' << num(report.mean[i]) << ',' << num(report.std[i]) << ','
        << report.n_datasets << ',' << report.degenerate_datasets << '\n';
  }
}

void write_scaling_csv(std::span<const ScalingRow> rows, std::ostream& out) {
  out << "dataset_id,basis,best_t,best_metric,scaled_std\n";
  for (const auto& r : rows) {
    out << r.dataset_id << ',' << to_string(r.basis) << ',' << num(r.best_t) << ',' << num(r.best_metric) << ','
        << num(r.scaled_std) << '\n';
  }
}

void write_basis_scores_csv(std::span<const BasisScore> scores, std::ostream& out) {
  out << "basis,mean,std,groups\n";
  for (const auto& s : scores) {
    out << to_string(s.basis) << ',' << num(s.mean) << ',' << num(s.std) << ',' << s.groups << '\n';
  }
}

}  // namespace qkstudy
