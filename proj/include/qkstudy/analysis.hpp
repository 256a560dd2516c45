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

// Post-processing of sweep records: marginals, tree-ensemble importance,
// outlier trimming and the bandwidth scaling diagnostic.

#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qkstudy/data.hpp"
#include "qkstudy/sweep.hpp"

namespace qkstudy {

/// Hyperparameters usable as marginal axes and importance features.
/// "basis" is encoded as the QuantumBasis enumerator index.
const std::vector<std::string>& hyperparameter_names();
/// acc_test, acc_cv and the five gd_* columns.
const std::vector<std::string>& metric_names();
bool is_gd_metric(std::string_view metric);

/// Raw value of a hyperparameter or metric field. Throws ArgumentError on an
/// unknown name.
double record_field(const ResultRecord& r, std::string_view name);

struct MarginalCurve {
  std::string parameter;
  std::string metric;
  std::vector<double> values;  // ascending
  std::vector<double> mean;
  std::vector<double> std;     // population standard deviation
  std::vector<int> count;      // finite metric values per group
  std::vector<int> excluded;   // non-finite metric values per group
  int total_excluded = 0;
};

struct MarginalOptions {
  /// Divide each dataset's metric by its maximum before pooling.
  bool unit_scale_per_dataset = false;
};

/// Groups records by the value of `parameter` and averages `metric` over
/// everything else. Non-finite metric values are skipped and counted.
MarginalCurve marginal(std::span<const ResultRecord> records, std::string_view parameter, std::string_view metric,
                       const MarginalOptions& options = {});

struct BasisScore {
  QuantumBasis basis = QuantumBasis::inner;
  double mean = 0.0;
  double std = 0.0;
  int groups = 0;
};

/// Basis comparison where gamma is maximized within every group of records
/// sharing all other fields, then groups are averaged. Sorted by basis.
std::vector<BasisScore> marginal_gamma_optimized(std::span<const ResultRecord> records, std::string_view metric);

/// For every dataset and every GD column, the floor(fraction * n) largest
/// finite values are replaced by NaN; n counts the finite values. Everything
/// else is unchanged.
std::vector<ResultRecord> trim_gd_outliers(std::span<const ResultRecord> records, double fraction = 0.03);

/// values / max(values). NaN entries pass through. Throws NumericError when
/// the maximum finite value is not positive.
std::vector<double> scale_unit(std::span<const double> values);

struct BoostingParams {
  int trees = 100;
  int depth = 3;
  double learning_rate = 0.1;
};

struct ImportanceReport {
  std::string dataset_id;
  std::string metric;
  std::vector<std::string> parameters;  // hyperparameter_names()
  std::vector<double> importance;
  /// Metric took fewer than two distinct values; importances are uniform.
  bool degenerate = false;
  int n_records = 0;
};

/// Impurity-based importance of each hyperparameter from a gradient-boosted
/// regression tree ensemble fit to (hyperparameters -> metric). Records with
/// a non-finite metric are ignored. Deterministic and independent of record
/// order.
ImportanceReport gini_importance(std::span<const ResultRecord> records, std::string_view metric,
                                 const BoostingParams& params = {});

struct AggregateImportance {
  std::string metric;
  std::vector<std::string> parameters;
  std::vector<double> mean;
  std::vector<double> std;
  int n_datasets = 0;
  int degenerate_datasets = 0;
};

/// One fit per dataset id, then mean and standard deviation across datasets.
AggregateImportance aggregate_importance(std::span<const ResultRecord> records, std::string_view metric,
                                         const BoostingParams& params = {});

/// Standard deviation over all entries of t * X.
double scaled_feature_std(const Dataset& ds, double t);

struct ScalingRow {
  std::string dataset_id;
  QuantumBasis basis = QuantumBasis::inner;
  double best_t = 0.0;
  double best_metric = 0.0;
  double scaled_std = 0.0;  // NaN when the dataset is not supplied
};

/// For each dataset and basis: the t maximizing the marginal mean of
/// `metric`, and the feature spread that t produces on the dataset.
std::vector<ScalingRow> scaling_diagnostic(std::span<const ResultRecord> records, std::span<const Dataset> datasets,
                                           std::string_view metric = "acc_test");

// Table writers.
//   marginals_<param>_<metric>.csv : value,mean,std,count,excluded
//   importance_<metric>.csv        : parameter,mean,std,n_datasets,degenerate_datasets
//   scaling.csv                    : dataset_id,basis,best_t,best_metric,scaled_std
//   marginals_basis_gamma_optimized_<metric>.csv : basis,mean,std,groups
void write_marginal_csv(const MarginalCurve& curve, std::ostream& out);
void write_importance_csv(const AggregateImportance& report, std::ostream& out);
void write_scaling_csv(std::span<const ScalingRow> rows, std::ostream& out);
void write_basis_scores_csv(std::span<const BasisScore> scores, std::ostream& out);

}  // namespace qkstudy
