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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qkstudy {

/// Labelled binary dataset; rows of X are points, y holds 0/1.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<std::string> feature_names;
  std::string id;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index features() const { return X.cols(); }
};

/// CSV contents before preprocessing. Missing cells are NaN and the row is
/// flagged in `incomplete`; labels are kept as the original strings.
struct RawDataset {
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
  std::vector<std::string> feature_names;
  std::vector<bool> incomplete;
  std::string id;
};

RawDataset read_csv(std::istream& in, const std::string& label_column, const std::string& id = "");
RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column, const std::string& id = "");

struct PreprocessOptions {
  int target_features = 5;
  int target_points = 200;
  std::uint64_t seed = 0;
  /// Drop a feature whose |Pearson r| with an earlier kept feature exceeds this.
  std::optional<double> drop_correlated;
  /// Keep only these two label values, mapped to 0 and 1 in that order.
  std::optional<std::pair<std::string, std::string>> class_values;
  double variance_threshold = 1e-3;
};

/// Stages, in order: class filter, drop incomplete rows, drop duplicate rows,
/// balance classes by undersampling, drop low-variance features, z-score,
/// optional correlation filter, keep the top ANOVA-F features (in descending
/// F order), stratified subsample. Features are re-standardized on the final
/// sample. Throws PipelineError naming the stage that left nothing behind.
Dataset preprocess(const RawDataset& raw, const PreprocessOptions& options);

/// One-way ANOVA F statistic of `column` split by 0/1 `labels`. Returns
/// +infinity when the within-group variance is zero and the class means
/// differ, 0 when the column is constant.
double anova_f(const Eigen::VectorXd& column, const std::vector<int>& labels);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Stratified, seeded split; per class round(train_fraction * n_class) go to train.
SplitIndices split_indices(const std::vector<int>& y, double train_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<int>& rows);

/// Column j of the result is column permutation[j] of the input.
Dataset permute_features(const Dataset& ds, const std::vector<int>& permutation);

/// All n! orderings of {0..n-1}, lexicographic.
std::vector<std::vector<int>> all_permutations(int n);

/// Canonical file: header of feature names plus "label", one row per point.
void write_dataset_csv(const Dataset& ds, std::ostream& out);
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, const std::string& id = "");

/// Gaussian two-class data for demos and tests: `informative` features whose
/// class means differ by `separation`, `noise` pure-noise features, a
/// constant column and a duplicated row or two to exercise preprocessing.
RawDataset synthetic_classification(int n, int informative, int noise, double separation, std::uint64_t seed,
                                    const std::string& id = "synthetic");

}  // namespace qkstudy
