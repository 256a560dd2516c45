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

// Run configuration and the qkstudy command-line front end.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qkstudy/analysis.hpp"
#include "qkstudy/data.hpp"
#include "qkstudy/gd.hpp"
#include "qkstudy/sweep.hpp"

namespace qkstudy {

struct DatasetEntry {
  std::filesystem::path path;
  std::string id;  // defaults to the file stem
  std::string label_column = "label";
  std::optional<std::pair<std::string, std::string>> class_values;
  /// The file is already a canonical dataset (0/1 "label" column); skip preprocessing.
  bool preprocessed = false;
};

struct AnalysisConfig {
  std::string id = "all";
  std::vector<std::string> metrics;  // empty: every metric
  std::vector<std::string> trim_datasets;
  double trim_fraction = 0.03;
  BoostingParams boosting;
};

struct RunConfig {
  std::filesystem::path output_dir = "results";
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::vector<DatasetEntry> datasets;
  PreprocessOptions preprocess;
  GridSpec grid = default_grid_spec();
  SweepOptions sweep;
  bool classical = true;
  QuantumKernelSpec kernel;
  RelabelParams relabel;
  PipelineOverrides pipeline;
  AnalysisConfig analysis;
};

/// Parses YAML text. Relative dataset paths resolve against `base_dir`;
/// `check_paths` requires every dataset file to exist. Throws ConfigError
/// naming the offending field and line.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".", bool check_paths = true);
RunConfig load_config(const std::filesystem::path& path);

/// Effective configuration as YAML; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

/// Writes through a temporary sibling file renamed into place.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer);

/// Loads a configured dataset, preprocessing raw files with a seed derived
/// from the global seed and the dataset id.
Dataset load_entry(const DatasetEntry& entry, const RunConfig& config);

/// Square Gram matrix from a headerless comma-separated file.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out);

/// Entry point of the qkstudy executable. Returns the process exit code:
/// 0 on success, 1 on a failed stage, 2 on usage or configuration errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qkstudy
