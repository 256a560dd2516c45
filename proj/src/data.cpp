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

#include "qkstudy/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "qkstudy/errors.hpp"

namespace qkstudy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool is_missing_token(const std::string& s) {
  static const std::set<std::string> tokens = {"", "NA", "N/A", "NaN", "nan", "NAN", "?", "null", "NULL", "None"};
  return tokens.count(s) > 0;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

// Column means and population standard deviations.
std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> moments(const Eigen::MatrixXd& X) {
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::RowVectorXd var = (X.rowwise() - mean).array().square().colwise().mean();
  return {mean, var.cwiseSqrt()};
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::MatrixXd take_cols(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v[i]);
  return out;
}

void standardize(Eigen::MatrixXd& X) {
  const auto [mean, sd] = moments(X);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    X.col(j).array() -= mean(j);
    if (sd(j) > 0.0) X.col(j) /= sd(j);
  }
}

void require_nonempty(const Dataset& ds, const char* stage) {
  if (ds.size() == 0) throw PipelineError(stage, "no data points left");
  if (ds.features() == 0) throw PipelineError(stage, "no features left");
}

void require_both_classes(const std::vector<int>& y, const char* stage) {
  const auto ones = std::count(y.begin(), y.end(), 1);
  if (ones == 0 || ones == static_cast<long>(y.size())) throw PipelineError(stage, "only one class present");
}

// Maps raw label strings to 0/1, dropping rows outside the class filter.
std::pair<std::vector<int>, std::vector<int>> binarize(const RawDataset& raw, const PreprocessOptions& opt) {
  std::vector<int> rows, labels;
  if (opt.class_values) {
    const auto& [zero, one] = *opt.class_values;
    for (std::size_t i = 0; i < raw.labels.size(); ++i) {
      if (raw.labels[i] == zero || raw.labels[i] == one) {
        rows.push_back(static_cast<int>(i));
        labels.push_back(raw.labels[i] == one ? 1 : 0);
      }
    }
    return {rows, labels};
  }
  std::vector<std::string> distinct(raw.labels.begin(), raw.labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() != 2) {
    throw PipelineError("classes", fmt::format("expected 2 label values, found {}; configure class_values",
                                               distinct.size()));
  }
  const auto a = parse_number(distinct[0]);
  const auto b = parse_number(distinct[1]);
  if (a && b && *b < *a) std::swap(distinct[0], distinct[1]);
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    rows.push_back(static_cast<int>(i));
    labels.push_back(raw.labels[i] == distinct[1] ? 1 : 0);
  }
  return {rows, labels};
}

std::vector<int> class_members(const std::vector<int>& y, int cls) {
  std::vector<int> out;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == cls) out.push_back(static_cast<int>(i));
  }
  return out;
}

// Uniform sample of `count` elements of `pool`, returned in original order.
std::vector<int> sample_sorted(std::vector<int> pool, std::size_t count, std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(count, pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

RawDataset read_csv(std::istream& in, const std::string& label_column, const std::string& id) {
  std::string line;
  if (!std::getline(in, line)) throw PipelineError("load", "missing header row");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  {
    std::set<std::string> seen;
    for (const auto& h : header) {
      if (!seen.insert(h).second) throw PipelineError("load", "duplicate column name '" + h + "'");
    }
  }
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw PipelineError("load", "label column '" + label_column + "' not found");
  const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

  RawDataset raw;
  raw.id = id;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_idx) raw.feature_names.push_back(header[j]);
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw PipelineError("load", fmt::format("line {}: expected {} fields, got {}", line_no, header.size(), cells.size()));
    }
    std::vector<double> values;
    values.reserve(header.size() - 1);
    bool incomplete = false;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string cell = trim(cells[j]);
      if (j == label_idx) {
        raw.labels.push_back(cell);
        if (is_missing_token(cell)) incomplete = true;
        continue;
      }
      if (is_missing_token(cell)) {
        values.push_back(kNaN);
        incomplete = true;
        continue;
      }
      const auto v = parse_number(cell);
      if (!v) {
        throw PipelineError("load", fmt::format("line {}: column '{}': cannot parse '{}' as a number", line_no,
                                                header[j], cell));
      }
      if (!std::isfinite(*v)) incomplete = true;
      values.push_back(*v);
    }
    rows.push_back(std::move(values));
    raw.incomplete.push_back(incomplete);
  }
  raw.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(raw.feature_names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) raw.X(i, j) = rows[i][j];
  }
  return raw;
}

RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column, const std::string& id) {
  std::ifstream in(path);
  if (!in) throw PipelineError("load", "cannot open " + path.string());
  return read_csv(in, label_column, id.empty() ? path.stem().string() : id);
}

double anova_f(const Eigen::VectorXd& column, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(column.size()) != labels.size()) throw ArgumentError("anova_f: length mismatch");
  double sum[2] = {0.0, 0.0};
  long count[2] = {0, 0};
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const int g = labels[i] == 1 ? 1 : 0;
    sum[g] += column(i);
    ++count[g];
  }
  if (count[0] < 2 || count[1] < 2) throw ArgumentError("anova_f: each class needs at least 2 samples");
  const double n = static_cast<double>(column.size());
  const double mean[2] = {sum[0] / count[0], sum[1] / count[1]};
  const double grand = (sum[0] + sum[1]) / n;
  double within = 0.0;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const double d = column(i) - mean[labels[i] == 1 ? 1 : 0];
    within += d * d;
  }
  const double between = count[0] * (mean[0] - grand) * (mean[0] - grand) + count[1] * (mean[1] - grand) * (mean[1] - grand);
  // k = 2 groups: between has 1 degree of freedom, within n - 2.
  const double ms_between = between / 1.0;
  const double ms_within = within / (n - 2.0);
  if (ms_within <= 0.0) return ms_between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return ms_between / ms_within;
}

Dataset preprocess(const RawDataset& raw, const PreprocessOptions& opt) {
  if (opt.target_features < 1) throw ArgumentError("target_features must be >= 1");
  if (opt.target_points < 2) throw ArgumentError("target_points must be >= 2");
  std::mt19937_64 rng(opt.seed);

  auto [rows, labels] = binarize(raw, opt);
  Dataset ds;
  ds.id = raw.id;
  ds.feature_names = raw.feature_names;
  ds.X = take_rows(raw.X, rows);
  ds.y = labels;
  std::vector<bool> incomplete = pick(raw.incomplete, rows);
  require_nonempty(ds, "classes");

  // 1: incomplete rows.
  {
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      if (!incomplete[i] && ds.X.row(i).allFinite()) keep.push_back(static_cast<int>(i));
    }
    ds = subset(ds, keep);
    require_nonempty(ds, "missing");
  }
  // 2: duplicates (identical features and label); first occurrence wins.
  {
    std::set<std::vector<double>> seen;
    std::vector<int> keep;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      std::vector<double> key;
      key.reserve(ds.features() + 1);
      for (Eigen::Index j = 0; j < ds.features(); ++j) key.push_back(ds.X(i, j));
      key.push_back(ds.y[i]);
      if (seen.insert(std::move(key)).second) keep.push_back(static_cast<int>(i));
    }
    ds = subset(ds, keep);
    require_nonempty(ds, "duplicates");
  }
  // 3: balance.
  {
    require_both_classes(ds.y, "balance");
    std::vector<int> zeros = class_members(ds.y, 0);
    std::vector<int> ones = class_members(ds.y, 1);
    const std::size_t minority = std::min(zeros.size(), ones.size());
    std::vector<int> keep;
    if (zeros.size() > minority) {
      keep = sample_sorted(zeros, minority, rng);
      keep.insert(keep.end(), ones.begin(), ones.end());
    } else {
      keep = sample_sorted(ones, minority, rng);
      keep.insert(keep.end(), zeros.begin(), zeros.end());
    }
    std::sort(keep.begin(), keep.end());
    ds = subset(ds, keep);
    require_nonempty(ds, "balance");
  }
  // 4: low variance.
  {
    const auto [mean, sd] = moments(ds.X);
    std::vector<int> keep;
    for (Eigen::Index j = 0; j < ds.features(); ++j) {
      if (sd(j) * sd(j) >= opt.variance_threshold) keep.push_back(static_cast<int>(j));
    }
    ds = permute_features(ds, keep);
    require_nonempty(ds, "variance");
  }
  // 5: z-score.
  standardize(ds.X);
  // 6: correlation filter.
  if (opt.drop_correlated) {
    std::vector<int> keep;
    for (Eigen::Index j = 0; j < ds.features(); ++j) {
      bool ok = true;
      for (int k : keep) {
        // Columns are standardized, so the mean product is Pearson's r.
        const double r = ds.X.col(j).dot(ds.X.col(k)) / static_cast<double>(ds.size());
        if (std::abs(r) > *opt.drop_correlated) {
          ok = false;
          break;
        }
      }
      if (ok) keep.push_back(static_cast<int>(j));
    }
    ds = permute_features(ds, keep);
    require_nonempty(ds, "correlation");
  }
  // 7: ANOVA ranking.
  {
    if (ds.size() < 4) throw PipelineError("anova", "fewer than 2 samples per class");
    std::vector<double> f(static_cast<std::size_t>(ds.features()));
    for (Eigen::Index j = 0; j < ds.features(); ++j) f[j] = anova_f(ds.X.col(j), ds.y);
    std::vector<int> order(f.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&f](int a, int b) { return f[a] > f[b]; });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(opt.target_features)));
    ds = permute_features(ds, order);
    require_nonempty(ds, "anova");
  }
  // 8: stratified subsample.
  if (ds.size() > opt.target_points) {
    const auto per_class = static_cast<std::size_t>(opt.target_points / 2);
    std::vector<int> keep = sample_sorted(class_members(ds.y, 0), per_class, rng);
    std::vector<int> ones = sample_sorted(class_members(ds.y, 1), per_class, rng);
    keep.insert(keep.end(), ones.begin(), ones.end());
    std::sort(keep.begin(), keep.end());
    ds = subset(ds, keep);
    require_nonempty(ds, "subsample");
    standardize(ds.X);
  }
  return ds;
}

Dataset subset(const Dataset& ds, const std::vector<int>& rows) {
  Dataset out;
  out.id = ds.id;
  out.feature_names = ds.feature_names;
  out.X = take_rows(ds.X, rows);
  out.y = pick(ds.y, rows);
  return out;
}

SplitIndices split_indices(const std::vector<int>& y, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (int cls : {0, 1}) {
    std::vector<int> members = class_members(y, cls);
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    out.train.insert(out.train.end(), members.begin(), members.begin() + n_train);
    out.test.insert(out.test.end(), members.begin() + n_train, members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  const SplitIndices idx = split_indices(ds.y, train_fraction, seed);
  return {subset(ds, idx.train), subset(ds, idx.test)};
}

Dataset permute_features(const Dataset& ds, const std::vector<int>& permutation) {
  std::vector<bool> used(static_cast<std::size_t>(ds.features()), false);
  for (int p : permutation) {
    if (p < 0 || p >= ds.features() || used[p]) throw ArgumentError("feature selection has invalid or repeated index");
    used[p] = true;
  }
  Dataset out;
  out.id = ds.id;
  out.y = ds.y;
  out.X = take_cols(ds.X, permutation);
  out.feature_names = pick(ds.feature_names, permutation);
  return out;
}

std::vector<std::vector<int>> all_permutations(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  for (const auto& name : ds.feature_names) out << name << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.features(); ++j) out << fmt::format("{:.17g},", ds.X(i, j));
    out << ds.y[i] << '\n';
  }
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("write", "cannot open " + path.string());
  write_dataset_csv(ds, out);
}

Dataset load_dataset(const std::filesystem::path& path, const std::string& id) {
  const RawDataset raw = load_csv(path, "label", id);
  Dataset ds;
  ds.id = raw.id;
  ds.feature_names = raw.feature_names;
  ds.X = raw.X;
  if (!ds.X.allFinite()) throw PipelineError("load", path.string() + " contains non-finite features");
  for (const auto& l : raw.labels) {
    if (l != "0" && l != "1") throw PipelineError("load", path.string() + ": labels must be 0 or 1, found '" + l + "'");
    ds.y.push_back(l == "1" ? 1 : 0);
  }
  return ds;
}

RawDataset synthetic_classification(int n, int informative, int noise, double separation, std::uint64_t seed,
                                    const std::string& id) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = informative + noise + 1;
  RawDataset raw;
  raw.id = id;
  for (int j = 0; j < informative; ++j) raw.feature_names.push_back("inf" + std::to_string(j));
  for (int j = 0; j < noise; ++j) raw.feature_names.push_back("noise" + std::to_string(j));
  raw.feature_names.push_back("const");
  const int extra = n >= 10 ? 2 : 0;
  raw.X.resize(n + extra, d);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    raw.labels.push_back(cls == 1 ? "pos" : "neg");
    for (int j = 0; j < informative; ++j) {
      // Alternate the sign so classes differ along several directions.
      const double shift = (j % 2 == 0 ? 1.0 : -1.0) * separation * (cls == 1 ? 0.5 : -0.5);
      raw.X(i, j) = shift + normal(rng) * (1.0 + 0.25 * j);
    }
    for (int j = 0; j < noise; ++j) raw.X(i, informative + j) = 3.0 * normal(rng);
    raw.X(i, d - 1) = 1.0;
  }
  for (int e = 0; e < extra; ++e) {
    raw.X.row(n + e) = raw.X.row(e);
    raw.labels.push_back(raw.labels[e]);
  }
  raw.incomplete.assign(raw.labels.size(), false);
  return raw;
}

}  // namespace qkstudy
