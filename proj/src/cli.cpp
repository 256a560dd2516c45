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

#include "qkstudy/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "qkstudy/errors.hpp"
#include "qkstudy/seeding.hpp"

namespace qkstudy {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- config

int line_of(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  return m.is_null() ? 0 : m.line + 1;
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& field, const char* expected) {
  if (!n.IsScalar()) throw ConfigError(field, line_of(n), std::string("expected ") + expected);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, line_of(n), std::string("expected ") + expected + ", got '" + n.Scalar() + "'");
  }
}

double real(const YAML::Node& n, const std::string& field) { return scalar<double>(n, field, "a number"); }
int integer(const YAML::Node& n, const std::string& field) { return scalar<int>(n, field, "an integer"); }
std::uint64_t unsigned64(const YAML::Node& n, const std::string& field) {
  if (n.IsScalar() && !n.Scalar().empty() && n.Scalar().front() == '-') {
    throw ConfigError(field, line_of(n), "expected a non-negative integer");
  }
  return scalar<std::uint64_t>(n, field, "a non-negative integer");
}
bool boolean(const YAML::Node& n, const std::string& field) { return scalar<bool>(n, field, "true or false"); }
std::string text(const YAML::Node& n, const std::string& field) { return scalar<std::string>(n, field, "a string"); }

template <typename T, typename Fn>
std::vector<T> list(const YAML::Node& n, const std::string& field, Fn&& item) {
  std::vector<T> out;
  if (n.IsScalar()) {
    out.push_back(item(n, field));
    return out;
  }
  if (!n.IsSequence()) throw ConfigError(field, line_of(n), "expected a list");
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(item(n[i], fmt::format("{}[{}]", field, i)));
  return out;
}

template <typename E, typename Parse>
E enumerated(const YAML::Node& n, const std::string& field, Parse&& parse) {
  const std::string s = text(n, field);
  try {
    return parse(s);
  } catch (const std::exception& e) {
    throw ConfigError(field, line_of(n), e.what());
  }
}

void check_keys(const YAML::Node& n, const std::string& section, const std::set<std::string>& allowed) {
  if (!n.IsMap()) throw ConfigError(section, line_of(n), "expected a mapping");
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError(section + "." + key, line_of(kv.first), "unknown key");
  }
}

void require(bool ok, const YAML::Node& n, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, line_of(n), what);
}

std::vector<double> positive_reals(const YAML::Node& n, const std::string& field) {
  auto v = list<double>(n, field, real);
  for (double x : v) require(std::isfinite(x) && x > 0.0, n, field, "values must be positive");
  return v;
}

std::vector<QuantumBasis> bases(const YAML::Node& n, const std::string& field) {
  return list<QuantumBasis>(n, field, [](const YAML::Node& x, const std::string& f) {
    return enumerated<QuantumBasis>(x, f, parse_basis);
  });
}

void parse_run(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "RunConfig", {"output_dir", "seed", "workers"});
  if (n["output_dir"]) c.output_dir = text(n["output_dir"], "RunConfig.output_dir");
  if (n["seed"]) c.seed = unsigned64(n["seed"], "RunConfig.seed");
  if (n["workers"]) {
    c.workers = integer(n["workers"], "RunConfig.workers");
    require(c.workers >= 1, n["workers"], "RunConfig.workers", "must be >= 1");
  }
}

void parse_datasets(const YAML::Node& n, const fs::path& base, bool check_paths, RunConfig& c) {
  if (!n.IsSequence()) throw ConfigError("datasets", line_of(n), "expected a list");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const YAML::Node e = n[i];
    const std::string f = fmt::format("datasets[{}]", i);
    check_keys(e, f, {"path", "id", "label_column", "class_values", "preprocessed"});
    DatasetEntry d;
    if (!e["path"]) throw ConfigError(f + ".path", line_of(e), "missing");
    d.path = text(e["path"], f + ".path");
    if (d.path.is_relative()) d.path = base / d.path;
    if (check_paths && !fs::exists(d.path)) {
      throw ConfigError(f + ".path", line_of(e["path"]), "file not found: " + d.path.string());
    }
    d.id = e["id"] ? text(e["id"], f + ".id") : d.path.stem().string();
    require(!d.id.empty() && d.id.find_first_of("/\\") == std::string::npos, e, f + ".id", "invalid dataset id");
    require(ids.insert(d.id).second, e, f + ".id", "duplicate dataset id '" + d.id + "'");
    if (e["label_column"]) d.label_column = text(e["label_column"], f + ".label_column");
    if (e["class_values"]) {
      const auto v = list<std::string>(e["class_values"], f + ".class_values", text);
      require(v.size() == 2 && v[0] != v[1], e["class_values"], f + ".class_values", "expected two distinct values");
      d.class_values = std::make_pair(v[0], v[1]);
    }
    if (e["preprocessed"]) d.preprocessed = boolean(e["preprocessed"], f + ".preprocessed");
    c.datasets.push_back(std::move(d));
  }
}

void parse_preprocess(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "Preprocess", {"target_features", "target_points", "drop_correlated", "variance_threshold"});
  auto& p = c.preprocess;
  if (n["target_features"]) {
    p.target_features = integer(n["target_features"], "Preprocess.target_features");
    require(p.target_features >= 1 && p.target_features <= kMaxFeatures, n["target_features"],
            "Preprocess.target_features", fmt::format("must lie in [1, {}]", kMaxFeatures));
  }
  if (n["target_points"]) {
    p.target_points = integer(n["target_points"], "Preprocess.target_points");
    require(p.target_points >= 2, n["target_points"], "Preprocess.target_points", "must be >= 2");
  }
  if (n["drop_correlated"] && !n["drop_correlated"].IsNull()) {
    const double r = real(n["drop_correlated"], "Preprocess.drop_correlated");
    require(r > 0.0 && r <= 1.0, n["drop_correlated"], "Preprocess.drop_correlated", "must lie in (0, 1]");
    p.drop_correlated = r;
  }
  if (n["variance_threshold"]) {
    p.variance_threshold = real(n["variance_threshold"], "Preprocess.variance_threshold");
    require(p.variance_threshold >= 0.0, n["variance_threshold"], "Preprocess.variance_threshold", "must be >= 0");
  }
}

void parse_grid(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "GridSpec",
             {"t_values", "T_values", "gamma_values", "K_values", "C_values", "bases", "seeds", "alpha_mode"});
  auto& g = c.grid;
  if (n["t_values"]) g.t_values = positive_reals(n["t_values"], "GridSpec.t_values");
  if (n["gamma_values"]) g.gamma_values = positive_reals(n["gamma_values"], "GridSpec.gamma_values");
  if (n["C_values"]) g.C_values = positive_reals(n["C_values"], "GridSpec.C_values");
  if (n["T_values"]) {
    g.T_values = list<int>(n["T_values"], "GridSpec.T_values", integer);
    for (int T : g.T_values) require(T >= 1, n["T_values"], "GridSpec.T_values", "values must be >= 1");
  }
  if (n["K_values"]) {
    g.K_values = n["K_values"].IsNull() ? std::vector<int>{} : list<int>(n["K_values"], "GridSpec.K_values", integer);
    for (int K : g.K_values) require(K >= 1, n["K_values"], "GridSpec.K_values", "values must be >= 1");
  }
  if (n["bases"]) g.bases = bases(n["bases"], "GridSpec.bases");
  if (n["seeds"]) g.seeds = list<std::uint64_t>(n["seeds"], "GridSpec.seeds", unsigned64);
  if (n["alpha_mode"]) g.alpha_mode = enumerated<AlphaMode>(n["alpha_mode"], "GridSpec.alpha_mode", parse_alpha_mode);
  for (const char* key : {"t_values", "T_values", "C_values", "bases", "seeds"}) {
    if (n[key] && n[key].IsSequence() && n[key].size() == 0) {
      throw ConfigError(std::string("GridSpec.") + key, line_of(n[key]), "must not be empty");
    }
  }
}

void parse_sweep(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "Sweep", {"train_fraction", "cv_folds", "svm_tol", "cross_validation", "classical"});
  auto& s = c.sweep;
  if (n["train_fraction"]) {
    s.train_fraction = real(n["train_fraction"], "Sweep.train_fraction");
    require(s.train_fraction > 0.0 && s.train_fraction < 1.0, n["train_fraction"], "Sweep.train_fraction",
            "must lie in (0, 1)");
  }
  if (n["cv_folds"]) {
    s.cv_folds = integer(n["cv_folds"], "Sweep.cv_folds");
    require(s.cv_folds >= 2, n["cv_folds"], "Sweep.cv_folds", "must be >= 2");
  }
  if (n["svm_tol"]) {
    s.svm_tol = real(n["svm_tol"], "Sweep.svm_tol");
    require(s.svm_tol > 0.0, n["svm_tol"], "Sweep.svm_tol", "must be positive");
  }
  if (n["cross_validation"]) s.cross_validation = boolean(n["cross_validation"], "Sweep.cross_validation");
  if (n["classical"]) c.classical = boolean(n["classical"], "Sweep.classical");
}

void parse_kernel(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "QuantumKernel", {"basis", "t", "T", "K", "gamma", "alpha_mode", "seed"});
  auto& k = c.kernel;
  if (n["basis"]) k.basis = enumerated<QuantumBasis>(n["basis"], "QuantumKernel.basis", parse_basis);
  if (n["t"]) {
    k.t = real(n["t"], "QuantumKernel.t");
    require(k.t > 0.0, n["t"], "QuantumKernel.t", "must be positive");
  }
  if (n["T"]) {
    k.T = integer(n["T"], "QuantumKernel.T");
    require(k.T >= 1, n["T"], "QuantumKernel.T", "must be >= 1");
  }
  if (n["K"]) {
    k.K = integer(n["K"], "QuantumKernel.K");
    require(k.K >= 0, n["K"], "QuantumKernel.K", "must be >= 0");
  }
  if (n["gamma"]) {
    k.gamma = real(n["gamma"], "QuantumKernel.gamma");
    require(k.gamma > 0.0, n["gamma"], "QuantumKernel.gamma", "must be positive");
  }
  if (n["alpha_mode"]) {
    k.alpha_mode = enumerated<AlphaMode>(n["alpha_mode"], "QuantumKernel.alpha_mode", parse_alpha_mode);
  }
  if (n["seed"]) k.seed = unsigned64(n["seed"], "QuantumKernel.seed");
}

void parse_relabel(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "RelabelParams", {"lambda", "flip_fraction", "seed"});
  auto& r = c.relabel;
  if (n["lambda"]) {
    r.lambda = real(n["lambda"], "RelabelParams.lambda");
    require(r.lambda > 0.0, n["lambda"], "RelabelParams.lambda", "must be positive");
  }
  if (n["flip_fraction"]) {
    r.flip_fraction = real(n["flip_fraction"], "RelabelParams.flip_fraction");
    require(r.flip_fraction >= 0.0 && r.flip_fraction < 1.0, n["flip_fraction"], "RelabelParams.flip_fraction",
            "must lie in [0, 1)");
  }
  if (n["seed"]) r.seed = unsigned64(n["seed"], "RelabelParams.seed");
}

void parse_pipeline(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "Pipeline", {"seed", "T", "t_min", "t_max", "t_count", "target_std_inner", "target_std_distance",
                             "bases", "gamma_values", "C_values"});
  auto& p = c.pipeline;
  if (n["seed"]) p.seed = unsigned64(n["seed"], "Pipeline.seed");
  if (n["T"]) {
    p.T = integer(n["T"], "Pipeline.T");
    require(p.T >= 1, n["T"], "Pipeline.T", "must be >= 1");
  }
  if (n["t_min"]) p.t_min = real(n["t_min"], "Pipeline.t_min");
  if (n["t_max"]) p.t_max = real(n["t_max"], "Pipeline.t_max");
  require(p.t_min > 0.0 && p.t_max >= p.t_min, n, "Pipeline.t_min", "need 0 < t_min <= t_max");
  if (n["t_count"]) {
    p.t_count = integer(n["t_count"], "Pipeline.t_count");
    require(p.t_count >= 1, n["t_count"], "Pipeline.t_count", "must be >= 1");
  }
  if (n["target_std_inner"]) p.target_std_inner = real(n["target_std_inner"], "Pipeline.target_std_inner");
  if (n["target_std_distance"]) p.target_std_distance = real(n["target_std_distance"], "Pipeline.target_std_distance");
  if (n["bases"]) p.bases = bases(n["bases"], "Pipeline.bases");
  if (n["gamma_values"]) p.gamma_values = positive_reals(n["gamma_values"], "Pipeline.gamma_values");
  if (n["C_values"]) p.C_values = positive_reals(n["C_values"], "Pipeline.C_values");
}

void parse_analysis(const YAML::Node& n, RunConfig& c) {
  check_keys(n, "Analysis", {"id", "metrics", "trim_datasets", "trim_fraction", "trees", "depth", "learning_rate"});
  auto& a = c.analysis;
  if (n["id"]) a.id = text(n["id"], "Analysis.id");
  if (n["metrics"]) {
    a.metrics = list<std::string>(n["metrics"], "Analysis.metrics", text);
    for (const auto& m : a.metrics) {
      const auto& known = metric_names();
      require(std::find(known.begin(), known.end(), m) != known.end(), n["metrics"], "Analysis.metrics",
              "unknown metric '" + m + "'");
    }
  }
  if (n["trim_datasets"]) a.trim_datasets = list<std::string>(n["trim_datasets"], "Analysis.trim_datasets", text);
  if (n["trim_fraction"]) {
    a.trim_fraction = real(n["trim_fraction"], "Analysis.trim_fraction");
    require(a.trim_fraction >= 0.0 && a.trim_fraction < 1.0, n["trim_fraction"], "Analysis.trim_fraction",
            "must lie in [0, 1)");
  }
  if (n["trees"]) a.boosting.trees = integer(n["trees"], "Analysis.trees");
  if (n["depth"]) a.boosting.depth = integer(n["depth"], "Analysis.depth");
  if (n["learning_rate"]) a.boosting.learning_rate = real(n["learning_rate"], "Analysis.learning_rate");
  require(a.boosting.trees >= 1 && a.boosting.depth >= 1 && a.boosting.learning_rate > 0.0, n, "Analysis",
          "trees, depth and learning_rate must be positive");
}

// ---------------------------------------------------------------- output

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
}

struct Session {
  RunConfig config;
  std::string command;
  std::vector<std::string> argv;
  std::string started;
  std::ostream* out = nullptr;

  std::uint64_t seed() const {
    if (!config.seed) throw ConfigError("RunConfig.seed", 0, "a global seed is required (config or --seed)");
    return *config.seed;
  }

  SweepOptions sweep_options() const {
    SweepOptions o = config.sweep;
    o.global_seed = seed();
    o.workers = config.workers;
    return o;
  }

  fs::path directory(const std::string& id) const {
    const fs::path d = config.output_dir / id / command;
    fs::create_directories(d);
    return d;
  }

  // Config snapshot next to the outputs, timestamps in a separate file.
  void finish(const fs::path& dir, const std::vector<std::string>& outputs) const {
    write_file_atomic(dir / "config.yaml", [&](std::ostream& o) { o << dump_config(config); });
    nlohmann::ordered_json meta;
    meta["command"] = command;
    meta["version"] = kVersion;
    meta["argv"] = argv;
    meta["started_at"] = started;
    meta["finished_at"] = utc_now();
    meta["outputs"] = outputs;
    write_file_atomic(dir / "metadata.json", [&](std::ostream& o) { o << meta.dump(2) << '\n'; });
  }

  void require_datasets() const {
    if (config.datasets.empty()) throw ConfigError("datasets", 0, "no datasets configured (config or --dataset)");
  }
};

void write_string(const fs::path& path, const std::string& s) {
  write_file_atomic(path, [&](std::ostream& o) { o << s; });
}

int best_index(const std::vector<ResultRecord>& records) {
  int best = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!std::isfinite(records[i].acc_test)) continue;
    if (best < 0 || records[i].acc_test > records[static_cast<std::size_t>(best)].acc_test) best = static_cast<int>(i);
  }
  return best;
}

std::size_t error_count(const std::vector<ResultRecord>& records) {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const ResultRecord& r) { return !r.error.empty(); }));
}

void write_results(const fs::path& dir, const std::vector<ResultRecord>& records) {
  write_file_atomic(dir / "results.csv", [&](std::ostream& o) { write_records_csv(records, o); });
  write_file_atomic(dir / "results.jsonl", [&](std::ostream& o) { write_records_jsonl(records, o); });
}

// ---------------------------------------------------------------- commands

void cmd_preprocess(const Session& s) {
  s.seed();
  s.require_datasets();
  for (const auto& entry : s.config.datasets) {
    const Dataset ds = load_entry(entry, s.config);
    const fs::path dir = s.directory(ds.id);
    write_file_atomic(dir / "dataset.csv", [&](std::ostream& o) { write_dataset_csv(ds, o); });
    s.finish(dir, {"dataset.csv"});
    *s.out << fmt::format("{}: {} points, {} features -> {}\n", ds.id, ds.size(), ds.features(),
                          (dir / "dataset.csv").string());
  }
}

void cmd_sweep(const Session& s) {
  const SweepOptions options = s.sweep_options();
  s.require_datasets();
  for (const auto& entry : s.config.datasets) {
    const Dataset ds = load_entry(entry, s.config);
    const auto records = run_sweep(ds, s.config.grid, options);
    const fs::path dir = s.directory(ds.id);
    write_results(dir, records);
    std::vector<std::string> outputs = {"results.csv", "results.jsonl"};
    if (s.config.classical) {
      const auto classical = run_classical(ds, s.config.grid, options);
      write_file_atomic(dir / "classical.csv", [&](std::ostream& o) { write_classical_csv(classical, o); });
      outputs.push_back("classical.csv");
    }
    s.finish(dir, outputs);
    *s.out << fmt::format("{}: {} records ({} with errors) -> {}\n", ds.id, records.size(), error_count(records),
                          dir.string());
  }
}

void cmd_pipeline(const Session& s) {
  const SweepOptions options = s.sweep_options();
  s.require_datasets();
  for (const auto& entry : s.config.datasets) {
    const Dataset ds = load_entry(entry, s.config);
    const auto points = pipeline_grid(ds, s.config.pipeline);
    const auto records = run_points(ds, points, AlphaMode::mean, options);
    const std::size_t full = build_grid(s.config.grid, static_cast<int>(ds.features())).size();
    const fs::path dir = s.directory(ds.id);
    write_results(dir, records);
    nlohmann::ordered_json summary;
    summary["dataset_id"] = ds.id;
    summary["points"] = points.size();
    summary["full_grid_points"] = full;
    summary["fraction"] = static_cast<double>(points.size()) / static_cast<double>(full);
    nlohmann::ordered_json start;
    for (QuantumBasis b : s.config.pipeline.bases) {
      start[std::string(to_string(b))] = pipeline_start_t(ds, b, s.config.pipeline);
    }
    summary["start_t"] = start;
    const int best = best_index(records);
    if (best >= 0) {
      const auto& r = records[static_cast<std::size_t>(best)];
      summary["best"] = {{"basis", std::string(to_string(r.basis))}, {"t", r.t}, {"gamma", r.gamma}, {"C", r.C},
                         {"acc_test", r.acc_test}};
    } else {
      summary["best"] = nullptr;
    }
    write_string(dir / "pipeline.json", summary.dump(2) + "\n");
    s.finish(dir, {"results.csv", "results.jsonl", "pipeline.json"});
    *s.out << fmt::format("{}: {} of {} grid points; best acc_test {} -> {}\n", ds.id, points.size(), full,
                          best >= 0 ? fmt::format("{:.4f}", records[static_cast<std::size_t>(best)].acc_test) : "n/a",
                          dir.string());
  }
}

void cmd_relabel(const Session& s) {
  const std::uint64_t seed = s.seed();
  s.require_datasets();
  for (const auto& entry : s.config.datasets) {
    const Dataset ds = load_entry(entry, s.config);
    RelabelParams params = s.config.relabel;
    params.seed = derive_seed(seed, hash_string(ds.id), hash_string("relabel"), s.config.relabel.seed);
    const Dataset out = relabel_dataset(ds, s.config.kernel, params);
    const fs::path dir = s.directory(ds.id);
    write_file_atomic(dir / "dataset.csv", [&](std::ostream& o) { write_dataset_csv(out, o); });
    s.finish(dir, {"dataset.csv"});
    const auto ones = std::count(out.y.begin(), out.y.end(), 1);
    *s.out << fmt::format("{}: {} points relabeled ({} positive) -> {}\n", ds.id, out.size(), ones,
                          (dir / "dataset.csv").string());
  }
}

nlohmann::ordered_json gd_json(const GdResult& r) {
  nlohmann::ordered_json j;
  j["g"] = std::isfinite(r.g) ? nlohmann::ordered_json(r.g) : nlohmann::ordered_json(nullptr);
  j["condition"] = std::isfinite(r.condition_diagnostic) ? nlohmann::ordered_json(r.condition_diagnostic)
                                                         : nlohmann::ordered_json(nullptr);
  return j;
}

void cmd_gd(const Session& s, const std::string& kc_path, const std::string& kq_path, const std::string& id) {
  if (kc_path.empty() != kq_path.empty()) throw ConfigError("--kc/--kq", 0, "give both Gram files or neither");
  if (!kc_path.empty()) {
    const Eigen::MatrixXd kc = read_matrix_csv(kc_path);
    const Eigen::MatrixXd kq = read_matrix_csv(kq_path);
    if (kc.rows() != kq.rows()) throw PipelineError("gd", "Gram matrices differ in size");
    const double n = static_cast<double>(kc.rows());
    const GdResult r = geometric_difference(rescale_trace(GramMatrix(kc, "file"), n),
                                            rescale_trace(GramMatrix(kq, "file"), n));
    nlohmann::ordered_json j;
    j["dataset_id"] = id;
    j["kc"] = kc_path;
    j["kq"] = kq_path;
    j["n"] = kc.rows();
    j["result"] = gd_json(r);
    const fs::path dir = s.directory(id);
    write_string(dir / "gd.json", j.dump(2) + "\n");
    s.finish(dir, {"gd.json"});
    *s.out << fmt::format("{}: g = {:.6g}\n", id, r.g);
    return;
  }
  s.seed();
  s.require_datasets();
  for (const auto& entry : s.config.datasets) {
    const Dataset ds = load_entry(entry, s.config);
    const double n = static_cast<double>(ds.size());
    const GramMatrix kq = dataset_quantum_gram(ds.X, s.config.kernel);
    nlohmann::ordered_json j;
    j["dataset_id"] = ds.id;
    j["n"] = ds.size();
    nlohmann::ordered_json results;
    const auto kernels = gd_baselines(ds.X);
    for (std::size_t k = 0; k < kBaselineCount; ++k) {
      const GramMatrix kc = rescale_trace(classical_gram(ds.X, kernels[k]), n);
      results[std::string(to_string(kernels[k].kind))] = gd_json(geometric_difference(kc, kq));
    }
    j["baselines"] = results;
    const fs::path dir = s.directory(ds.id);
    write_string(dir / "gd.json", j.dump(2) + "\n");
    s.finish(dir, {"gd.json"});
    *s.out << fmt::format("{}: g(rbf) = {}\n", ds.id, results["rbf"]["g"].dump());
  }
}

std::vector<ResultRecord> read_results(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("analyze", "cannot open results file " + path.string());
  return read_records_csv(in);
}

void cmd_analyze(const Session& s, std::vector<std::string> result_paths) {
  const auto& cfg = s.config;
  if (result_paths.empty()) {
    s.require_datasets();
    for (const auto& e : cfg.datasets) result_paths.push_back((cfg.output_dir / e.id / "sweep" / "results.csv").string());
  }
  std::vector<ResultRecord> records;
  for (const auto& p : result_paths) {
    auto part = read_results(p);
    records.insert(records.end(), part.begin(), part.end());
  }
  if (records.empty()) throw PipelineError("analyze", "no records");

  if (!cfg.analysis.trim_datasets.empty()) {
    const std::set<std::string> flagged(cfg.analysis.trim_datasets.begin(), cfg.analysis.trim_datasets.end());
    std::vector<ResultRecord> trimmed, kept;
    for (auto& r : records) (flagged.count(r.dataset_id) ? trimmed : kept).push_back(std::move(r));
    trimmed = trim_gd_outliers(trimmed, cfg.analysis.trim_fraction);
    records = std::move(kept);
    records.insert(records.end(), trimmed.begin(), trimmed.end());
  }

  const std::vector<std::string> metrics = cfg.analysis.metrics.empty() ? metric_names() : cfg.analysis.metrics;
  // Tables per metric, built in parallel and written afterwards.
  std::vector<std::vector<std::pair<std::string, std::string>>> tables(metrics.size());
  std::vector<std::string> failures(metrics.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t m = next++; m < metrics.size(); m = next++) {
      try {
        const std::string& metric = metrics[m];
        MarginalOptions mo;
        mo.unit_scale_per_dataset = is_gd_metric(metric);
        for (const auto& param : hyperparameter_names()) {
          std::ostringstream o;
          write_marginal_csv(marginal(records, param, metric, mo), o);
          tables[m].emplace_back(fmt::format("marginals_{}_{}.csv", param, metric), o.str());
        }
        std::ostringstream basis;
        write_basis_scores_csv(marginal_gamma_optimized(records, metric), basis);
        tables[m].emplace_back(fmt::format("marginals_basis_gamma_optimized_{}.csv", metric), basis.str());
        std::ostringstream imp;
        write_importance_csv(aggregate_importance(records, metric, cfg.analysis.boosting), imp);
        tables[m].emplace_back(fmt::format("importance_{}.csv", metric), imp.str());
      } catch (const std::exception& e) {
        failures[m] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), metrics.size());
  for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    if (!failures[m].empty()) throw PipelineError("analyze", metrics[m] + ": " + failures[m]);
  }

  std::vector<Dataset> datasets;
  for (const auto& e : cfg.datasets) datasets.push_back(load_entry(e, cfg));
  std::ostringstream scaling;
  write_scaling_csv(scaling_diagnostic(records, datasets, "acc_test"), scaling);

  const fs::path dir = s.directory(cfg.analysis.id);
  std::vector<std::string> outputs;
  for (const auto& per_metric : tables) {
    for (const auto& [name, body] : per_metric) {
      write_string(dir / name, body);
      outputs.push_back(name);
    }
  }
  write_string(dir / "scaling.csv", scaling.str());
  outputs.push_back("scaling.csv");
  s.finish(dir, outputs);
  *s.out << fmt::format("analyzed {} records, {} tables -> {}\n", records.size(), outputs.size(), dir.string());
}

}  // namespace

// ---------------------------------------------------------------- public

RunConfig parse_config(const std::string& text_in, const fs::path& base_dir, bool check_paths) {
  YAML::Node root;
  try {
    root = YAML::Load(text_in);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<document>", e.mark.is_null() ? 0 : e.mark.line + 1, e.msg);
  }
  RunConfig c;
  if (root.IsNull()) return c;
  check_keys(root, "<document>",
             {"RunConfig", "datasets", "Preprocess", "GridSpec", "Sweep", "QuantumKernel", "RelabelParams",
              "Pipeline", "Analysis"});
  if (root["RunConfig"]) parse_run(root["RunConfig"], c);
  if (root["datasets"]) parse_datasets(root["datasets"], base_dir, check_paths, c);
  if (root["Preprocess"]) parse_preprocess(root["Preprocess"], c);
  if (root["GridSpec"]) parse_grid(root["GridSpec"], c);
  if (root["Sweep"]) parse_sweep(root["Sweep"], c);
  if (root["QuantumKernel"]) parse_kernel(root["QuantumKernel"], c);
  if (root["RelabelParams"]) parse_relabel(root["RelabelParams"], c);
  if (root["Pipeline"]) parse_pipeline(root["Pipeline"], c);
  if (root["Analysis"]) parse_analysis(root["Analysis"], c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", 0, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string dump_config(const RunConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  auto names = [](const std::vector<QuantumBasis>& v) {
    std::vector<std::string> out;
    for (auto b : v) out.emplace_back(to_string(b));
    return out;
  };
  e << YAML::BeginMap;
  e << YAML::Key << "RunConfig" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir.string();
  if (c.seed) e << YAML::Key << "seed" << YAML::Value << *c.seed;
  e << YAML::Key << "workers" << YAML::Value << c.workers;
  e << YAML::EndMap;

  e << YAML::Key << "datasets" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : c.datasets) {
    e << YAML::BeginMap;
    e << YAML::Key << "path" << YAML::Value << d.path.string();
    e << YAML::Key << "id" << YAML::Value << d.id;
    e << YAML::Key << "label_column" << YAML::Value << d.label_column;
    if (d.class_values) {
      e << YAML::Key << "class_values" << YAML::Value << YAML::Flow << YAML::BeginSeq << d.class_values->first
        << d.class_values->second << YAML::EndSeq;
    }
    e << YAML::Key << "preprocessed" << YAML::Value << d.preprocessed;
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;

  const auto& p = c.preprocess;
  e << YAML::Key << "Preprocess" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "target_features" << YAML::Value << p.target_features;
  e << YAML::Key << "target_points" << YAML::Value << p.target_points;
  if (p.drop_correlated) e << YAML::Key << "drop_correlated" << YAML::Value << *p.drop_correlated;
  e << YAML::Key << "variance_threshold" << YAML::Value << p.variance_threshold;
  e << YAML::EndMap;

  const auto& g = c.grid;
  e << YAML::Key << "GridSpec" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "t_values" << YAML::Value << YAML::Flow << g.t_values;
  e << YAML::Key << "T_values" << YAML::Value << YAML::Flow << g.T_values;
  e << YAML::Key << "gamma_values" << YAML::Value << YAML::Flow << g.gamma_values;
  e << YAML::Key << "K_values" << YAML::Value << YAML::Flow << g.K_values;
  e << YAML::Key << "C_values" << YAML::Value << YAML::Flow << g.C_values;
  e << YAML::Key << "bases" << YAML::Value << YAML::Flow << names(g.bases);
  e << YAML::Key << "seeds" << YAML::Value << YAML::Flow << g.seeds;
  e << YAML::Key << "alpha_mode" << YAML::Value << std::string(to_string(g.alpha_mode));
  e << YAML::EndMap;

  const auto& s = c.sweep;
  e << YAML::Key << "Sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "train_fraction" << YAML::Value << s.train_fraction;
  e << YAML::Key << "cv_folds" << YAML::Value << s.cv_folds;
  e << YAML::Key << "svm_tol" << YAML::Value << s.svm_tol;
  e << YAML::Key << "cross_validation" << YAML::Value << s.cross_validation;
  e << YAML::Key << "classical" << YAML::Value << c.classical;
  e << YAML::EndMap;

  const auto& k = c.kernel;
  e << YAML::Key << "QuantumKernel" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "basis" << YAML::Value << std::string(to_string(k.basis));
  e << YAML::Key << "t" << YAML::Value << k.t;
  e << YAML::Key << "T" << YAML::Value << k.T;
  e << YAML::Key << "K" << YAML::Value << k.K;
  e << YAML::Key << "gamma" << YAML::Value << k.gamma;
  e << YAML::Key << "alpha_mode" << YAML::Value << std::string(to_string(k.alpha_mode));
  e << YAML::Key << "seed" << YAML::Value << k.seed;
  e << YAML::EndMap;

  e << YAML::Key << "RelabelParams" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lambda" << YAML::Value << c.relabel.lambda;
  e << YAML::Key << "flip_fraction" << YAML::Value << c.relabel.flip_fraction;
  e << YAML::Key << "seed" << YAML::Value << c.relabel.seed;
  e << YAML::EndMap;

  const auto& pl = c.pipeline;
  e << YAML::Key << "Pipeline" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << pl.seed;
  e << YAML::Key << "T" << YAML::Value << pl.T;
  e << YAML::Key << "t_min" << YAML::Value << pl.t_min;
  e << YAML::Key << "t_max" << YAML::Value << pl.t_max;
  e << YAML::Key << "t_count" << YAML::Value << pl.t_count;
  e << YAML::Key << "target_std_inner" << YAML::Value << pl.target_std_inner;
  e << YAML::Key << "target_std_distance" << YAML::Value << pl.target_std_distance;
  e << YAML::Key << "bases" << YAML::Value << YAML::Flow << names(pl.bases);
  if (!pl.gamma_values.empty()) e << YAML::Key << "gamma_values" << YAML::Value << YAML::Flow << pl.gamma_values;
  if (!pl.C_values.empty()) e << YAML::Key << "C_values" << YAML::Value << YAML::Flow << pl.C_values;
  e << YAML::EndMap;

  const auto& a = c.analysis;
  e << YAML::Key << "Analysis" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "id" << YAML::Value << a.id;
  if (!a.metrics.empty()) e << YAML::Key << "metrics" << YAML::Value << YAML::Flow << a.metrics;
  if (!a.trim_datasets.empty()) e << YAML::Key << "trim_datasets" << YAML::Value << YAML::Flow << a.trim_datasets;
  e << YAML::Key << "trim_fraction" << YAML::Value << a.trim_fraction;
  e << YAML::Key << "trees" << YAML::Value << a.boosting.trees;
  e << YAML::Key << "depth" << YAML::Value << a.boosting.depth;
  e << YAML::Key << "learning_rate" << YAML::Value << a.boosting.learning_rate;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PipelineError("write", "cannot open " + tmp.string());
    try {
      writer(out);
    } catch (...) {
      out.close();
      fs::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw PipelineError("write", "failed writing " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

Dataset load_entry(const DatasetEntry& entry, const RunConfig& config) {
  if (entry.preprocessed) return load_dataset(entry.path, entry.id);
  const RawDataset raw = load_csv(entry.path, entry.label_column, entry.id);
  PreprocessOptions opt = config.preprocess;
  opt.class_values = entry.class_values;
  if (!config.seed) throw ConfigError("RunConfig.seed", 0, "a global seed is required to preprocess");
  opt.seed = derive_seed(*config.seed, hash_string(entry.id), hash_string("preprocess"));
  return preprocess(raw, opt);
}

Eigen::MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("load", "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw PipelineError("load", fmt::format("{}:{}: not a number: '{}'", path.string(), line_no, cell));
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw PipelineError("load", path.string() + ": empty matrix");
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw PipelineError("load", path.string() + ": matrix is not square");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt::format("{:.17g}", m(i, j));
    out << '\n';
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperparameter study of quantum kernel SVMs on simulated Hamiltonian feature maps", "qkstudy"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  std::string config_path, output_dir;
  int workers = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> dataset_paths;
  bool raw = false;
  std::string label_column = "label";
  app.add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Global seed");
  app.add_option("--output-dir", output_dir, "Output root directory");
  app.add_option("--dataset", dataset_paths, "Dataset file(s), replacing the configured list")
      ->check(CLI::ExistingFile);
  app.add_flag("--raw", raw, "--dataset files are raw CSV to be preprocessed");
  app.add_option("--label-column", label_column, "Label column of raw --dataset files");

  auto* c_pre = app.add_subcommand("preprocess", "Clean, select and subsample datasets");
  auto* c_sweep = app.add_subcommand("sweep", "Full hyperparameter sweep");
  auto* c_gd = app.add_subcommand("gd", "Geometric difference between two Gram matrices");
  auto* c_relabel = app.add_subcommand("relabel", "Quantum-favorable relabeling");
  auto* c_pipe = app.add_subcommand("pipeline", "Reduced hyperparameter search");
  auto* c_analyze = app.add_subcommand("analyze", "Marginals, importance and scaling tables");

  std::vector<double> o_t, o_gamma, o_C;
  std::vector<int> o_T, o_K;
  std::vector<std::string> o_basis;
  bool no_cv = false, no_classical = false;
  c_sweep->add_option("--t", o_t, "Evolution times");
  c_sweep->add_option("--T", o_T, "Trotter step counts");
  c_sweep->add_option("--gamma", o_gamma, "Distance-kernel bandwidths");
  c_sweep->add_option("--K", o_K, "Subsystem sizes");
  c_sweep->add_option("--C", o_C, "SVM regularization values");
  c_sweep->add_option("--basis", o_basis, "Kernel bases");
  c_sweep->add_flag("--no-cv", no_cv, "Skip cross validation");
  c_sweep->add_flag("--no-classical", no_classical, "Skip classical baselines");

  std::string kc_path, kq_path, gd_id = "gram";
  c_gd->add_option("--kc", kc_path, "Classical Gram matrix CSV")->check(CLI::ExistingFile);
  c_gd->add_option("--kq", kq_path, "Quantum Gram matrix CSV")->check(CLI::ExistingFile);
  c_gd->add_option("--id", gd_id, "Output id for file inputs");

  double k_t = 0, k_gamma = 0, lambda = 0, flip = -1;
  int k_T = 0, k_K = -1;
  std::string k_basis;
  std::uint64_t haar_seed = 0;
  for (auto* sub : {c_gd, c_relabel}) {
    sub->add_option("--t", k_t, "Evolution time");
    sub->add_option("--T", k_T, "Trotter steps");
    sub->add_option("--K", k_K, "Subsystem size (0: all qubits)");
    sub->add_option("--gamma", k_gamma, "Distance-kernel bandwidth");
    sub->add_option("--basis", k_basis, "Kernel basis");
    sub->add_option("--haar-seed", haar_seed, "Initial-state seed");
  }
  c_relabel->add_option("--lambda", lambda, "Ridge term");
  c_relabel->add_option("--flip-fraction", flip, "Fraction of labels forced to 0");

  int p_T = 0, p_t_count = 0;
  c_pipe->add_option("--T", p_T, "Trotter steps");
  c_pipe->add_option("--t-count", p_t_count, "Log-spaced t candidates");

  std::vector<std::string> results;
  double trim_fraction = -1;
  std::vector<std::string> trim_datasets;
  c_analyze->add_option("--results", results, "Results CSV file(s)")->check(CLI::ExistingFile);
  c_analyze->add_option("--trim-fraction", trim_fraction, "GD outlier fraction");
  c_analyze->add_option("--trim-dataset", trim_datasets, "Dataset ids whose GD outliers are trimmed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  Session s;
  s.command = sub->get_name();
  s.out = &out;
  s.started = utc_now();
  for (int i = 0; i < argc; ++i) s.argv.emplace_back(argv[i]);

  try {
    s.config = config_path.empty() ? RunConfig{} : load_config(config_path);
    auto& c = s.config;
    if (workers_opt->count()) c.workers = workers;
    if (seed_opt->count()) c.seed = seed;
    if (!output_dir.empty()) c.output_dir = output_dir;
    if (!dataset_paths.empty()) {
      c.datasets.clear();
      for (const auto& p : dataset_paths) {
        DatasetEntry d;
        d.path = p;
        d.id = d.path.stem().string();
        d.label_column = label_column;
        d.preprocessed = !raw;
        c.datasets.push_back(std::move(d));
      }
    }
    auto parse_bases = [](const std::vector<std::string>& v) {
      std::vector<QuantumBasis> out_b;
      for (const auto& b : v) {
        try {
          out_b.push_back(parse_basis(b));
        } catch (const std::exception& e) {
          throw ConfigError("--basis", 0, e.what());
        }
      }
      return out_b;
    };
    if (!o_t.empty()) c.grid.t_values = o_t;
    if (!o_T.empty()) c.grid.T_values = o_T;
    if (!o_gamma.empty()) c.grid.gamma_values = o_gamma;
    if (!o_K.empty()) c.grid.K_values = o_K;
    if (!o_C.empty()) c.grid.C_values = o_C;
    if (!o_basis.empty()) c.grid.bases = parse_bases(o_basis);
    if (no_cv) c.sweep.cross_validation = false;
    if (no_classical) c.classical = false;
    if (sub == c_gd || sub == c_relabel) {
      if (sub->count("--t")) c.kernel.t = k_t;
      if (sub->count("--T")) c.kernel.T = k_T;
      if (sub->count("--K")) c.kernel.K = k_K;
      if (sub->count("--gamma")) c.kernel.gamma = k_gamma;
      if (sub->count("--basis")) c.kernel.basis = parse_bases({k_basis}).front();
      if (sub->count("--haar-seed")) c.kernel.seed = haar_seed;
    }
    if (c_relabel->count("--lambda")) c.relabel.lambda = lambda;
    if (c_relabel->count("--flip-fraction")) c.relabel.flip_fraction = flip;
    if (c_pipe->count("--T")) c.pipeline.T = p_T;
    if (c_pipe->count("--t-count")) c.pipeline.t_count = p_t_count;
    if (c_analyze->count("--trim-fraction")) c.analysis.trim_fraction = trim_fraction;
    if (!trim_datasets.empty()) c.analysis.trim_datasets = trim_datasets;

    if (sub == c_pre) {
      cmd_preprocess(s);
    } else if (sub == c_sweep) {
      cmd_sweep(s);
    } else if (sub == c_gd) {
      cmd_gd(s, kc_path, kq_path, gd_id);
    } else if (sub == c_relabel) {
      cmd_relabel(s);
    } else if (sub == c_pipe) {
      cmd_pipeline(s);
    } else {
      cmd_analyze(s, results);
    }
  } catch (const ConfigError& e) {
    err << "error [config]: " << e.what() << '\n';
    return 2;
  } catch (const PipelineError& e) {
    err << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error [" << s.command << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace qkstudy
