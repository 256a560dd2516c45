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

#include "qkstudy/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qkstudy/errors.hpp"
#include "qkstudy/gd.hpp"
#include "qkstudy/seeding.hpp"
#include "qkstudy/simulator.hpp"
#include "qkstudy/svm.hpp"

namespace qkstudy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

// CV seed of a point: a function of its parameters, so a configuration gets
// the same folds whichever grid or position it appears in.
std::uint64_t point_seed(const SweepOptions& o, const std::string& id, const GridPoint& p) {
  return derive_seed(o.global_seed, hash_string(id), static_cast<std::uint64_t>(p.basis), bits(p.t),
                     static_cast<std::uint64_t>(p.T), bits(p.gamma), static_cast<std::uint64_t>(p.K), bits(p.C),
                     p.seed);
}

template <typename T>
void require_nonempty(const std::vector<T>& v, const char* name) {
  if (v.empty()) throw ArgumentError(std::string("grid dimension '") + name + "' is empty");
}

double total_variance(const Eigen::MatrixXd& X) {
  const double mean = X.mean();
  return (X.array() - mean).square().mean();
}

// Runs fn(i) for i in [0, count) on `workers` threads.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(n_threads, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct SharedContext {
  const Dataset* ds = nullptr;
  SplitIndices split;
  std::vector<int> y_train;  // +1/-1
  std::vector<int> y_test;
  std::array<ClassicalInverse, kBaselineCount> baselines;
  std::array<std::string, kBaselineCount> baseline_errors;
};

SharedContext make_context(const Dataset& ds, const SweepOptions& options) {
  SharedContext ctx;
  ctx.ds = &ds;
  ctx.split = sweep_split(ds, options);
  const std::vector<int> y = to_signed(ds.y);
  for (int i : ctx.split.train) ctx.y_train.push_back(y[i]);
  for (int i : ctx.split.test) ctx.y_test.push_back(y[i]);
  const auto kernels = gd_baselines(ds.X);
  for (std::size_t k = 0; k < kBaselineCount; ++k) {
    try {
      const GramMatrix g = rescale_trace(classical_gram(ds.X, kernels[k]), static_cast<double>(ds.size()));
      ctx.baselines[k] = prepare_classical(g);
    } catch (const std::exception& e) {
      ctx.baseline_errors[k] = e.what();
    }
  }
  return ctx;
}

// Test and CV accuracy of one Gram matrix over the whole index set.
void evaluate_svm(const Eigen::MatrixXd& gram, const SharedContext& ctx, const GridPoint& p, const SweepOptions& o,
                  ResultRecord& rec) {
  const Eigen::MatrixXd k_train = submatrix(gram, ctx.split.train, ctx.split.train);
  const SvmModel model = train(k_train, ctx.y_train, p.C, o.svm_tol);
  rec.acc_test = accuracy(predict(model, submatrix(gram, ctx.split.test, ctx.split.train)), ctx.y_test);
  rec.acc_cv = o.cross_validation
                   ? cross_validate(k_train, ctx.y_train, p.C, o.cv_folds, point_seed(o, ctx.ds->id, p), o.svm_tol)
                   : kNaN;
}

ResultRecord blank_record(const Dataset& ds, const GridPoint& p, AlphaMode alpha) {
  ResultRecord r;
  r.dataset_id = ds.id;
  r.basis = p.basis;
  r.t = p.t;
  r.T = p.T;
  r.gamma = p.basis == QuantumBasis::distance ? p.gamma : kGammaPlaceholder;
  r.K = p.K;
  r.C = p.C;
  r.seed = p.seed;
  r.alpha_mode = alpha;
  r.acc_test = kNaN;
  r.acc_cv = kNaN;
  r.gd.fill(kNaN);
  return r;
}

// Key of the embedding a point needs.
using EmbedKey = std::tuple<std::uint64_t, double, int>;
// Key of a Gram matrix within one embedding.
using GramKey = std::tuple<int, int, double>;

}  // namespace

GridSpec default_grid_spec() {
  GridSpec s;
  for (int k = -6; k <= 6; ++k) s.t_values.push_back(std::ldexp(1.0, k));
  s.T_values = {1, 3, 9, 27, 81};
  s.gamma_values = logspace10(-3.0, 3.0, 13);
  s.C_values = logspace10(-1.0, 5.0, 13);
  s.bases = {QuantumBasis::inner, QuantumBasis::distance};
  s.seeds = {0};
  s.alpha_mode = AlphaMode::mean;
  return s;
}

std::vector<double> logspace10(double lo, double hi, int count) {
  if (count < 1) throw ArgumentError("logspace10: count must be >= 1");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    const double e = count == 1 ? lo : lo + (hi - lo) * k / (count - 1);
    // Exact powers of ten where the exponent is integral.
    const double r = std::round(e);
    out.push_back(std::abs(e - r) < 1e-12 ? std::stod("1e" + std::to_string(static_cast<int>(r))) : std::pow(10.0, e));
  }
  return out;
}

std::vector<GridPoint> build_grid(const GridSpec& spec, int n_features) {
  require_nonempty(spec.t_values, "t_values");
  require_nonempty(spec.T_values, "T_values");
  require_nonempty(spec.C_values, "C_values");
  require_nonempty(spec.bases, "bases");
  require_nonempty(spec.seeds, "seeds");
  const bool has_distance = std::find(spec.bases.begin(), spec.bases.end(), QuantumBasis::distance) != spec.bases.end();
  if (has_distance) require_nonempty(spec.gamma_values, "gamma_values");
  std::vector<int> ks = spec.K_values;
  if (ks.empty()) {
    if (n_features < 1) throw ArgumentError("build_grid: n_features must be >= 1");
    for (int k = 1; k <= n_features + 1; ++k) ks.push_back(k);
  }

  std::vector<GridPoint> out;
  for (auto seed : spec.seeds) {
    for (double t : spec.t_values) {
      for (int T : spec.T_values) {
        for (int K : ks) {
          for (QuantumBasis b : spec.bases) {
            const std::vector<double> gammas =
                b == QuantumBasis::distance ? spec.gamma_values : std::vector<double>{kGammaPlaceholder};
            for (double g : gammas) {
              for (double C : spec.C_values) out.push_back({b, t, T, g, K, C, seed});
            }
          }
        }
      }
    }
  }
  return out;
}

std::array<ClassicalKernel, kBaselineCount> gd_baselines(const Eigen::MatrixXd& X) {
  const double var = total_variance(X);
  const double scale = var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
  std::array<ClassicalKernel, kBaselineCount> out;
  for (std::size_t k = 0; k < kBaselineCount; ++k) {
    out[k].kind = kClassicalKinds[k];
    out[k].gamma = scale;
    out[k].degree = 3;
    // A constant offset keeps the all-ones direction in the span of the odd
    // kernels; without it GD against a near-constant K_Q blows up.
    out[k].coef0 = 1.0;
  }
  return out;
}

SplitIndices sweep_split(const Dataset& ds, const SweepOptions& options) {
  return split_indices(ds.y, options.train_fraction,
                       derive_seed(options.global_seed, hash_string(ds.id), hash_string("split")));
}

std::vector<ResultRecord> run_points(const Dataset& ds, const std::vector<GridPoint>& points, AlphaMode alpha_mode,
                                     const SweepOptions& options) {
  std::vector<ResultRecord> records(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) records[i] = blank_record(ds, points[i], alpha_mode);
  if (points.empty()) return records;

  const SharedContext ctx = make_context(ds, options);
  const double n = static_cast<double>(ds.size());

  std::map<EmbedKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < points.size(); ++i) {
    groups[{points[i].seed, points[i].t, points[i].T}].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> work;
  for (const auto& [key, members] : groups) work.push_back(&members);

  parallel_for(work.size(), options.workers, [&](std::size_t w) {
    const std::vector<std::size_t>& members = *work[w];
    const GridPoint& head = points[members.front()];
    std::vector<Statevector> states;
    try {
      states.reserve(static_cast<std::size_t>(ds.size()));
      const FeatureMapParams fm{head.t, head.T, head.seed};
      for (Eigen::Index i = 0; i < ds.size(); ++i) {
        const Eigen::VectorXd x = ds.X.row(i).transpose();
        states.push_back(embed(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), fm));
      }
    } catch (const std::exception& e) {
      for (std::size_t idx : members) records[idx].error = std::string("embed: ") + e.what();
      return;
    }

    std::map<int, RdmGeometry> geometries;
    struct Prepared {
      Eigen::MatrixXd gram;
      std::array<double, kBaselineCount> gd;
      std::string error;
    };
    std::map<GramKey, Prepared> prepared;

    for (std::size_t idx : members) {
      const GridPoint& p = points[idx];
      ResultRecord& rec = records[idx];
      const GramKey key{p.K, static_cast<int>(p.basis), rec.gamma};
      auto it = prepared.find(key);
      if (it == prepared.end()) {
        Prepared prep;
        prep.gd.fill(kNaN);
        try {
          auto geo = geometries.find(p.K);
          if (geo == geometries.end()) {
            if (p.K < 1 || p.K > states.front().n_qubits) {
              throw ArgumentError(fmt::format("K={} outside [1, {}]", p.K, states.front().n_qubits));
            }
            geo = geometries.emplace(p.K, rdm_geometry(rdm_features(std::span<const Statevector>(states), p.K))).first;
          }
          const KernelParams kp{p.basis, p.K, p.basis == QuantumBasis::distance ? p.gamma : 1.0, alpha_mode};
          const GramMatrix g = rescale_trace(quantum_gram(geo->second, kp), n);
          for (std::size_t k = 0; k < kBaselineCount; ++k) {
            if (!ctx.baseline_errors[k].empty()) continue;
            try {
              prep.gd[k] = geometric_difference(ctx.baselines[k], g).g;
            } catch (const std::exception&) {
              prep.gd[k] = kNaN;
            }
          }
          prep.gram = g.values;
        } catch (const std::exception& e) {
          prep.error = std::string("kernel: ") + e.what();
        }
        it = prepared.emplace(key, std::move(prep)).first;
      }
      const Prepared& prep = it->second;
      rec.gd = prep.gd;
      if (!prep.error.empty()) {
        rec.error = prep.error;
        continue;
      }
      try {
        evaluate_svm(prep.gram, ctx, p, options, rec);
      } catch (const std::exception& e) {
        rec.error = std::string("svm: ") + e.what();
      }
    }
  });
  return records;
}

std::vector<ResultRecord> run_sweep(const Dataset& ds, const GridSpec& spec, const SweepOptions& options) {
  return run_points(ds, build_grid(spec, static_cast<int>(ds.features())), spec.alpha_mode, options);
}

std::vector<double> classical_gamma_grid(const GridSpec& spec, const Eigen::MatrixXd& X) {
  std::vector<double> out = spec.gamma_values;
  const double d = static_cast<double>(X.cols());
  out.push_back(1.0 / d);
  const double var = total_variance(X);
  if (var > 0.0) out.push_back(1.0 / (d * var));
  return out;
}

std::vector<ClassicalRecord> run_classical(const Dataset& ds, const GridSpec& spec, const SweepOptions& options) {
  require_nonempty(spec.C_values, "C_values");
  const SplitIndices split = sweep_split(ds, options);
  const Dataset train_ds = subset(ds, split.train);
  const Dataset test_ds = subset(ds, split.test);
  const std::vector<int> y_train = to_signed(train_ds.y);
  const std::vector<int> y_test = to_signed(test_ds.y);
  const std::vector<double> gammas = classical_gamma_grid(spec, train_ds.X);

  struct Job {
    ClassicalKernel kernel;
  };
  std::vector<Job> jobs;
  for (ClassicalKind kind : kClassicalKinds) {
    if (kind == ClassicalKind::linear) {
      jobs.push_back({{kind, 1.0, 3, 0.0}});
      continue;
    }
    for (double g : gammas) jobs.push_back({{kind, g, 3, 0.0}});
  }
  std::vector<std::vector<ClassicalRecord>> per_job(jobs.size());
  parallel_for(jobs.size(), options.workers, [&](std::size_t j) {
    const ClassicalKernel& kernel = jobs[j].kernel;
    Eigen::MatrixXd k_train, k_test;
    std::string error;
    try {
      k_train = classical_gram(train_ds.X, kernel).values;
      k_test = classical_cross(test_ds.X, train_ds.X, kernel);
    } catch (const std::exception& e) {
      error = e.what();
    }
    for (double C : spec.C_values) {
      ClassicalRecord rec;
      rec.dataset_id = ds.id;
      rec.kernel = kernel.kind;
      rec.gamma = kernel.kind == ClassicalKind::linear ? kGammaPlaceholder : kernel.gamma;
      rec.C = C;
      rec.acc_test = kNaN;
      rec.acc_cv = kNaN;
      rec.error = error;
      if (error.empty()) {
        try {
          const SvmModel model = train(k_train, y_train, C, options.svm_tol);
          rec.acc_test = accuracy(predict(model, k_test), y_test);
          if (options.cross_validation) {
            const std::uint64_t seed = derive_seed(options.global_seed, hash_string(ds.id), hash_string("classical"),
                                                   static_cast<std::uint64_t>(kernel.kind), bits(kernel.gamma), bits(C));
            rec.acc_cv = cross_validate(k_train, y_train, C, options.cv_folds, seed, options.svm_tol);
          }
        } catch (const std::exception& e) {
          rec.error = e.what();
        }
      }
      per_job[j].push_back(std::move(rec));
    }
  });
  std::vector<ClassicalRecord> out;
  for (auto& v : per_job) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

double pipeline_start_t(const Dataset& ds, QuantumBasis basis, const PipelineOverrides& o) {
  const double sd = std::sqrt(total_variance(ds.X));
  const double target = basis == QuantumBasis::distance ? o.target_std_distance : o.target_std_inner;
  if (!(sd > 0.0)) return o.t_max;
  return std::clamp(target / sd, o.t_min, o.t_max);
}

std::vector<GridPoint> pipeline_grid(const Dataset& ds, const PipelineOverrides& o) {
  if (o.bases.empty()) throw ArgumentError("pipeline: no kernel basis selected");
  if (!(o.t_min > 0.0) || !(o.t_max >= o.t_min)) throw ArgumentError("pipeline: invalid t interval");
  const GridSpec defaults = default_grid_spec();
  const std::vector<double>& gammas = o.gamma_values.empty() ? defaults.gamma_values : o.gamma_values;
  const std::vector<double>& cs = o.C_values.empty() ? defaults.C_values : o.C_values;
  const int K = static_cast<int>(ds.features()) + 1;

  std::vector<GridPoint> out;
  for (QuantumBasis b : o.bases) {
    std::vector<double> ts = logspace10(std::log10(o.t_min), std::log10(o.t_max), o.t_count);
    const double start = pipeline_start_t(ds, b, o);
    if (std::none_of(ts.begin(), ts.end(), [start](double t) { return std::abs(t - start) < 1e-12; })) {
      ts.insert(ts.begin(), start);
    }
    const std::vector<double> bandwidths =
        b == QuantumBasis::distance ? gammas : std::vector<double>{kGammaPlaceholder};
    for (double t : ts) {
      for (double g : bandwidths) {
        for (double C : cs) out.push_back({b, t, o.T, g, K, C, o.seed});
      }
    }
  }
  return out;
}

std::vector<ResultRecord> run_pipeline(const Dataset& ds, const PipelineOverrides& o, const SweepOptions& options) {
  return run_points(ds, pipeline_grid(ds, o), AlphaMode::mean, options);
}

GramMatrix dataset_quantum_gram(const Eigen::MatrixXd& X, const QuantumKernelSpec& spec) {
  const auto n_qubits = static_cast<int>(X.cols()) + 1;
  const int K = spec.K == 0 ? n_qubits : spec.K;
  if (K < 1 || K > n_qubits) throw ArgumentError(fmt::format("K={} outside [1, {}]", K, n_qubits));
  std::vector<Statevector> states;
  states.reserve(static_cast<std::size_t>(X.rows()));
  const FeatureMapParams fm{spec.t, spec.T, spec.seed};
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    states.push_back(embed(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), fm));
  }
  const KernelParams kp{spec.basis, K, spec.gamma, spec.alpha_mode};
  const RdmGeometry geo = rdm_geometry(rdm_features(std::span<const Statevector>(states), K));
  return rescale_trace(quantum_gram(geo, kp), static_cast<double>(X.rows()));
}

Dataset relabel_dataset(const Dataset& ds, const QuantumKernelSpec& kernel, const RelabelParams& params) {
  const double n = static_cast<double>(ds.size());
  const GramMatrix kq = dataset_quantum_gram(ds.X, kernel);
  const GramMatrix kc = rescale_trace(classical_gram(ds.X, gd_baselines(ds.X)[0]), n);
  Dataset out = ds;
  out.y = relabel(kc, kq, params);
  return out;
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "dataset_id", "basis", "t", "T", "gamma", "K", "C", "seed", "alpha_mode", "acc_test", "acc_cv",
      "gd_rbf", "gd_linear", "gd_polynomial", "gd_laplacian", "gd_sigmoid", "error"};
  return cols;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

double parse_num(const std::string& s) {
  if (s == "nan" || s.empty()) return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_row(const std::string& line) {
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

nlohmann::json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

void write_records_csv(const std::vector<ResultRecord>& records, std::ostream& out) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    out << csv_escape(r.dataset_id) << ',' << to_string(r.basis) << ',' << num(r.t) << ',' << r.T << ','
        << num(r.gamma) << ',' << r.K << ',' << num(r.C) << ',' << r.seed << ',' << to_string(r.alpha_mode) << ','
        << num(r.acc_test) << ',' << num(r.acc_cv);
    for (double g : r.gd) out << ',' << num(g);
    out << ',' << csv_escape(r.error) << '\n';
  }
}

void write_records_jsonl(const std::vector<ResultRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["dataset_id"] = r.dataset_id;
    j["basis"] = std::string(to_string(r.basis));
    j["t"] = json_num(r.t);
    j["T"] = r.T;
    j["gamma"] = json_num(r.gamma);
    j["K"] = r.K;
    j["C"] = json_num(r.C);
    j["seed"] = r.seed;
    j["alpha_mode"] = std::string(to_string(r.alpha_mode));
    j["acc_test"] = json_num(r.acc_test);
    j["acc_cv"] = json_num(r.acc_cv);
    for (std::size_t k = 0; k < kBaselineCount; ++k) {
      j["gd_" + std::string(to_string(kClassicalKinds[k]))] = json_num(r.gd[k]);
    }
    j["error"] = r.error;
    out << j.dump() << '\n';
  }
}

std::vector<ResultRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  const std::vector<std::string> header = split_row(line);
  if (header != record_columns()) throw PipelineError("results", "unexpected results header");
  std::vector<ResultRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_row(line);
    if (f.size() != header.size()) {
      throw PipelineError("results", fmt::format("line {}: expected {} fields, got {}", line_no, header.size(), f.size()));
    }
    try {
      ResultRecord r;
      r.dataset_id = f[0];
      r.basis = parse_basis(f[1]);
      r.t = parse_num(f[2]);
      r.T = std::stoi(f[3]);
      r.gamma = parse_num(f[4]);
      r.K = std::stoi(f[5]);
      r.C = parse_num(f[6]);
      r.seed = std::stoull(f[7]);
      r.alpha_mode = parse_alpha_mode(f[8]);
      r.acc_test = parse_num(f[9]);
      r.acc_cv = parse_num(f[10]);
      for (std::size_t k = 0; k < kBaselineCount; ++k) r.gd[k] = parse_num(f[11 + k]);
      r.error = f[16];
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw PipelineError("results", fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

void write_classical_csv(const std::vector<ClassicalRecord>& records, std::ostream& out) {
  out << "dataset_id,kernel,gamma,C,acc_test,acc_cv,error\n";
  for (const auto& r : records) {
    out << csv_escape(r.dataset_id) << ',' << to_string(r.kernel) << ',' << num(r.gamma) << ',' << num(r.C) << ','
        << num(r.acc_test) << ',' << num(r.acc_cv) << ',' << csv_escape(r.error) << '\n';
  }
}

}  // namespace qkstudy
