// Batch front end over the sbtk C API: model fitting, prediction, completion
// and machine-readable result emission.
//
// Exit status: 0 success, 2 parse failure, 3 validation failure,
// 4 solver non-convergence (partial results still written), 5 internal.

#include <sbtk.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNonConvergence = 4;
constexpr int kExitInternal = 5;

struct CliError {
  int exit_code;
  std::string message;
};

const char* error_class(int code) {
  switch (code) {
    case kExitParse: return "parse";
    case kExitValidation: return "validation";
    case kExitNonConvergence: return "non_convergence";
    default: return "internal";
  }
}

int status_exit(sbtk_status st) {
  switch (st) {
    case SBTK_OK: return 0;
    case SBTK_ERR_PARSE: return kExitParse;
    case SBTK_ERR_DOMAIN: return kExitValidation;
    default: return kExitInternal;
  }
}

void check(sbtk_status st, const std::string& context) {
  if (st == SBTK_OK) return;
  throw CliError{status_exit(st), context + ": " + sbtk_last_error()};
}

void require_input_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw CliError{kExitValidation, "input path does not exist: " + path};
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream os(path);
  if (!os) throw CliError{kExitInternal, "cannot open " + path + " for writing"};
  os << doc.dump(2) << "\n";
}

std::string out_path(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

// ---- small CSV readers (parse failures name line and column) --------------

std::vector<std::vector<double>> read_csv_numeric(const std::string& path, size_t min_cols) {
  std::ifstream is(path);
  if (!is) throw CliError{kExitValidation, "cannot open " + path};
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool header_skipped = false;
  size_t width = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!header_skipped) {
      header_skipped = true;
      continue;
    }
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    int col = 1;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        std::ostringstream msg;
        msg << path << ":" << line_no << ":" << col << ": expected a number, got '" << cell
            << "'";
        throw CliError{kExitParse, msg.str()};
      }
      col += static_cast<int>(cell.size()) + 1;
    }
    if (cells.size() < min_cols) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ":1: expected at least " << min_cols << " columns";
      throw CliError{kExitParse, msg.str()};
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ":1: inconsistent column count";
      throw CliError{kExitParse, msg.str()};
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw CliError{kExitParse, path + ": no data rows"};
  return rows;
}

struct TimeSeries {
  std::vector<double> t, value;
};

TimeSeries read_time_series(const std::string& path) {
  require_input_file(path);
  TimeSeries ts;
  for (const auto& row : read_csv_numeric(path, 2)) {
    ts.t.push_back(row[0]);
    ts.value.push_back(row[1]);
  }
  return ts;
}

struct LabeledData {
  std::vector<double> X;  // row-major n x dim
  std::vector<int> y;
  int n = 0, dim = 0, classes = 0;
};

LabeledData read_labeled(const std::string& path) {
  require_input_file(path);
  const auto rows = read_csv_numeric(path, 2);
  LabeledData d;
  d.n = static_cast<int>(rows.size());
  d.dim = static_cast<int>(rows[0].size()) - 1;
  for (const auto& row : rows) {
    for (int c = 0; c < d.dim; ++c) d.X.push_back(row[c]);
    const double raw = row.back();
    if (raw != std::floor(raw))
      throw CliError{kExitParse, path + ": label column must be integer"};
    d.y.push_back(static_cast<int>(raw));
    d.classes = std::max(d.classes, static_cast<int>(raw) + 1);
  }
  return d;
}

// deterministic Fisher-Yates from a splitmix-style stream
std::vector<int> shuffled_indices(int n, uint64_t seed) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  auto next = [&z]() {
    z += 0x9e3779b97f4a7c15ULL;
    uint64_t x = z;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[next() % (i + 1)]);
  return idx;
}

// ---- handle guards ---------------------------------------------------------

template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* ptr = nullptr;
  ~Handle() {
    if (ptr) Destroy(ptr);
  }
  T** slot() { return &ptr; }
  T* get() const { return ptr; }
};

using KernelHandle = Handle<sbtk_kernel, sbtk_kernel_destroy>;
using GpResultHandle = Handle<sbtk_gp_result, sbtk_gp_result_destroy>;
using TensorHandle = Handle<sbtk_tensor, sbtk_tensor_destroy>;
using CpdResultHandle = Handle<sbtk_cpd_result, sbtk_cpd_result_destroy>;
using LwtaHandle = Handle<sbtk_lwta, sbtk_lwta_destroy>;
using ArdResultHandle = Handle<sbtk_ard_result, sbtk_ard_result_destroy>;

std::string kernel_json_string(const sbtk_kernel* k) {
  char* text = nullptr;
  check(sbtk_kernel_to_json(k, &text), "kernel serialization");
  std::string out(text);
  sbtk_string_free(text);
  return out;
}

// ---- shared option blocks ---------------------------------------------------

struct CommonOpts {
  std::string out_dir = ".";
  uint64_t seed = 0;
};

struct SolverOpts {
  std::string solver = "mm";
  int max_iters = 0;
  double tol = 0.0;
  double prune_threshold = -1.0;
};

// ---- gp helpers --------------------------------------------------------------

struct SeriesSplit {
  std::vector<double> t_train, y_train, t_test, y_test;
  double t0 = 0.0, dt = 1.0, y_offset = 0.0;
};

SeriesSplit split_series(const TimeSeries& ts, int holdout, bool center) {
  const int n = static_cast<int>(ts.t.size());
  if (holdout < 0 || holdout >= n)
    throw CliError{kExitValidation, "holdout must lie in [0, n)"};
  SeriesSplit s;
  s.t0 = ts.t.front();
  // sampling-interval normalization: grid units are (t - t0)/dt
  if (n > 1) {
    std::vector<double> diffs;
    for (int i = 1; i < n; ++i) diffs.push_back(ts.t[i] - ts.t[i - 1]);
    std::sort(diffs.begin(), diffs.end());
    s.dt = diffs[diffs.size() / 2];
    if (!(s.dt > 0.0)) s.dt = 1.0;
  }
  const int train_n = n - holdout;
  double mean = 0.0;
  for (int i = 0; i < train_n; ++i) mean += ts.value[i];
  mean /= std::max(1, train_n);
  s.y_offset = center ? mean : 0.0;
  for (int i = 0; i < n; ++i) {
    const double tt = (ts.t[i] - s.t0) / s.dt;
    const double vv = ts.value[i] - s.y_offset;
    if (i < train_n) {
      s.t_train.push_back(tt);
      s.y_train.push_back(vv);
    } else {
      s.t_test.push_back(tt);
      s.y_test.push_back(vv);
    }
  }
  return s;
}

void write_trace_csv(const std::string& path, const std::vector<double>& objective,
                     const std::vector<int>* active) {
  std::ofstream os(path);
  if (!os) throw CliError{kExitInternal, "cannot open " + path};
  os.precision(17);
  os << (active ? "iter,objective,active\n" : "iter,objective\n");
  for (size_t i = 0; i < objective.size(); ++i) {
    os << i << "," << objective[i];
    if (active) os << "," << (*active)[i];
    os << "\n";
  }
}

// ---- commands ---------------------------------------------------------------

int cmd_ibp_sample(const CommonOpts& common, double alpha, int rows, int jmax, int draws) {
  const auto t0 = std::chrono::steady_clock::now();
  if (draws < 1) throw CliError{kExitValidation, "draws must be >= 1"};

  std::vector<double> sticks(jmax), probs(jmax);
  std::vector<uint8_t> z(static_cast<size_t>(rows) * jmax);
  double row_sum_total = 0.0;
  std::vector<double> first_sticks, first_probs;
  for (int d = 0; d < draws; ++d) {
    check(sbtk_ibp_sample(alpha, rows, jmax, common.seed + d, sticks.data(), probs.data(),
                          z.data()),
          "ibp sampling");
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < jmax; ++j) row_sum_total += z[i * static_cast<size_t>(jmax) + j];
    if (d == 0) {
      first_sticks = sticks;
      first_probs = probs;
    }
  }
  const double mean_row_sum = row_sum_total / (static_cast<double>(rows) * draws);
  const double ratio = alpha / (1.0 + alpha);
  const double expected = alpha * (1.0 - std::pow(ratio, jmax));

  {
    std::ofstream os(out_path(common.out_dir, "draw.csv"));
    os.precision(17);
    os << "j,stick,prob\n";
    for (int j = 0; j < jmax; ++j)
      os << j << "," << first_sticks[j] << "," << first_probs[j] << "\n";
  }
  {
    std::ofstream os(out_path(common.out_dir, "z.csv"));
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < jmax; ++j)
        os << int(z[i * static_cast<size_t>(jmax) + j]) << (j + 1 < jmax ? "," : "");
      os << "\n";
    }
  }

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "ibp-sample";
  doc["seed"] = common.seed;
  doc["params"] = {{"alpha", alpha}, {"rows", rows}, {"jmax", jmax}, {"draws", draws}};
  doc["results"] = {{"mean_row_sum", mean_row_sum},
                    {"expected_row_sum", expected},
                    {"truncation_tail", std::pow(ratio, jmax)}};
  doc["timing"] = {{"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return 0;
}

int cmd_blr(const CommonOpts& common, const std::string& data_path, int max_iters, double tol,
            double fixed_beta) {
  const auto t0 = std::chrono::steady_clock::now();
  require_input_file(data_path);
  const auto rows = read_csv_numeric(data_path, 2);
  const int n = static_cast<int>(rows.size());
  const int l = static_cast<int>(rows[0].size()) - 1;
  std::vector<double> X(static_cast<size_t>(n) * l), y(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < l; ++c) X[i * static_cast<size_t>(l) + c] = rows[i][c];
    y[i] = rows[i].back();
  }

  ArdResultHandle fit;
  check(sbtk_ard_fit(X.data(), n, l, y.data(), max_iters, tol, fixed_beta, fit.slot()),
        "ard fit");
  std::vector<double> alpha(l);
  std::vector<int> pruned(l);
  double beta = 0.0;
  int converged = 0, trace_len = 0;
  sbtk_ard_result_alpha(fit.get(), alpha.data());
  sbtk_ard_result_beta(fit.get(), &beta);
  sbtk_ard_result_pruned(fit.get(), pruned.data());
  sbtk_ard_result_converged(fit.get(), &converged);
  sbtk_ard_result_trace_len(fit.get(), &trace_len);
  std::vector<double> trace(trace_len);
  sbtk_ard_result_trace(fit.get(), trace.data());

  std::vector<double> mean(l), cov(static_cast<size_t>(l) * l);
  check(sbtk_blr_posterior(X.data(), n, l, y.data(), alpha.data(), beta, mean.data(),
                           cov.data()),
        "posterior");

  write_trace_csv(out_path(common.out_dir, "trace.csv"), trace, nullptr);

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "blr";
  doc["seed"] = common.seed;
  doc["params"] = {{"data", data_path},
                   {"max_iters", max_iters},
                   {"tol", tol},
                   {"fixed_beta", fixed_beta}};
  json alpha_j = json::array(), pruned_j = json::array(), mean_j = json::array();
  for (int i = 0; i < l; ++i) {
    alpha_j.push_back(alpha[i]);
    pruned_j.push_back(pruned[i] != 0);
    mean_j.push_back(mean[i]);
  }
  doc["results"] = {{"converged", converged != 0},
                    {"beta", beta},
                    {"alpha", alpha_j},
                    {"pruned", pruned_j},
                    {"posterior_mean", mean_j},
                    {"log_evidence", trace.empty() ? 0.0 : trace.back()}};
  doc["timing"] = {{"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return converged ? 0 : kExitNonConvergence;
}

KernelHandle make_kernel(const std::string& kernel_path, int q, double sigma, double freq_lo,
                         double freq_hi) {
  KernelHandle kernel;
  if (!kernel_path.empty()) {
    require_input_file(kernel_path);
    std::ifstream is(kernel_path);
    std::stringstream ss;
    ss << is.rdbuf();
    check(sbtk_kernel_parse(ss.str().c_str(), kernel.slot()), "kernel config");
  } else {
    check(sbtk_kernel_grid_make(q, freq_lo, freq_hi, sigma, kernel.slot()), "grid kernel");
  }
  return kernel;
}

int cmd_gp_fit(const CommonOpts& common, const SolverOpts& solver, const std::string& data_path,
               int holdout, bool center, const std::string& kernel_path, int q, double sigma,
               double freq_lo, double freq_hi) {
  const auto t0 = std::chrono::steady_clock::now();
  const TimeSeries ts = read_time_series(data_path);
  const SeriesSplit split = split_series(ts, holdout, center);
  const int n = static_cast<int>(split.t_train.size());

  KernelHandle kernel = make_kernel(kernel_path, q, sigma, freq_lo, freq_hi);

  sbtk_gp_options opts{};
  opts.max_iters = solver.max_iters;
  opts.tol = solver.tol;
  opts.seed = common.seed;
  opts.learn_noise = 1;

  const auto fit_start = std::chrono::steady_clock::now();
  GpResultHandle fit;
  check(sbtk_gp_fit(kernel.get(), split.t_train.data(), n, 1, split.y_train.data(),
                    solver.solver.c_str(), &opts, fit.slot()),
        "gp fit");
  const double fit_seconds = elapsed_s(fit_start);

  KernelHandle learned;
  check(sbtk_gp_result_kernel(fit.get(), learned.slot()), "fitted kernel");
  double noise_var = 0.0, evidence = 0.0;
  int converged = 0, active = 0, trace_len = 0;
  sbtk_gp_result_noise_var(fit.get(), &noise_var);
  sbtk_gp_result_evidence(fit.get(), &evidence);
  sbtk_gp_result_converged(fit.get(), &converged);
  sbtk_gp_result_active_count(fit.get(), &active);
  sbtk_gp_result_trace_len(fit.get(), &trace_len);
  std::vector<double> objective(trace_len);
  std::vector<int> active_trace(trace_len);
  sbtk_gp_result_trace(fit.get(), objective.data(), active_trace.data());

  // model document (self-contained for gp-predict)
  json model_doc;
  model_doc["schema_version"] = 1;
  model_doc["kernel"] = json::parse(kernel_json_string(learned.get()));
  model_doc["noise_var"] = noise_var;
  model_doc["y_offset"] = split.y_offset;
  model_doc["t0"] = split.t0;
  model_doc["dt"] = split.dt;
  write_json(out_path(common.out_dir, "model.json"), model_doc);

  write_trace_csv(out_path(common.out_dir, "trace.csv"), objective, &active_trace);

  json results = {{"converged", converged != 0},
                  {"log_evidence", evidence},
                  {"noise_var", noise_var},
                  {"active_weights", active},
                  {"iterations", trace_len}};

  if (holdout > 0) {
    const int m = holdout;
    std::vector<double> mean(m), var(m);
    check(sbtk_gp_predict(learned.get(), noise_var, split.t_train.data(), n, 1,
                          split.y_train.data(), split.t_test.data(), m, mean.data(),
                          var.data()),
          "holdout prediction");
    std::vector<double> truth(m), pred(m);
    for (int i = 0; i < m; ++i) {
      truth[i] = split.y_test[i] + split.y_offset;
      pred[i] = mean[i] + split.y_offset;
    }
    double mse = 0.0, mape = 0.0;
    int excluded = 0;
    check(sbtk_metrics(truth.data(), pred.data(), m, &mse, &mape, &excluded), "metrics");
    results["holdout"] = {{"points", m}, {"mse", mse}, {"mape_percent", mape},
                          {"mape_excluded", excluded}};

    std::ofstream os(out_path(common.out_dir, "predictions.csv"));
    os.precision(17);
    os << "t,mean,variance,truth\n";
    for (int i = 0; i < m; ++i)
      os << split.t_test[i] * split.dt + split.t0 << "," << pred[i] << "," << var[i] << ","
         << truth[i] << "\n";
  }

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "gp-fit";
  doc["seed"] = common.seed;
  doc["params"] = {{"data", data_path},   {"solver", solver.solver}, {"holdout", holdout},
                   {"center", center},    {"kernel_file", kernel_path},
                   {"Q", q},              {"sigma", sigma},
                   {"freq_lo", freq_lo},  {"freq_hi", freq_hi}};
  doc["results"] = results;
  doc["timing"] = {{"fit_seconds", fit_seconds}, {"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return converged ? 0 : kExitNonConvergence;
}

int cmd_gp_predict(const CommonOpts& common, const std::string& model_path,
                   const std::string& data_path, int holdout) {
  const auto t0 = std::chrono::steady_clock::now();
  require_input_file(model_path);
  json model_doc;
  try {
    std::ifstream is(model_path);
    model_doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw CliError{kExitParse, model_path + ": " + e.what()};
  }
  KernelHandle kernel;
  check(sbtk_kernel_parse(model_doc.at("kernel").dump().c_str(), kernel.slot()), "model kernel");
  const double noise_var = model_doc.at("noise_var").get<double>();
  const double y_offset = model_doc.value("y_offset", 0.0);
  const double t0_model = model_doc.value("t0", 0.0);
  const double dt_model = model_doc.value("dt", 1.0);

  const TimeSeries ts = read_time_series(data_path);
  const int n_total = static_cast<int>(ts.t.size());
  if (holdout < 1 || holdout >= n_total)
    throw CliError{kExitValidation, "holdout must lie in [1, n)"};
  const int n = n_total - holdout;

  std::vector<double> t_train(n), y_train(n), t_test(holdout), truth(holdout);
  for (int i = 0; i < n_total; ++i) {
    const double tt = (ts.t[i] - t0_model) / dt_model;
    if (i < n) {
      t_train[i] = tt;
      y_train[i] = ts.value[i] - y_offset;
    } else {
      t_test[i - n] = tt;
      truth[i - n] = ts.value[i];
    }
  }
  std::vector<double> mean(holdout), var(holdout);
  check(sbtk_gp_predict(kernel.get(), noise_var, t_train.data(), n, 1, y_train.data(),
                        t_test.data(), holdout, mean.data(), var.data()),
        "prediction");
  std::vector<double> pred(holdout);
  for (int i = 0; i < holdout; ++i) pred[i] = mean[i] + y_offset;
  double mse = 0.0, mape = 0.0;
  int excluded = 0;
  check(sbtk_metrics(truth.data(), pred.data(), holdout, &mse, &mape, &excluded), "metrics");

  {
    std::ofstream os(out_path(common.out_dir, "predictions.csv"));
    os.precision(17);
    os << "t,mean,variance,truth\n";
    for (int i = 0; i < holdout; ++i)
      os << t_test[i] * dt_model + t0_model << "," << pred[i] << "," << var[i] << ","
         << truth[i] << "\n";
  }

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "gp-predict";
  doc["seed"] = common.seed;
  doc["params"] = {{"model", model_path}, {"data", data_path}, {"holdout", holdout}};
  doc["results"] = {{"mse", mse}, {"mape_percent", mape}, {"mape_excluded", excluded}};
  doc["timing"] = {{"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return 0;
}

int cmd_cpd_fit(const CommonOpts& common, const SolverOpts& solver,
                const std::string& data_path, int rank) {
  const auto t0 = std::chrono::steady_clock::now();
  require_input_file(data_path);
  TensorHandle data;
  check(sbtk_tensor_read(data_path.c_str(), data.slot()), "tensor input");

  sbtk_cpd_options opts{};
  opts.max_sweeps = solver.max_iters;
  opts.tol = solver.tol;
  opts.prune_threshold = solver.prune_threshold;
  opts.seed = common.seed;

  const auto fit_start = std::chrono::steady_clock::now();
  CpdResultHandle fit;
  check(sbtk_cpd_fit(data.get(), rank, &opts, fit.slot()), "cpd fit");
  const double fit_seconds = elapsed_s(fit_start);

  int recovered = 0, converged = 0, elbo_len = 0, order = 0;
  double noise_precision = 0.0;
  sbtk_cpd_result_rank(fit.get(), &recovered);
  sbtk_cpd_result_converged(fit.get(), &converged);
  sbtk_cpd_result_noise_precision(fit.get(), &noise_precision);
  sbtk_cpd_result_elbo_len(fit.get(), &elbo_len);
  sbtk_tensor_order(data.get(), &order);
  std::vector<int> dims(order);
  sbtk_tensor_dims(data.get(), dims.data());
  std::vector<double> elbo(elbo_len);
  sbtk_cpd_result_elbo(fit.get(), elbo.data());

  write_trace_csv(out_path(common.out_dir, "trace.csv"), elbo, nullptr);

  json factors = json::array();
  for (int p = 0; p < order; ++p) {
    std::vector<double> f(static_cast<size_t>(dims[p]) * recovered);
    if (recovered > 0) sbtk_cpd_result_factor(fit.get(), p, f.data());
    json fj = json::array();
    for (int r = 0; r < dims[p]; ++r) {
      json rowj = json::array();
      for (int c = 0; c < recovered; ++c) rowj.push_back(f[r * static_cast<size_t>(recovered) + c]);
      fj.push_back(rowj);
    }
    factors.push_back(fj);
  }

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "cpd-fit";
  doc["seed"] = common.seed;
  doc["params"] = {{"data", data_path},
                   {"rank_bound", rank},
                   {"max_sweeps", solver.max_iters},
                   {"tol", solver.tol},
                   {"prune_threshold", solver.prune_threshold}};
  doc["results"] = {{"converged", converged != 0},
                    {"recovered_rank", recovered},
                    {"noise_precision_mean", noise_precision},
                    {"final_elbo", elbo.empty() ? 0.0 : elbo.back()},
                    {"sweeps", elbo_len},
                    {"factors", factors}};
  doc["timing"] = {{"fit_seconds", fit_seconds}, {"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return converged ? 0 : kExitNonConvergence;
}

int cmd_cpd_complete(const CommonOpts& common, const SolverOpts& solver,
                     const std::string& data_path, int rank, const std::string& mean_name,
                     const std::string& var_name) {
  const auto t0 = std::chrono::steady_clock::now();
  require_input_file(data_path);
  TensorHandle data;
  check(sbtk_tensor_read(data_path.c_str(), data.slot()), "tensor input");

  sbtk_cpd_options opts{};
  opts.max_sweeps = solver.max_iters;
  opts.tol = solver.tol;
  opts.prune_threshold = solver.prune_threshold;
  opts.seed = common.seed;

  const auto fit_start = std::chrono::steady_clock::now();
  TensorHandle mean, variance;
  CpdResultHandle model;
  check(sbtk_cpd_complete(data.get(), rank, &opts, mean.slot(), variance.slot(), model.slot()),
        "cpd completion");
  const double fit_seconds = elapsed_s(fit_start);

  const std::string mean_path = out_path(common.out_dir, mean_name);
  const std::string var_path = out_path(common.out_dir, var_name);
  check(sbtk_tensor_write(mean.get(), mean_path.c_str()), "completion output");
  check(sbtk_tensor_write(variance.get(), var_path.c_str()), "variance output");

  int recovered = 0, converged = 0;
  double noise_precision = 0.0;
  sbtk_cpd_result_rank(model.get(), &recovered);
  sbtk_cpd_result_converged(model.get(), &converged);
  sbtk_cpd_result_noise_precision(model.get(), &noise_precision);

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "cpd-complete";
  doc["seed"] = common.seed;
  doc["params"] = {{"data", data_path}, {"rank_bound", rank}};
  doc["results"] = {{"converged", converged != 0},
                    {"recovered_rank", recovered},
                    {"noise_precision_mean", noise_precision},
                    {"mean_tensor", mean_name},
                    {"variance_tensor", var_name}};
  doc["timing"] = {{"fit_seconds", fit_seconds}, {"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return converged ? 0 : kExitNonConvergence;
}

std::vector<std::pair<int, int>> parse_arch(const std::string& arch) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(arch);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto x = part.find('x');
    if (x == std::string::npos)
      throw CliError{kExitValidation, "bad --arch entry '" + part + "', expected KxJ"};
    try {
      out.emplace_back(std::stoi(part.substr(0, x)), std::stoi(part.substr(x + 1)));
    } catch (const std::exception&) {
      throw CliError{kExitValidation, "bad --arch entry '" + part + "', expected KxJ"};
    }
  }
  if (out.empty()) throw CliError{kExitValidation, "--arch must list at least one layer"};
  return out;
}

int cmd_lwta_train(const CommonOpts& common, const std::string& data_path,
                   const std::string& arch, int epochs, double lr, int batch, double alpha,
                   double holdout_frac, const std::string& save_name) {
  const auto t0 = std::chrono::steady_clock::now();
  const LabeledData data = read_labeled(data_path);
  if (data.classes < 2) throw CliError{kExitValidation, "need at least two classes"};
  if (holdout_frac < 0.0 || holdout_frac >= 1.0)
    throw CliError{kExitValidation, "holdout fraction must lie in [0, 1)"};

  const auto geometry = parse_arch(arch);
  std::vector<int> blocks, units;
  for (const auto& [k, j] : geometry) {
    blocks.push_back(k);
    units.push_back(j);
  }

  // deterministic holdout split
  const std::vector<int> order = shuffled_indices(data.n, common.seed ^ 0x5157Au);
  const int n_test = static_cast<int>(std::floor(holdout_frac * data.n));
  const int n_train = data.n - n_test;
  std::vector<double> x_train, x_test;
  std::vector<int> y_train, y_test;
  for (int i = 0; i < data.n; ++i) {
    const int src = order[i];
    auto& xs = (i < n_train) ? x_train : x_test;
    auto& ys = (i < n_train) ? y_train : y_test;
    for (int c = 0; c < data.dim; ++c) xs.push_back(data.X[src * static_cast<size_t>(data.dim) + c]);
    ys.push_back(data.y[src]);
  }

  LwtaHandle net;
  check(sbtk_lwta_create(data.dim, blocks.data(), units.data(),
                         static_cast<int>(blocks.size()), data.classes, alpha, common.seed,
                         net.slot()),
        "network creation");

  sbtk_lwta_train_options opts{};
  opts.learning_rate = lr;
  opts.epochs = epochs;
  opts.batch_size = batch;
  opts.seed = common.seed;

  const int steps_cap = epochs * ((n_train + batch - 1) / std::max(1, batch));
  std::vector<double> trace(std::max(1, steps_cap));
  int steps = 0;
  double final_elbo = 0.0;
  const auto fit_start = std::chrono::steady_clock::now();
  check(sbtk_lwta_train(net.get(), x_train.data(), n_train, data.dim, y_train.data(), &opts,
                        trace.data(), steps_cap, &steps, &final_elbo),
        "training");
  const double fit_seconds = elapsed_s(fit_start);
  trace.resize(std::min(steps, steps_cap));

  const std::string model_path = out_path(common.out_dir, save_name);
  check(sbtk_lwta_save(net.get(), model_path.c_str()), "model save");
  write_trace_csv(out_path(common.out_dir, "trace.csv"), trace, nullptr);

  json results = {{"steps", steps}, {"final_elbo", final_elbo}, {"model", save_name},
                  {"classes", data.classes}};
  if (n_test > 0) {
    std::vector<int> pred(n_test);
    check(sbtk_lwta_predict(net.get(), x_test.data(), n_test, data.dim, 0, common.seed,
                            pred.data(), nullptr),
          "holdout prediction");
    int hits = 0;
    for (int i = 0; i < n_test; ++i)
      if (pred[i] == y_test[i]) ++hits;
    results["holdout_accuracy"] = static_cast<double>(hits) / n_test;
    results["holdout_points"] = n_test;
  }

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "lwta-train";
  doc["seed"] = common.seed;
  doc["params"] = {{"data", data_path}, {"arch", arch},   {"epochs", epochs},
                   {"lr", lr},          {"batch", batch}, {"alpha", alpha},
                   {"holdout_frac", holdout_frac}};
  doc["results"] = results;
  doc["timing"] = {{"fit_seconds", fit_seconds}, {"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return 0;
}

int cmd_lwta_prune(const CommonOpts& common, const std::string& model_path, double tau,
                   const std::string& save_name, const std::string& data_path) {
  const auto t0 = std::chrono::steady_clock::now();
  require_input_file(model_path);
  LwtaHandle net;
  check(sbtk_lwta_load(model_path.c_str(), net.slot()), "model load");
  int layers = 0;
  sbtk_lwta_layer_count(net.get(), &layers);

  json results;
  if (!data_path.empty()) {
    const LabeledData data = read_labeled(data_path);
    std::vector<int> pred(data.n);
    check(sbtk_lwta_predict(net.get(), data.X.data(), data.n, data.dim, 0, common.seed,
                            pred.data(), nullptr),
          "pre-prune prediction");
    int hits = 0;
    for (int i = 0; i < data.n; ++i)
      if (pred[i] == data.y[i]) ++hits;
    results["accuracy_before"] = static_cast<double>(hits) / data.n;
  }

  std::vector<double> retained(layers);
  check(sbtk_lwta_prune(net.get(), tau, retained.data()), "pruning");

  if (!data_path.empty()) {
    const LabeledData data = read_labeled(data_path);
    std::vector<int> pred(data.n);
    check(sbtk_lwta_predict(net.get(), data.X.data(), data.n, data.dim, 0, common.seed,
                            pred.data(), nullptr),
          "post-prune prediction");
    int hits = 0;
    for (int i = 0; i < data.n; ++i)
      if (pred[i] == data.y[i]) ++hits;
    results["accuracy_after"] = static_cast<double>(hits) / data.n;
  }

  const std::string out_model = out_path(common.out_dir, save_name);
  check(sbtk_lwta_save(net.get(), out_model.c_str()), "model save");

  results["retained_fraction"] = vec_json(retained);
  results["model"] = save_name;

  // per-layer bit-precision report (readout last)
  const int ceiling = 23;
  json bits = json::array();
  for (int layer = 0; layer <= layers; ++layer) {
    std::vector<int> hist(ceiling + 1);
    double mean_bits = 0.0;
    check(sbtk_lwta_bit_report(net.get(), layer, ceiling, hist.data(), &mean_bits),
          "bit report");
    json hj = json::array();
    for (int b = 0; b <= ceiling; ++b) hj.push_back(hist[b]);
    bits.push_back({{"layer", layer}, {"mean_bits", mean_bits}, {"histogram", hj}});
  }
  results["bit_report"] = bits;

  json doc;
  doc["schema_version"] = 1;
  doc["command"] = "lwta-prune";
  doc["seed"] = common.seed;
  doc["params"] = {{"model", model_path}, {"tau", tau}, {"data", data_path}};
  doc["results"] = results;
  doc["timing"] = {{"total_seconds", elapsed_s(t0)}};
  write_json(out_path(common.out_dir, "result.json"), doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sbtk: sparsity-aware Bayesian learning toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  const char* env_seed = std::getenv("SBTK_SEED");
  if (env_seed) common.seed = std::strtoull(env_seed, nullptr, 10);
  app.add_option("--out", common.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", common.seed,
                 "Random seed (default from SBTK_SEED environment variable)")
      ->capture_default_str();

  // ibp-sample
  auto* ibp = app.add_subcommand("ibp-sample", "Draw truncated IBP realizations");
  double ibp_alpha = 1.0;
  int ibp_rows = 100, ibp_jmax = 100, ibp_draws = 1;
  ibp->add_option("--alpha", ibp_alpha, "IBP strength parameter")->required();
  ibp->add_option("--rows", ibp_rows, "Rows (customers)")->capture_default_str();
  ibp->add_option("--jmax", ibp_jmax, "Stick truncation")->capture_default_str();
  ibp->add_option("--draws", ibp_draws, "Number of draws")->capture_default_str();

  // blr
  auto* blr = app.add_subcommand("blr", "Bayesian linear regression with evidence-driven ARD");
  std::string blr_data;
  int blr_iters = 500;
  double blr_tol = 1e-8, blr_beta = 0.0;
  blr->add_option("--data", blr_data, "CSV with feature columns then target column")->required();
  blr->add_option("--max-iters", blr_iters, "Iteration cap")->capture_default_str();
  blr->add_option("--tol", blr_tol, "Relative evidence tolerance")->capture_default_str();
  blr->add_option("--fixed-beta", blr_beta, "Fix the noise precision (<=0 learns it)")
      ->capture_default_str();

  // gp-fit
  auto* gpf = app.add_subcommand("gp-fit", "Fit a linear-multiple-kernel GP to a time series");
  std::string gpf_data, gpf_kernel;
  SolverOpts gpf_solver;
  int gpf_holdout = 20, gpf_q = 500;
  double gpf_sigma = 0.001, gpf_lo = 0.0, gpf_hi = 0.5;
  bool gpf_no_center = false;
  gpf->add_option("--data", gpf_data, "CSV time series (t,value with header)")->required();
  gpf->add_option("--solver", gpf_solver.solver, "Solver: mm, admm or seq")
      ->capture_default_str();
  gpf->add_option("--holdout", gpf_holdout, "Held-out test points at the end")
      ->capture_default_str();
  gpf->add_option("--kernel", gpf_kernel, "Kernel spec JSON (overrides the grid options)");
  gpf->add_option("--Q", gpf_q, "Grid size")->capture_default_str();
  gpf->add_option("--sigma", gpf_sigma, "Grid component standard deviation")
      ->capture_default_str();
  gpf->add_option("--freq-lo", gpf_lo, "Grid frequency range start")->capture_default_str();
  gpf->add_option("--freq-hi", gpf_hi, "Grid frequency range end (< 1/2]")
      ->capture_default_str();
  gpf->add_option("--max-iters", gpf_solver.max_iters, "Solver iteration cap (0 = default)")
      ->capture_default_str();
  gpf->add_option("--tol", gpf_solver.tol, "Solver tolerance (0 = default)")
      ->capture_default_str();
  gpf->add_flag("--no-center", gpf_no_center, "Do not subtract the training mean");

  // gp-predict
  auto* gpp = app.add_subcommand("gp-predict", "Predict held-out points with a fitted GP model");
  std::string gpp_model, gpp_data;
  int gpp_holdout = 20;
  gpp->add_option("--model", gpp_model, "model.json from gp-fit")->required();
  gpp->add_option("--data", gpp_data, "CSV time series (t,value with header)")->required();
  gpp->add_option("--holdout", gpp_holdout, "Held-out test points at the end")
      ->capture_default_str();

  // cpd-fit
  auto* cpf = app.add_subcommand("cpd-fit", "Bayesian CP decomposition with rank determination");
  std::string cpf_data;
  SolverOpts cpf_solver;
  int cpf_rank = 10;
  cpf->add_option("--data", cpf_data, "Tensor text file")->required();
  cpf->add_option("--rank", cpf_rank, "Initial rank bound")->capture_default_str();
  cpf->add_option("--max-iters", cpf_solver.max_iters, "Sweep cap (0 = default)")
      ->capture_default_str();
  cpf->add_option("--tol", cpf_solver.tol, "Relative ELBO tolerance (0 = default)")
      ->capture_default_str();
  cpf->add_option("--prune-threshold", cpf_solver.prune_threshold,
                  "Relative column-power prune threshold (<0 = default)")
      ->capture_default_str();

  // cpd-complete
  auto* cpc = app.add_subcommand("cpd-complete", "Complete missing tensor entries");
  std::string cpc_data, cpc_mean = "completed.txt", cpc_var = "variance.txt";
  SolverOpts cpc_solver;
  int cpc_rank = 10;
  cpc->add_option("--data", cpc_data, "Tensor text file with missing entries")->required();
  cpc->add_option("--rank", cpc_rank, "Initial rank bound")->capture_default_str();
  cpc->add_option("--out-mean", cpc_mean, "Completed tensor file name")->capture_default_str();
  cpc->add_option("--out-var", cpc_var, "Per-entry variance file name")->capture_default_str();
  cpc->add_option("--max-iters", cpc_solver.max_iters, "Sweep cap (0 = default)")
      ->capture_default_str();
  cpc->add_option("--tol", cpc_solver.tol, "Relative ELBO tolerance (0 = default)")
      ->capture_default_str();

  // lwta-train
  auto* lwt = app.add_subcommand("lwta-train", "Train a stochastic LWTA Bayesian network");
  std::string lwt_data, lwt_arch = "8x2,8x2", lwt_save = "model.bin";
  int lwt_epochs = 100, lwt_batch = 64;
  double lwt_lr = 0.01, lwt_alpha = 1.0, lwt_holdout = 0.2;
  lwt->add_option("--data", lwt_data, "CSV with feature columns then integer label column")
      ->required();
  lwt->add_option("--arch", lwt_arch, "Layer geometry KxJ list, e.g. 8x2,8x2")
      ->capture_default_str();
  lwt->add_option("--epochs", lwt_epochs, "Training epochs")->capture_default_str();
  lwt->add_option("--lr", lwt_lr, "Learning rate")->capture_default_str();
  lwt->add_option("--batch", lwt_batch, "Batch size")->capture_default_str();
  lwt->add_option("--alpha", lwt_alpha, "IBP strength")->capture_default_str();
  lwt->add_option("--holdout-frac", lwt_holdout, "Held-out fraction for accuracy reporting")
      ->capture_default_str();
  lwt->add_option("--save", lwt_save, "Model file name")->capture_default_str();

  // lwta-prune
  auto* lwp = app.add_subcommand("lwta-prune", "Prune a trained network by posterior utility");
  std::string lwp_model, lwp_save = "pruned.bin", lwp_data;
  double lwp_tau = 0.01;
  lwp->add_option("--model", lwp_model, "Trained network container")->required();
  lwp->add_option("--tau", lwp_tau, "Utility cutoff in (0,1)")->capture_default_str();
  lwp->add_option("--save", lwp_save, "Pruned model file name")->capture_default_str();
  lwp->add_option("--data", lwp_data, "Optional CSV for accuracy before/after");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitParse;
  }

  int rc = 0;
  try {
    if (app.got_subcommand(ibp)) {
      rc = cmd_ibp_sample(common, ibp_alpha, ibp_rows, ibp_jmax, ibp_draws);
    } else if (app.got_subcommand(blr)) {
      rc = cmd_blr(common, blr_data, blr_iters, blr_tol, blr_beta);
    } else if (app.got_subcommand(gpf)) {
      rc = cmd_gp_fit(common, gpf_solver, gpf_data, gpf_holdout, !gpf_no_center, gpf_kernel,
                      gpf_q, gpf_sigma, gpf_lo, gpf_hi);
    } else if (app.got_subcommand(gpp)) {
      rc = cmd_gp_predict(common, gpp_model, gpp_data, gpp_holdout);
    } else if (app.got_subcommand(cpf)) {
      rc = cmd_cpd_fit(common, cpf_solver, cpf_data, cpf_rank);
    } else if (app.got_subcommand(cpc)) {
      rc = cmd_cpd_complete(common, cpc_solver, cpc_data, cpc_rank, cpc_mean, cpc_var);
    } else if (app.got_subcommand(lwt)) {
      rc = cmd_lwta_train(common, lwt_data, lwt_arch, lwt_epochs, lwt_lr, lwt_batch, lwt_alpha,
                          lwt_holdout, lwt_save);
    } else if (app.got_subcommand(lwp)) {
      rc = cmd_lwta_prune(common, lwp_model, lwp_tau, lwp_save, lwp_data);
    }
  } catch (const CliError& e) {
    json err;
    err["schema_version"] = 1;
    err["error"] = {{"exit_code", e.exit_code},
                    {"class", error_class(e.exit_code)},
                    {"message", e.message}};
    std::cerr << err.dump(2) << "\n";
    try {
      write_json(out_path(common.out_dir, "error.json"), err);
    } catch (...) {
    }
    return e.exit_code;
  } catch (const std::exception& e) {
    json err;
    err["schema_version"] = 1;
    err["error"] = {{"exit_code", kExitInternal},
                    {"class", "internal"},
                    {"message", e.what()}};
    std::cerr << err.dump(2) << "\n";
    return kExitInternal;
  }
  return rc;
}
