#include "sbtk/cpd.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sbtk/errors.hpp"
#include "sbtk/special.hpp"

namespace sbtk {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

double gamma_entropy(double shape, double rate) {
  return shape - std::log(rate) + std::lgamma(shape) + (1.0 - shape) * digamma(shape);
}

double gamma_e_log(double shape, double rate) { return digamma(shape) - std::log(rate); }

// Observation ids grouped by the index of one mode.
std::vector<std::vector<int>> group_by_mode(const PartialTensor& data, int mode) {
  std::vector<std::vector<int>> groups(data.dims[mode]);
  for (int o = 0; o < data.observed(); ++o) groups[data.indices(o, mode)].push_back(o);
  return groups;
}

// Second moments m m' + Sigma for every row of one mode.
std::vector<Eigen::MatrixXd> mode_moments(const CpdModel& model, int mode) {
  const auto& mean = model.factor_mean[mode];
  const auto& cov = model.factor_cov[mode];
  std::vector<Eigen::MatrixXd> out(mean.rows());
  for (int j = 0; j < mean.rows(); ++j)
    out[j] = mean.row(j).transpose() * mean.row(j) + cov[j];
  return out;
}

Eigen::MatrixXd keep_columns(const Eigen::MatrixXd& m, const std::vector<int>& keep) {
  Eigen::MatrixXd out(m.rows(), keep.size());
  for (size_t c = 0; c < keep.size(); ++c) out.col(c) = m.col(keep[c]);
  return out;
}

Eigen::MatrixXd keep_rowcols(const Eigen::MatrixXd& m, const std::vector<int>& keep) {
  Eigen::MatrixXd out(keep.size(), keep.size());
  for (size_t r = 0; r < keep.size(); ++r)
    for (size_t c = 0; c < keep.size(); ++c) out(r, c) = m(keep[r], keep[c]);
  return out;
}

// Expected residual power sum_o E[(y_o - yhat_o)^2] plus the pieces the callers
// need; shared by the beta update and the ELBO.
double expected_residual(const CpdModel& model, const PartialTensor& data) {
  const int p_order = data.order();
  const int l_act = model.active_rank();
  std::vector<std::vector<Eigen::MatrixXd>> moments(p_order);
  for (int p = 0; p < p_order; ++p) moments[p] = mode_moments(model, p);

  double total = 0.0;
  for (int o = 0; o < data.observed(); ++o) {
    const double y = data.values[o];
    Eigen::VectorXd mean_prod = Eigen::VectorXd::Ones(l_act);
    Eigen::MatrixXd mom_prod = Eigen::MatrixXd::Ones(l_act, l_act);
    for (int p = 0; p < p_order; ++p) {
      const int j = data.indices(o, p);
      mean_prod = mean_prod.cwiseProduct(model.factor_mean[p].row(j).transpose());
      mom_prod = mom_prod.cwiseProduct(moments[p][j]);
    }
    const double e_mean = mean_prod.sum();
    const double e_sq = mom_prod.sum();
    total += y * y - 2.0 * y * e_mean + e_sq;
  }
  return total;
}

}  // namespace

std::int64_t PartialTensor::total_entries() const {
  std::int64_t t = 1;
  for (int d : dims) t *= d;
  return t;
}

void PartialTensor::validate() const {
  if (order() < 2) throw DomainError("tensor order must be at least 2");
  for (int d : dims)
    if (d < 1) throw DomainError("tensor dimensions must be positive");
  if (observed() < 1) throw DomainError("at least one observed entry is required");
  if (indices.rows() != observed() || indices.cols() != order())
    throw DomainError("index matrix shape must be nobs x order");
  if (!values.allFinite()) throw DomainError("observed values must be finite");
  std::unordered_set<std::int64_t> seen;
  seen.reserve(observed());
  for (int o = 0; o < observed(); ++o) {
    std::int64_t flat = 0;
    for (int p = 0; p < order(); ++p) {
      const int idx = indices(o, p);
      if (idx < 0 || idx >= dims[p]) {
        std::ostringstream msg;
        msg << "index out of range at observation " << o << ", mode " << p << ": " << idx;
        throw DomainError(msg.str());
      }
      flat = flat * dims[p] + idx;
    }
    if (!seen.insert(flat).second) {
      std::ostringstream msg;
      msg << "duplicate observation index at row " << o;
      throw DomainError(msg.str());
    }
  }
}

Eigen::VectorXd CpdModel::lambda_mean() const {
  return lambda_shape.cwiseQuotient(lambda_rate);
}

double CpdModel::reconstruct(const Eigen::VectorXi& index) const {
  const int l_act = active_rank();
  Eigen::VectorXd prod = Eigen::VectorXd::Ones(l_act);
  for (size_t p = 0; p < factor_mean.size(); ++p)
    prod = prod.cwiseProduct(factor_mean[p].row(index[static_cast<int>(p)]).transpose());
  return prod.sum();
}

double CpdModel::reconstruct_variance(const Eigen::VectorXi& index) const {
  const int l_act = active_rank();
  Eigen::VectorXd mean_prod = Eigen::VectorXd::Ones(l_act);
  Eigen::MatrixXd mom_prod = Eigen::MatrixXd::Ones(l_act, l_act);
  for (size_t p = 0; p < factor_mean.size(); ++p) {
    const int j = index[static_cast<int>(p)];
    mean_prod = mean_prod.cwiseProduct(factor_mean[p].row(j).transpose());
    mom_prod = mom_prod.cwiseProduct(factor_mean[p].row(j).transpose() * factor_mean[p].row(j) +
                                     factor_cov[p][j]);
  }
  const double e_mean = mean_prod.sum();
  return std::max(mom_prod.sum() - e_mean * e_mean, 0.0);
}

CpdModel cpd_init(const PartialTensor& data, int rank_bound, Rng& rng, const CpdOptions& opts) {
  data.validate();
  if (rank_bound < 1) throw DomainError("rank bound must be at least 1");
  const int p_order = data.order();

  int max_dim = 0;
  for (int d : data.dims) max_dim = std::max(max_dim, d);
  if (rank_bound > max_dim && opts.warn_stream)
    std::cerr << "cpd_init: rank bound " << rank_bound << " exceeds the largest mode dimension "
              << max_dim << "\n";

  const double value_sd = std::sqrt(data.values.squaredNorm() / data.observed() + 1e-300);

  CpdModel model;
  model.rank_bound = rank_bound;
  model.factor_mean.resize(p_order);
  model.factor_cov.resize(p_order);
  for (int l = 0; l < rank_bound; ++l) model.active_columns.push_back(l);

  for (int p = 0; p < p_order; ++p) {
    const int jp = data.dims[p];
    // Gram of the zero-filled unfolding; eigenvectors give the SVD left factors.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(jp, jp);
    {
      std::vector<std::vector<int>> groups = group_by_mode(data, p);
      // gram(a,b) = sum over columns of the unfolding of Y_a Y_b; accumulate
      // through the sparse entries: two observations meet in a column iff all
      // their non-p indices agree. Hash the non-p index tuple.
      std::unordered_map<std::int64_t, std::vector<int>> columns;
      columns.reserve(data.observed());
      for (int o = 0; o < data.observed(); ++o) {
        std::int64_t key = 0;
        for (int q = 0; q < p_order; ++q) {
          if (q == p) continue;
          key = key * data.dims[q] + data.indices(o, q);
        }
        columns[key].push_back(o);
      }
      for (const auto& [key, obs] : columns) {
        for (int a : obs)
          for (int b : obs)
            gram(data.indices(a, p), data.indices(b, p)) += data.values[a] * data.values[b];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    model.factor_mean[p].resize(jp, rank_bound);
    const int available = jp;
    for (int l = 0; l < rank_bound; ++l) {
      if (l < available) {
        const int src = available - 1 - l;  // eigenvalues ascend
        const double ev = std::max(es.eigenvalues()[src], 0.0);
        model.factor_mean[p].col(l) = es.eigenvectors().col(src) * std::pow(ev, 0.25);
      } else {
        for (int j = 0; j < jp; ++j)
          model.factor_mean[p](j, l) = 0.01 * value_sd * rng.normal();
      }
    }
    model.factor_cov[p].assign(jp, 1e-2 * Eigen::MatrixXd::Identity(rank_bound, rank_bound));
  }

  model.lambda_shape = Eigen::VectorXd::Constant(rank_bound, opts.a0);
  model.lambda_rate = Eigen::VectorXd::Constant(rank_bound, opts.b0);
  model.beta_shape = opts.c0;
  model.beta_rate = opts.d0;
  return model;
}

void cpd_vi_step(CpdModel& model, const PartialTensor& data, const CpdOptions& opts) {
  const int p_order = data.order();
  const int l_act = model.active_rank();
  const double e_beta = model.beta_mean();
  const Eigen::VectorXd e_lambda = model.lambda_mean();

  for (int p = 0; p < p_order; ++p) {
    std::vector<std::vector<Eigen::MatrixXd>> other_moments(p_order);
    for (int q = 0; q < p_order; ++q)
      if (q != p) other_moments[q] = mode_moments(model, q);
    const std::vector<std::vector<int>> groups = group_by_mode(data, p);

    for (int j = 0; j < data.dims[p]; ++j) {
      Eigen::MatrixXd precision = e_lambda.asDiagonal();
      Eigen::VectorXd lin = Eigen::VectorXd::Zero(l_act);
      for (int o : groups[j]) {
        Eigen::VectorXd mean_prod = Eigen::VectorXd::Ones(l_act);
        Eigen::MatrixXd mom_prod = Eigen::MatrixXd::Ones(l_act, l_act);
        for (int q = 0; q < p_order; ++q) {
          if (q == p) continue;
          const int jq = data.indices(o, q);
          mean_prod = mean_prod.cwiseProduct(model.factor_mean[q].row(jq).transpose());
          mom_prod = mom_prod.cwiseProduct(other_moments[q][jq]);
        }
        precision.noalias() += e_beta * mom_prod;
        lin.noalias() += e_beta * data.values[o] * mean_prod;
      }
      if (l_act == 0) continue;
      Eigen::LLT<Eigen::MatrixXd> llt(precision);
      if (llt.info() != Eigen::Success) {
        precision.diagonal().array() += 1e-10 * precision.trace();
        llt.compute(precision);
        if (llt.info() != Eigen::Success)
          throw NumericalError("cpd row covariance factorization failed");
      }
      model.factor_cov[p][j] = llt.solve(Eigen::MatrixXd::Identity(l_act, l_act));
      model.factor_cov[p][j] =
          0.5 * (model.factor_cov[p][j] + model.factor_cov[p][j].transpose().eval());
      model.factor_mean[p].row(j) = llt.solve(lin).transpose();
    }
  }

  // lambda updates (shared scale across all modes of a column)
  int dim_sum = 0;
  for (int p = 0; p < p_order; ++p) dim_sum += data.dims[p];
  for (int l = 0; l < l_act; ++l) {
    double power = 0.0;
    for (int p = 0; p < p_order; ++p) {
      power += model.factor_mean[p].col(l).squaredNorm();
      for (int j = 0; j < data.dims[p]; ++j) power += model.factor_cov[p][j](l, l);
    }
    model.lambda_shape[l] = opts.a0 + 0.5 * dim_sum;
    model.lambda_rate[l] = opts.b0 + 0.5 * power;
  }

  // beta update, damped over the first sweeps (convex combination of the Gamma
  // parameters, an ascent direction in the natural parameterization)
  const double shape_new = opts.c0 + 0.5 * data.observed();
  const double rate_new = opts.d0 + 0.5 * expected_residual(model, data);
  if (model.sweeps < opts.noise_damp_sweeps) {
    model.beta_shape += opts.noise_damp * (shape_new - model.beta_shape);
    model.beta_rate += opts.noise_damp * (rate_new - model.beta_rate);
  } else {
    model.beta_shape = shape_new;
    model.beta_rate = rate_new;
  }
  model.sweeps += 1;
}

double cpd_elbo(const CpdModel& model, const PartialTensor& data, const CpdOptions& opts) {
  const int p_order = data.order();
  const int l_act = model.active_rank();
  const double e_beta = model.beta_mean();
  const double e_log_beta = gamma_e_log(model.beta_shape, model.beta_rate);
  const Eigen::VectorXd e_lambda = model.lambda_mean();
  Eigen::VectorXd e_log_lambda(l_act);
  for (int l = 0; l < l_act; ++l)
    e_log_lambda[l] = gamma_e_log(model.lambda_shape[l], model.lambda_rate[l]);

  double elbo = 0.0;
  // likelihood
  elbo += 0.5 * data.observed() * (e_log_beta - kLog2Pi) -
          0.5 * e_beta * expected_residual(model, data);
  // factor prior + entropy
  for (int p = 0; p < p_order; ++p) {
    for (int j = 0; j < data.dims[p]; ++j) {
      const auto& cov = model.factor_cov[p][j];
      double quad = 0.0;
      for (int l = 0; l < l_act; ++l)
        quad += e_lambda[l] *
                (model.factor_mean[p](j, l) * model.factor_mean[p](j, l) + cov(l, l));
      elbo += 0.5 * e_log_lambda.sum() - 0.5 * l_act * kLog2Pi - 0.5 * quad;
      if (l_act > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        double logdet;
        if (llt.info() == Eigen::Success) {
          logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
        } else {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
          logdet = es.eigenvalues().cwiseMax(1e-300).array().log().sum();
        }
        elbo += 0.5 * (l_act * (kLog2Pi + 1.0) + logdet);
      }
    }
  }
  // lambda prior + entropy
  for (int l = 0; l < l_act; ++l) {
    elbo += opts.a0 * std::log(opts.b0) - std::lgamma(opts.a0) +
            (opts.a0 - 1.0) * e_log_lambda[l] - opts.b0 * e_lambda[l];
    elbo += gamma_entropy(model.lambda_shape[l], model.lambda_rate[l]);
  }
  // beta prior + entropy
  elbo += opts.c0 * std::log(opts.d0) - std::lgamma(opts.c0) + (opts.c0 - 1.0) * e_log_beta -
          opts.d0 * e_beta;
  elbo += gamma_entropy(model.beta_shape, model.beta_rate);
  return elbo;
}

int cpd_prune(CpdModel& model, const PartialTensor& data, double threshold,
              const CpdOptions& opts) {
  if (!(threshold >= 0.0)) throw DomainError("prune threshold must be nonnegative");
  const int l_act = model.active_rank();
  if (l_act == 0) return 0;
  const int p_order = static_cast<int>(model.factor_mean.size());

  Eigen::VectorXd power = Eigen::VectorXd::Zero(l_act);
  Eigen::VectorXd mean_part = Eigen::VectorXd::Zero(l_act);
  for (int l = 0; l < l_act; ++l) {
    for (int p = 0; p < p_order; ++p) {
      mean_part[l] += model.factor_mean[p].col(l).squaredNorm();
      power[l] += model.factor_mean[p].col(l).squaredNorm();
      for (const auto& cov : model.factor_cov[p]) power[l] += cov(l, l);
    }
  }
  const double mean_power = power.mean();
  std::vector<int> keep;
  for (int l = 0; l < l_act; ++l) {
    const bool weak = power[l] < threshold * mean_power;
    // A column whose posterior mean carries a vanishing share of its power is
    // indistinguishable from an all-zeros column: what remains is the prior
    // floor Sum_p J_p / lambda_l, which never shrinks relative to the live
    // columns. This clause is what retires columns once their means have
    // collapsed, including the all-columns-dead case where the relative rule
    // has no reference.
    const bool zero_like =
        threshold > 0.0 && (power[l] <= 0.0 || mean_part[l] < threshold * power[l]);
    if (!(weak || zero_like)) keep.push_back(l);
  }
  const int removed = l_act - static_cast<int>(keep.size());
  if (removed == 0) return 0;

  for (int p = 0; p < p_order; ++p) {
    model.factor_mean[p] = keep_columns(model.factor_mean[p], keep);
    for (auto& cov : model.factor_cov[p]) cov = keep_rowcols(cov, keep);
  }
  Eigen::VectorXd shape(keep.size()), rate(keep.size());
  std::vector<int> active;
  for (size_t i = 0; i < keep.size(); ++i) {
    shape[static_cast<int>(i)] = model.lambda_shape[keep[i]];
    rate[static_cast<int>(i)] = model.lambda_rate[keep[i]];
    active.push_back(model.active_columns[keep[i]]);
  }
  model.lambda_shape = shape;
  model.lambda_rate = rate;
  model.active_columns = active;
  model.elbo_trace.push_back(cpd_elbo(model, data, opts));
  return removed;
}

CpdModel cpd_fit(const PartialTensor& data, int rank_bound, const CpdOptions& opts) {
  Rng rng(opts.seed);
  CpdModel model = cpd_init(data, rank_bound, rng, opts);
  std::vector<double> sweep_elbo;

  double prev = -std::numeric_limits<double>::infinity();
  bool pruned_last = false;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    cpd_vi_step(model, data, opts);
    const double e = cpd_elbo(model, data, opts);
    sweep_elbo.push_back(e);

    const double rel = std::fabs(e - prev) / (1.0 + std::fabs(e));
    const bool check_prune = (sweep + 1) % opts.prune_every == 0;
    bool pruned_now = false;
    if (check_prune && opts.prune_threshold > 0.0) {
      pruned_now = cpd_prune(model, data, opts.prune_threshold, opts) > 0;
    }
    if (!pruned_now && !pruned_last && rel < opts.tol && sweep > 0) {
      // final cleanup prune before declaring convergence
      if (opts.prune_threshold > 0.0 &&
          cpd_prune(model, data, opts.prune_threshold, opts) > 0) {
        model.prune_sweeps.push_back(sweep + 1);
        pruned_last = true;
        prev = cpd_elbo(model, data, opts);
        continue;
      }
      model.converged = true;
      break;
    }
    if (pruned_now) model.prune_sweeps.push_back(sweep + 1);
    prev = pruned_now ? cpd_elbo(model, data, opts) : e;
    pruned_last = pruned_now;
  }
  model.elbo_trace = sweep_elbo;
  return model;
}

CpdCompletion cpd_complete(const PartialTensor& data, int rank_bound, const CpdOptions& opts) {
  CpdCompletion out;
  out.model = cpd_fit(data, rank_bound, opts);

  const int p_order = data.order();
  const std::int64_t total = data.total_entries();
  out.mean.dims = data.dims;
  out.variance.dims = data.dims;
  out.mean.indices.resize(total, p_order);
  out.variance.indices.resize(total, p_order);
  out.mean.values.resize(total);
  out.variance.values.resize(total);

  const double noise_var = 1.0 / out.model.beta_mean();
  Eigen::VectorXi index = Eigen::VectorXi::Zero(p_order);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    for (int p = 0; p < p_order; ++p) {
      out.mean.indices(flat, p) = index[p];
      out.variance.indices(flat, p) = index[p];
    }
    out.mean.values[flat] = out.model.reconstruct(index);
    out.variance.values[flat] = out.model.reconstruct_variance(index) + noise_var;
    // advance the multi-index, last mode fastest
    for (int p = p_order - 1; p >= 0; --p) {
      if (++index[p] < data.dims[p]) break;
      index[p] = 0;
    }
  }
  return out;
}

}  // namespace sbtk
