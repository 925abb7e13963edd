#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zadre/bspline.hpp"
#include "zadre/dataset.hpp"
#include "zadre/distributions.hpp"
#include "zadre/errors.hpp"
#include "zadre/mle.hpp"

namespace zadre {

enum class GamlssMode { linear, splines };

inline std::string to_string(GamlssMode m) {
  return m == GamlssMode::linear ? "linear" : "splines";
}

inline GamlssMode gamlss_mode_from_string(std::string_view s) {
  if (s == "linear") return GamlssMode::linear;
  if (s == "splines") return GamlssMode::splines;
  throw ConfigError("unknown gamlss mode: " + std::string(s));
}

struct FitControls {
  int max_outer = 200;
  double tol = 1e-8;
  int max_step_halvings = 20;
  double ridge = 1e-8;

  void validate() const {
    if (max_outer < 1 || max_step_halvings < 0 || !(tol > 0.0) || !(ridge >= 0.0)) {
      throw ConfigError("FitControls: max_outer >= 1, tol > 0, halvings >= 0, ridge >= 0");
    }
  }
};

/// Objective value after each outer cycle (index 0 is the initial value).
/// Step-halving makes this sequence non-decreasing by construction.
struct FitTrace {
  std::vector<double> objective;
  bool converged = false;
  int outer_iterations = 0;
};

struct Standardization {
  std::array<double, n_predictors> mean{};
  std::array<double, n_predictors> sd{};
};

inline Standardization compute_standardization(const Dataset& d) {
  if (d.empty()) throw SizeError("compute_standardization: empty dataset");
  Standardization st;
  const double n = static_cast<double>(d.size());
  for (std::size_t j = 0; j < n_predictors; ++j) {
    double m = 0.0;
    for (double v : d.predictor_column(j)) m += v;
    m /= n;
    double ss = 0.0;
    for (double v : d.predictor_column(j)) ss += (v - m) * (v - m);
    st.mean[j] = m;
    const double sd = std::sqrt(ss / n);
    st.sd[j] = sd > 1e-12 ? sd : 1.0;  // constant column: z is exactly 0
  }
  return st;
}

/// Row-sparse design matrix with a fixed number of nonzeros per row.
/// Linear mode rows are [1, z_1..z_9]; spline rows are the intercept plus
/// one (degree+1)-wide B-spline window per predictor block.
class SparseDesign {
 public:
  SparseDesign(int rows, int cols, int nnz_per_row)
      : rows_(rows),
        cols_(cols),
        nnz_(nnz_per_row),
        idx_(static_cast<std::size_t>(rows) * nnz_per_row, 0),
        val_(static_cast<std::size_t>(rows) * nnz_per_row, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nnz_per_row() const { return nnz_; }

  int* row_indices(int i) { return idx_.data() + static_cast<std::size_t>(i) * nnz_; }
  double* row_values(int i) { return val_.data() + static_cast<std::size_t>(i) * nnz_; }
  const int* row_indices(int i) const {
    return idx_.data() + static_cast<std::size_t>(i) * nnz_;
  }
  const double* row_values(int i) const {
    return val_.data() + static_cast<std::size_t>(i) * nnz_;
  }

  double dot(int i, const Eigen::VectorXd& beta) const {
    const int* ix = row_indices(i);
    const double* v = row_values(i);
    double s = 0.0;
    for (int k = 0; k < nnz_; ++k) s += v[k] * beta[ix[k]];
    return s;
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd out(rows_);
    for (int i = 0; i < rows_; ++i) out[i] = dot(i, beta);
    return out;
  }

  void add_scaled_row(int i, double s, Eigen::VectorXd& out) const {
    const int* ix = row_indices(i);
    const double* v = row_values(i);
    for (int k = 0; k < nnz_; ++k) out[ix[k]] += s * v[k];
  }

  /// H += w * x_i x_i', upper triangle only (row indices are ascending).
  void rank_update_upper(int i, double w, Eigen::MatrixXd& h) const {
    const int* ix = row_indices(i);
    const double* v = row_values(i);
    for (int k = 0; k < nnz_; ++k) {
      const double wk = w * v[k];
      for (int l = k; l < nnz_; ++l) h(ix[k], ix[l]) += wk * v[l];
    }
  }

 private:
  int rows_, cols_, nnz_;
  std::vector<int> idx_;
  std::vector<double> val_;
};

namespace gamlss_detail {

/// Score u and Fisher weight w of one observation for one distribution
/// parameter, both on the linked scale (log mu, log sigma, logit nu).
/// Zero observations inform only nu.
inline void scores(Family f, double y, double mu, double sigma, double nu,
                   int param, double& u, double& w) {
  if (param == 2) {
    u = (y == 0.0 ? 1.0 : 0.0) - nu;
    w = nu * (1.0 - nu);
    return;
  }
  if (y == 0.0) {
    u = 0.0;
    w = 0.0;
    return;
  }
  const double s2 = sigma * sigma;
  if (param == 0) {
    if (f == Family::zaig) {
      u = (y - mu) / (s2 * mu * mu);
      w = 1.0 / (s2 * mu);
    } else {
      u = (y - mu) / (s2 * mu);
      w = 1.0 / s2;
    }
    return;
  }
  if (f == Family::zaig) {
    const double t = (y - mu) * (y - mu) / (mu * mu * s2 * y);
    u = t - 1.0;
    w = 2.0;
  } else {
    const double a = 1.0 / s2;
    u = 2.0 * a * (y / mu - std::log(y) + std::log(s2 * mu) + digamma(a) - 1.0);
    w = 4.0 * a * a * (trigamma(a) - 1.0 / a);
  }
}

/// One penalized-likelihood fitting problem. weights empty means all ones;
/// penalty null means unpenalized. The same design serves all three
/// distribution parameters.
struct Problem {
  const SparseDesign* design = nullptr;
  std::span<const double> y;
  std::span<const double> weights;
  Family family = Family::zaga;
  const Eigen::MatrixXd* penalty = nullptr;

  double weight(int i) const {
    return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
  }
};

struct Coefficients {
  Eigen::VectorXd beta[3];  // mu, sigma, nu
};

inline ZeroAdjustedParams params_from_etas(double eta_mu, double eta_sigma,
                                           double eta_nu) {
  return safeguard_params(std::exp(eta_mu), std::exp(eta_sigma),
                          inv_logit(eta_nu));
}

inline double penalty_term(const Problem& pr, const Coefficients& c) {
  if (pr.penalty == nullptr) return 0.0;
  double t = 0.0;
  for (int k = 0; k < 3; ++k) {
    t += 0.5 * c.beta[k].dot(*pr.penalty * c.beta[k]);
  }
  return t;
}

inline double objective_from_etas(const Problem& pr, const Eigen::VectorXd& eta_mu,
                                  const Eigen::VectorXd& eta_sigma,
                                  const Eigen::VectorXd& eta_nu,
                                  const Coefficients& c) {
  double ll = 0.0;
  const int n = pr.design->rows();
  for (int i = 0; i < n; ++i) {
    const double omega = pr.weight(i);
    if (omega == 0.0) continue;
    const auto params = params_from_etas(eta_mu[i], eta_sigma[i], eta_nu[i]);
    ll += omega * log_density(pr.family, pr.y[static_cast<std::size_t>(i)], params);
  }
  const double obj = ll - penalty_term(pr, c);
  if (!std::isfinite(obj)) throw FitError("non-finite objective");
  return obj;
}

/// Penalized objective at the given coefficients (used by tests as an
/// independent entry point; the optimizer tracks etas incrementally).
inline double penalized_objective(const Problem& pr, const Coefficients& c) {
  return objective_from_etas(pr, pr.design->multiply(c.beta[0]),
                             pr.design->multiply(c.beta[1]),
                             pr.design->multiply(c.beta[2]), c);
}

/// Analytic gradient of the penalized objective for one parameter block.
inline Eigen::VectorXd objective_gradient(const Problem& pr, const Coefficients& c,
                                          int param) {
  const SparseDesign& x = *pr.design;
  const Eigen::VectorXd eta_mu = x.multiply(c.beta[0]);
  const Eigen::VectorXd eta_sigma = x.multiply(c.beta[1]);
  const Eigen::VectorXd eta_nu = x.multiply(c.beta[2]);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    const double omega = pr.weight(i);
    if (omega == 0.0) continue;
    const auto params = params_from_etas(eta_mu[i], eta_sigma[i], eta_nu[i]);
    double u, w;
    scores(pr.family, pr.y[static_cast<std::size_t>(i)], params.mu, params.sigma,
           params.nu, param, u, w);
    x.add_scaled_row(i, omega * u, g);
  }
  if (pr.penalty != nullptr) g -= *pr.penalty * c.beta[param];
  return g;
}

/// Cyclic per-parameter Newton ascent with step halving. Updates c in place
/// and returns the objective trace; the trace is non-decreasing because a
/// step is only accepted when it strictly improves the objective.
inline FitTrace fit(const Problem& pr, Coefficients& c, const FitControls& ctl) {
  ctl.validate();
  const SparseDesign& x = *pr.design;
  const int n = x.rows();
  const int p = x.cols();

  Eigen::VectorXd eta[3];
  for (int k = 0; k < 3; ++k) eta[k] = x.multiply(c.beta[k]);
  double obj = objective_from_etas(pr, eta[0], eta[1], eta[2], c);

  FitTrace trace;
  trace.objective.push_back(obj);

  Eigen::MatrixXd h(p, p);
  Eigen::VectorXd g(p);
  for (int outer = 0; outer < ctl.max_outer; ++outer) {
    const double prev = obj;
    for (int param = 0; param < 3; ++param) {
      h.setZero();
      g.setZero();
      for (int i = 0; i < n; ++i) {
        const double omega = pr.weight(i);
        if (omega == 0.0) continue;
        const auto params = params_from_etas(eta[0][i], eta[1][i], eta[2][i]);
        double u, w;
        scores(pr.family, pr.y[static_cast<std::size_t>(i)], params.mu,
               params.sigma, params.nu, param, u, w);
        x.add_scaled_row(i, omega * u, g);
        if (w > 0.0) x.rank_update_upper(i, omega * w, h);
      }
      if (pr.penalty != nullptr) {
        g -= *pr.penalty * c.beta[param];
        h += *pr.penalty;
      }
      h.diagonal().array() += ctl.ridge;
      h = h.selfadjointView<Eigen::Upper>();

      const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() != Eigen::Success) {
        throw FitError("singular per-parameter Hessian");
      }
      const Eigen::VectorXd delta = ldlt.solve(g);
      if (!delta.allFinite()) {
        throw FitError("singular per-parameter Hessian");
      }
      const Eigen::VectorXd xdelta = x.multiply(delta);

      double t = 1.0;
      for (int half = 0; half <= ctl.max_step_halvings; ++half) {
        Coefficients cand = c;
        cand.beta[param] += t * delta;
        const Eigen::VectorXd cand_eta = eta[param] + t * xdelta;
        const double cand_obj = objective_from_etas(
            pr, param == 0 ? cand_eta : eta[0], param == 1 ? cand_eta : eta[1],
            param == 2 ? cand_eta : eta[2], cand);
        if (cand_obj > obj) {
          c.beta[param] = cand.beta[param];
          eta[param] = cand_eta;
          obj = cand_obj;
          break;
        }
        t *= 0.5;
      }
      // No improving step length: leave this parameter unchanged.
    }
    trace.objective.push_back(obj);
    trace.outer_iterations = outer + 1;
    if (obj - prev < ctl.tol) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

}  // namespace gamlss_detail

/// A fitted GAMLSS model: linear or spline design, one coefficient block per
/// distribution parameter. Immutable after fitting; prediction standardizes
/// with the stored training statistics and clamps spline inputs into the
/// stored training ranges.
struct GamlssModel {
  Family family = Family::zaga;
  GamlssMode mode = GamlssMode::linear;
  SplineBasisSpec basis_spec;
  Standardization standardization;
  std::array<double, n_predictors> range_lo{};
  std::array<double, n_predictors> range_hi{};
  Eigen::VectorXd beta_mu, beta_sigma, beta_nu;
  FitTrace trace;
  std::vector<SplineBasis1D> bases;  // rebuilt from spec+ranges when loading

  int n_coefficients() const {
    return mode == GamlssMode::linear
               ? 1 + static_cast<int>(n_predictors)
               : 1 + static_cast<int>(n_predictors) * basis_spec.basis_size();
  }

  void rebuild_bases() {
    bases.clear();
    if (mode != GamlssMode::splines) return;
    bases.reserve(n_predictors);
    for (std::size_t j = 0; j < n_predictors; ++j) {
      bases.emplace_back(basis_spec, range_lo[j], range_hi[j]);
    }
  }
};

namespace gamlss_detail {

inline void fill_design_row(const GamlssModel& m,
                            const std::array<double, n_predictors>& z, int* idx,
                            double* val) {
  idx[0] = 0;
  val[0] = 1.0;
  if (m.mode == GamlssMode::linear) {
    for (std::size_t j = 0; j < n_predictors; ++j) {
      idx[j + 1] = static_cast<int>(j) + 1;
      val[j + 1] = z[j];
    }
    return;
  }
  const int b = m.basis_spec.basis_size();
  const int width = m.basis_spec.degree + 1;
  int k = 1;
  double window[11];
  for (std::size_t j = 0; j < n_predictors; ++j) {
    const int first = m.bases[j].evaluate(z[j], window);
    const int offset = 1 + static_cast<int>(j) * b + first;
    for (int t = 0; t < width; ++t) {
      idx[k] = offset + t;
      val[k] = window[t];
      ++k;
    }
  }
}

inline std::array<double, n_predictors> standardize_row(
    const Standardization& st, std::span<const double> x) {
  std::array<double, n_predictors> z;
  for (std::size_t j = 0; j < n_predictors; ++j) {
    z[j] = (x[j] - st.mean[j]) / st.sd[j];
  }
  return z;
}

inline SparseDesign build_design(const GamlssModel& m, const Dataset& d) {
  const int nnz = m.mode == GamlssMode::linear
                      ? 1 + static_cast<int>(n_predictors)
                      : 1 + static_cast<int>(n_predictors) * (m.basis_spec.degree + 1);
  SparseDesign design(static_cast<int>(d.size()), m.n_coefficients(), nnz);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto z = standardize_row(m.standardization, d.predictor_row(i));
    fill_design_row(m, z, design.row_indices(static_cast<int>(i)),
                    design.row_values(static_cast<int>(i)));
  }
  return design;
}

inline Eigen::MatrixXd build_penalty(const GamlssModel& m) {
  const int p = m.n_coefficients();
  Eigen::MatrixXd penalty = Eigen::MatrixXd::Zero(p, p);
  if (m.mode != GamlssMode::splines || m.basis_spec.lambda == 0.0) return penalty;
  const int b = m.basis_spec.basis_size();
  const Eigen::MatrixXd block =
      m.basis_spec.lambda * difference_penalty(b, m.basis_spec.penalty_order);
  for (std::size_t j = 0; j < n_predictors; ++j) {
    const int offset = 1 + static_cast<int>(j) * b;
    penalty.block(offset, offset, b, b) = block;
  }
  return penalty;
}

}  // namespace gamlss_detail

/// Fit a GAMLSS model by penalized maximum likelihood (cyclic per-parameter
/// Newton with step halving; spline mode adds the difference penalty with
/// the spec's lambda to every smooth of every parameter).
inline GamlssModel fit_gamlss(const Dataset& d, Family family, GamlssMode mode,
                              const SplineBasisSpec& spec = {},
                              const FitControls& controls = {}) {
  controls.validate();
  if (mode == GamlssMode::splines) spec.validate();
  if (d.empty()) throw SizeError("fit_gamlss: empty dataset");

  GamlssModel m;
  m.family = family;
  m.mode = mode;
  m.basis_spec = spec;
  m.standardization = compute_standardization(d);

  if (mode == GamlssMode::splines) {
    for (std::size_t j = 0; j < n_predictors; ++j) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (double v : d.predictor_column(j)) {
        const double z = (v - m.standardization.mean[j]) / m.standardization.sd[j];
        lo = std::min(lo, z);
        hi = std::max(hi, z);
      }
      m.range_lo[j] = lo;
      m.range_hi[j] = hi;
    }
    m.rebuild_bases();
  }

  const int p = m.n_coefficients();
  if (d.size() < static_cast<std::size_t>(p)) {
    throw SizeError("fit_gamlss: need at least as many samples as coefficients");
  }

  const SparseDesign design = gamlss_detail::build_design(m, d);
  const Eigen::MatrixXd penalty = gamlss_detail::build_penalty(m);

  // Initialize intercepts at the marginal family MLE, everything else at 0.
  WeightedStats stats;
  for (double y : d.targets()) stats.add(y, 1.0);
  const auto init = stats_mle(family, stats).params;

  gamlss_detail::Coefficients c;
  for (int k = 0; k < 3; ++k) c.beta[k] = Eigen::VectorXd::Zero(p);
  c.beta[0][0] = std::log(init.mu);
  c.beta[1][0] = std::log(init.sigma);
  c.beta[2][0] = logit(init.nu);

  gamlss_detail::Problem pr;
  pr.design = &design;
  pr.y = d.targets();
  pr.family = family;
  pr.penalty = &penalty;

  m.trace = gamlss_detail::fit(pr, c, controls);
  m.beta_mu = c.beta[0];
  m.beta_sigma = c.beta[1];
  m.beta_nu = c.beta[2];
  return m;
}

/// Parameters at one predictor row: standardize, evaluate the design row,
/// apply inverse links and safeguards.
inline ZeroAdjustedParams predict_params(const GamlssModel& m,
                                         std::span<const double> x) {
  if (x.size() != n_predictors) {
    throw ShapeError("predict_params: expected 9 predictors");
  }
  const auto z = gamlss_detail::standardize_row(m.standardization, x);
  const int nnz = m.mode == GamlssMode::linear
                      ? 1 + static_cast<int>(n_predictors)
                      : 1 + static_cast<int>(n_predictors) * (m.basis_spec.degree + 1);
  int idx[1 + n_predictors * 11];
  double val[1 + n_predictors * 11];
  gamlss_detail::fill_design_row(m, z, idx, val);

  double eta[3] = {0.0, 0.0, 0.0};
  const Eigen::VectorXd* betas[3] = {&m.beta_mu, &m.beta_sigma, &m.beta_nu};
  for (int k = 0; k < 3; ++k) {
    for (int t = 0; t < nnz; ++t) eta[k] += val[t] * (*betas[k])[idx[t]];
  }
  return gamlss_detail::params_from_etas(eta[0], eta[1], eta[2]);
}

inline ZeroAdjustedParams predict_params(const GamlssModel& m,
                                         const std::array<double, n_predictors>& x) {
  return predict_params(m, std::span<const double>(x.data(), x.size()));
}

}  // namespace zadre
