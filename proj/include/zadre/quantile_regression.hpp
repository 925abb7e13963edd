#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "zadre/errors.hpp"

namespace zadre {

struct QrOptions {
  bool include_intercept = true;
  // 0 scales the cap with the instance size.
  long max_iterations = 0;
};

struct QuantileRegModel {
  double tau = 0.5;
  double intercept = 0.0;
  std::vector<double> coefficients;
};

namespace qr_detail {

// Greedy lowest-index selection of a maximal linearly independent column
// subset via twice-reorthogonalized Gram-Schmidt. Dropped columns keep
// coefficient zero, which is the deterministic tie-break for duplicate or
// intercept-duplicating columns.
inline std::vector<int> independent_columns(const Eigen::MatrixXd& a, double tol) {
  const Eigen::Index max_rank = std::min(a.rows(), a.cols());
  Eigen::MatrixXd q(a.rows(), max_rank);
  std::vector<int> kept;
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < a.cols() && r < max_rank; ++j) {
    Eigen::VectorXd c = a.col(j);
    const double norm0 = c.norm();
    if (!(norm0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (r > 0) c -= q.leftCols(r) * (q.leftCols(r).transpose() * c);
    }
    const double norm1 = c.norm();
    if (norm1 > tol * norm0) {
      q.col(r) = c / norm1;
      ++r;
      kept.push_back(static_cast<int>(j));
    }
  }
  return kept;
}

// Greedy lowest-index linearly independent row subset of size m = cols(a);
// exists because the columns of a are independent.
inline std::vector<int> initial_basis(const Eigen::MatrixXd& a, double tol) {
  const Eigen::Index m = a.cols();
  Eigen::MatrixXd q(m, m);
  std::vector<int> basis;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < a.rows() && r < m; ++i) {
    Eigen::VectorXd c = a.row(i).transpose();
    const double norm0 = c.norm();
    if (!(norm0 > 0.0)) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (r > 0) c -= q.leftCols(r) * (q.leftCols(r).transpose() * c);
    }
    const double norm1 = c.norm();
    if (norm1 > tol * norm0) {
      q.col(r) = c / norm1;
      ++r;
      basis.push_back(static_cast<int>(i));
    }
  }
  if (r < m) throw NumericError("fit_qr: no independent starting basis");
  return basis;
}

}  // namespace qr_detail

/// Exact pinball-loss minimization by a vertex-exchange simplex on the
/// residual-splitting linear program: the optimum interpolates m linearly
/// independent rows (m = retained columns incl. intercept), and the method
/// walks such vertices along edge directions of strictly decreasing loss
/// until every edge has a nonnegative directional derivative.
inline QuantileRegModel fit_qr(const Eigen::MatrixXd& x, std::span<const double> y,
                               double tau, const QrOptions& options = {}) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("fit_qr: tau must be in (0,1)");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<Eigen::Index>(y.size()) != n)
    throw ShapeError("fit_qr: rows(x) must equal |y|");
  if (n < p + 1) throw SizeError("fit_qr: need at least columns+1 rows");
  if (!x.allFinite()) throw DomainError("fit_qr: non-finite predictor entry");
  for (const double v : y) {
    if (!std::isfinite(v)) throw DomainError("fit_qr: non-finite observation");
  }

  const int c0 = options.include_intercept ? 1 : 0;
  Eigen::MatrixXd a_full(n, c0 + p);
  if (c0 == 1) a_full.col(0).setOnes();
  a_full.rightCols(p) = x;

  const std::vector<int> kept = qr_detail::independent_columns(a_full, 1e-10);
  const int m = static_cast<int>(kept.size());
  QuantileRegModel model;
  model.tau = tau;
  model.coefficients.assign(static_cast<std::size_t>(p), 0.0);
  if (m == 0) return model;

  Eigen::MatrixXd a(n, m);
  for (int j = 0; j < m; ++j) a.col(j) = a_full.col(kept[j]);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[i];

  double y_scale = 1.0;
  for (const double v : y) y_scale = std::max(y_scale, std::abs(v));
  const double r_tol = 1e-9 * y_scale;

  std::vector<int> basis = qr_detail::initial_basis(a, 1e-10);
  std::vector<char> is_basic(static_cast<std::size_t>(n), 0);
  for (const int i : basis) is_basic[i] = 1;

  Eigen::MatrixXd ab(m, m);
  Eigen::VectorXd yb(m);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::VectorXd beta(m), r(n), v(n), best_v(n);

  const long cap = options.max_iterations > 0 ? options.max_iterations : 50 * n + 1000;
  for (long iter = 0;; ++iter) {
    if (iter >= cap) throw NumericError("fit_qr: exchange iteration cap reached");
    for (int j = 0; j < m; ++j) {
      ab.row(j) = a.row(basis[j]);
      yb[j] = yv[basis[j]];
    }
    lu.compute(ab);
    beta = lu.solve(yb);
    r = yv - a * beta;
    const Eigen::MatrixXd inv = lu.inverse();

    // Scan the 2m edge directions that free one basic row while pinning the
    // rest; the first most-negative derivative wins (lowest basis slot, +
    // before -), which makes the walk deterministic.
    int best_j = -1;
    double best_s = 1.0;
    double best_g = 0.0;
    for (int j = 0; j < m; ++j) {
      for (const double s : {1.0, -1.0}) {
        v = s * (a * inv.col(j));
        double g = s > 0 ? 1.0 - tau : tau;
        double v_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (is_basic[i]) continue;
          v_sum += std::abs(v[i]);
          if (r[i] > r_tol)
            g -= tau * v[i];
          else if (r[i] < -r_tol)
            g += (1.0 - tau) * v[i];
          else
            g += std::max((1.0 - tau) * v[i], -tau * v[i]);
        }
        if (g < -1e-10 * (1.0 + v_sum) && g < best_g) {
          best_g = g;
          best_j = j;
          best_s = s;
          best_v = v;
        }
      }
    }
    if (best_j < 0) break;

    // Piecewise-linear line search: residual i crosses zero at t = r_i/v_i,
    // where the loss slope increases by |v_i|. The entering row is the
    // breakpoint at which the slope turns nonnegative.
    std::vector<std::pair<double, Eigen::Index>> crossings;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (is_basic[i]) continue;
      if ((r[i] > r_tol && best_v[i] > 0.0) || (r[i] < -r_tol && best_v[i] < 0.0))
        crossings.emplace_back(r[i] / best_v[i], i);
    }
    std::sort(crossings.begin(), crossings.end());
    double slope = best_g;
    Eigen::Index entering = -1;
    for (const auto& [t, i] : crossings) {
      slope += std::abs(best_v[i]);
      if (slope >= 0.0) {
        entering = i;
        break;
      }
    }
    if (entering < 0) throw NumericError("fit_qr: descent direction is unbounded");

    is_basic[basis[best_j]] = 0;
    is_basic[entering] = 1;
    basis[best_j] = static_cast<int>(entering);
  }

  for (int j = 0; j < m; ++j) {
    if (!std::isfinite(beta[j])) throw NumericError("fit_qr: non-finite solution");
    if (kept[j] == 0 && c0 == 1)
      model.intercept = beta[j];
    else
      model.coefficients[static_cast<std::size_t>(kept[j] - c0)] = beta[j];
  }
  return model;
}

inline double qr_predict(const QuantileRegModel& m, std::span<const double> x) {
  if (x.size() != m.coefficients.size())
    throw ShapeError("qr_predict: column count mismatch");
  double z = m.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) z += m.coefficients[j] * x[j];
  return std::max(z, 0.0);
}

}  // namespace zadre
