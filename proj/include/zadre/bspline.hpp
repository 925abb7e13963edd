#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "zadre/errors.hpp"

namespace zadre {

/// P-spline settings shared by every smooth term of a fit. The defaults are
/// the production configuration: cubic basis, 20 interior knots over the
/// training range, second-order difference penalty with weight 1000.
/// lambda = 0 is allowed and means an unpenalized fit.
struct SplineBasisSpec {
  int degree = 3;
  int interior_knots = 20;
  int penalty_order = 2;
  double lambda = 1000.0;

  int basis_size() const { return interior_knots + degree + 1; }

  void validate() const {
    if (degree < 0 || degree > 10) {
      throw ConfigError("SplineBasisSpec: degree must be in [0, 10]");
    }
    if (interior_knots < 1 || interior_knots > 10000) {
      throw ConfigError("SplineBasisSpec: interior_knots must be in [1, 10000]");
    }
    if (penalty_order < 1 || penalty_order >= basis_size()) {
      throw ConfigError("SplineBasisSpec: penalty_order must be in [1, basis size)");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("SplineBasisSpec: lambda must be finite and >= 0");
    }
  }
};

/// Clamped B-spline basis over one predictor's training range [lo, hi].
/// Inputs outside the range are clamped, never extrapolated.
class SplineBasis1D {
 public:
  SplineBasis1D(const SplineBasisSpec& spec, double lo, double hi)
      : degree_(spec.degree), lo_(lo), hi_(hi) {
    spec.validate();
    if (!(std::isfinite(lo) && std::isfinite(hi)) || lo > hi) {
      throw DomainError("SplineBasis1D: invalid range");
    }
    if (hi_ - lo_ < 1e-12) hi_ = lo_ + 1.0;  // constant predictor
    const int k = spec.interior_knots;
    knots_.reserve(static_cast<std::size_t>(k) + 2 * (degree_ + 1));
    for (int i = 0; i <= degree_; ++i) knots_.push_back(lo_);
    for (int i = 1; i <= k; ++i) {
      knots_.push_back(lo_ + (hi_ - lo_) * i / (k + 1));
    }
    for (int i = 0; i <= degree_; ++i) knots_.push_back(hi_);
    size_ = k + degree_ + 1;
  }

  int size() const { return size_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  /// Evaluate the degree+1 basis functions that are nonzero at x (after
  /// clamping) into out[0..degree]; returns the index of the first one.
  /// Uses the local de Boor recursion, so no 0/0 cases arise.
  int evaluate(double x, double* out) const {
    x = std::clamp(x, lo_, hi_);
    // Knot span index j with t_j <= x < t_{j+1}; x = hi lands in the last
    // nonempty interval.
    int j = degree_;
    const int last = size_ - 1;
    while (j < last && x >= knots_[j + 1]) ++j;

    double left[11], right[11];
    out[0] = 1.0;
    for (int r = 1; r <= degree_; ++r) {
      left[r] = x - knots_[j + 1 - r];
      right[r] = knots_[j + r] - x;
      double saved = 0.0;
      for (int k = 0; k < r; ++k) {
        const double temp = out[k] / (right[k + 1] + left[r - k]);
        out[k] = saved + right[k + 1] * temp;
        saved = left[r - k] * temp;
      }
      out[r] = saved;
    }
    return j - degree_;
  }

  /// Full-length basis row; zero outside the active window.
  Eigen::VectorXd evaluate_dense(double x) const {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(size_);
    double window[11];
    const int first = evaluate(x, window);
    for (int k = 0; k <= degree_; ++k) row[first + k] = window[k];
    return row;
  }

 private:
  int degree_;
  double lo_, hi_;
  std::vector<double> knots_;
  int size_ = 0;
};

/// Difference penalty matrix D'D for k coefficients, where D is the
/// order-th difference operator. Positive semidefinite; polynomials of
/// degree < order lie in its null space.
inline Eigen::MatrixXd difference_penalty(int k, int order) {
  if (k <= order) throw ShapeError("difference_penalty: need k > order");
  if (order < 1) throw ShapeError("difference_penalty: order must be >= 1");
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(k, k);
  for (int r = 0; r < order; ++r) {
    const int m = static_cast<int>(d.rows());
    Eigen::MatrixXd next(m - 1, k);
    for (int i = 0; i + 1 < m; ++i) {
      next.row(i) = d.row(i) - d.row(i + 1);
    }
    d = std::move(next);
  }
  return d.transpose() * d;
}

}  // namespace zadre
