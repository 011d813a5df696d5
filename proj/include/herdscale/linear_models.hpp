#pragma once

// Linear-family solvers and KNN. All work on standardized features with a
// centered target; the intercept is never penalized.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "herdscale/model_spec.hpp"

namespace herdscale {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Per-feature mean/std captured at fit time; zero std is stored as 1.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& X) {
    Standardizer s;
    const auto n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean().transpose();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean[j]).square().sum() / n;
      const double sd = std::sqrt(var);
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& X) const {
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }
};

struct LinearParams {
  Vector coef;  // in standardized feature space
  double intercept = 0.0;
  int iterations = 0;
};

inline Vector solve_least_squares(const Matrix& A, const Vector& b) {
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(A).solve(b);
}

/// Minimum-norm least squares; rank deficiency is handled by the pseudo-inverse.
inline LinearParams fit_ols(const Matrix& Xs, const Vector& y) {
  const double ybar = y.mean();
  LinearParams p;
  p.coef = solve_least_squares(Xs, (y.array() - ybar).matrix());
  p.intercept = ybar;
  return p;
}

inline LinearParams fit_ridge(const Matrix& Xs, const Vector& y, double alpha) {
  const double ybar = y.mean();
  const Vector yc = (y.array() - ybar).matrix();
  Matrix gram = Xs.transpose() * Xs;
  gram.diagonal().array() += alpha;
  LinearParams p;
  if (alpha > 0.0) {
    p.coef = gram.ldlt().solve(Xs.transpose() * yc);
  } else {
    p.coef = solve_least_squares(Xs, yc);
  }
  p.intercept = ybar;
  return p;
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

/// Cyclic coordinate descent on
///   (1/2n)||yc - Xs b||^2 + alpha*l1_ratio*|b|_1 + alpha*(1-l1_ratio)/2*|b|^2.
inline LinearParams fit_elastic_net(const Matrix& Xs, const Vector& y, double alpha, double l1_ratio, double tol,
                                    int max_sweeps) {
  const auto n = static_cast<double>(Xs.rows());
  const Eigen::Index d = Xs.cols();
  const double ybar = y.mean();
  Vector residual = (y.array() - ybar).matrix();
  Vector coef = Vector::Zero(d);
  Vector col_sq(d);
  for (Eigen::Index j = 0; j < d; ++j) col_sq[j] = Xs.col(j).squaredNorm() / n;
  const double l1 = alpha * l1_ratio;
  const double l2 = alpha * (1.0 - l1_ratio);

  LinearParams p;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double denom = col_sq[j] + l2;
      const double old = coef[j];
      double updated = 0.0;
      if (denom > 0.0) {
        const double rho = Xs.col(j).dot(residual) / n + col_sq[j] * old;
        updated = soft_threshold(rho, l1) / denom;
      }
      if (updated != old) {
        residual.noalias() -= (updated - old) * Xs.col(j);
        coef[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    p.iterations = sweep + 1;
    if (max_change < tol) break;
  }
  p.coef = coef;
  p.intercept = ybar;
  return p;
}

inline double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

/// Huber regression by IRLS. Residuals are standardized by a MAD scale
/// re-estimated each iteration; weight is 1 inside delta and delta/|u| outside.
inline LinearParams fit_huber(const Matrix& Xs, const Vector& y, double delta, int max_iter) {
  const Eigen::Index n = Xs.rows();
  const Eigen::Index d = Xs.cols();
  Matrix A(n, d + 1);
  A.col(0).setOnes();
  A.rightCols(d) = Xs;
  Vector beta = solve_least_squares(A, y);
  LinearParams p;
  for (int it = 0; it < max_iter; ++it) {
    p.iterations = it + 1;
    const Vector r = y - A * beta;
    std::vector<double> rv(r.data(), r.data() + n);
    const double med = median_of(rv);
    for (auto& v : rv) v = std::abs(v - med);
    double scale = 1.4826 * median_of(rv);
    if (!(scale > 0.0)) {
      scale = r.cwiseAbs().mean();
      if (!(scale > 0.0)) break;  // exact fit
    }
    Vector sw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = std::abs(r[i]) / scale;
      sw[i] = std::sqrt(u <= delta ? 1.0 : delta / u);
    }
    const Vector next = solve_least_squares(sw.asDiagonal() * A, sw.asDiagonal() * y);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change <= 1e-10 * (1.0 + beta.cwiseAbs().maxCoeff())) break;
  }
  p.intercept = beta[0];
  p.coef = beta.tail(d);
  return p;
}

inline Vector predict_linear(const LinearParams& p, const Matrix& Xs) {
  return (Xs * p.coef).array() + p.intercept;
}

struct KnnParams {
  Matrix train;  // standardized
  Vector target;
  int k = 5;
};

/// Uniform average of the k nearest training rows; equal distances go to the lower index.
inline Vector predict_knn(const KnnParams& p, const Matrix& Xs) {
  const Eigen::Index n = p.train.rows();
  const auto k = static_cast<Eigen::Index>(std::min<Eigen::Index>(p.k, n));
  Vector out(Xs.rows());
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
  for (Eigen::Index q = 0; q < Xs.rows(); ++q) {
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[static_cast<std::size_t>(i)] = {(p.train.row(i) - Xs.row(q)).squaredNorm(), i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) sum += p.target[dist[static_cast<std::size_t>(i)].second];
    out[q] = sum / static_cast<double>(k);
  }
  return out;
}

}  // namespace herdscale
