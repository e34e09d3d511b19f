#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "data_model.hpp"
#include "error.hpp"
#include "stats.hpp"
#include "variance.hpp"

namespace ppsurvey {

enum class EstimandKind { Mean, Quantile, LinearRegression, LogisticRegression, Custom };

inline std::string to_string(EstimandKind k) {
  switch (k) {
    case EstimandKind::Mean: return "mean";
    case EstimandKind::Quantile: return "quantile";
    case EstimandKind::LinearRegression: return "linear-regression";
    case EstimandKind::LogisticRegression: return "logistic-regression";
    case EstimandKind::Custom: return "custom";
  }
  return "unknown";
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double width() const noexcept { return high - low; }
  bool contains(double v) const noexcept { return low <= v && v <= high; }
};

struct RectifiedEstimate {
  double theta_hat = 0.0;
  double lambda = 0.0;
  double variance = 0.0;
  std::optional<Interval> ci;
  std::size_t n = 0;
  std::size_t big_n = 0;
  EstimandKind estimand = EstimandKind::Mean;
  double q = 0.5;  // quantile level, meaningful for Quantile only
};

/// Scalar score g(theta, covariates, response). Must be monotone in theta
/// for every fixed (covariates, response).
using ScoreFunction = std::function<double(double, const std::vector<std::string>&, double)>;

struct EstimandSpec {
  EstimandKind kind = EstimandKind::Mean;
  double q = 0.5;
  ScoreFunction score;

  static EstimandSpec mean() { return {}; }
  static EstimandSpec quantile(double level) { return {EstimandKind::Quantile, level, {}}; }
  static EstimandSpec custom(ScoreFunction g) { return {EstimandKind::Custom, 0.5, std::move(g)}; }
};

namespace detail {

inline void check_lambda(double lambda, const char* component) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw Error(ErrorCode::InvalidArgument, component, "lambda must lie in [0,1], got " + std::to_string(lambda));
}

}  // namespace detail

/// Rectified mean on raw columns:
///   lambda * mean_U(yhat) + mean_H(y) - lambda * mean_H(yhat).
inline RectifiedEstimate rectified_mean(std::span<const double> y, std::span<const double> yhat_h,
                                        std::span<const double> yhat_u, double lambda) {
  detail::check_lambda(lambda, "estimators");
  if (y.size() < 2 || yhat_u.empty()) throw Error(ErrorCode::EmptyFrame, "estimators", "need n >= 2 and N >= 1");
  RectifiedEstimate e;
  e.theta_hat = lambda * stats::mean(yhat_u) + stats::mean(y) - lambda * stats::mean(yhat_h);
  e.lambda = lambda;
  e.variance = analytic_variance(y, yhat_h, yhat_u, lambda);
  e.n = y.size();
  e.big_n = yhat_u.size();
  return e;
}

inline RectifiedEstimate rectified_mean(const LabeledSet& h, const UnlabeledFrame& u, double lambda) {
  require_disjoint(h, u, "estimators");
  return rectified_mean(h.y(), h.yhat(), u.yhat(), lambda);
}

/// Human-only estimator: sample mean of y with variance s_y^2 / n.
inline RectifiedEstimate classical_mean(std::span<const double> y) {
  if (y.size() < 2) throw Error(ErrorCode::EmptyFrame, "estimators", "classical mean needs n >= 2");
  RectifiedEstimate e;
  e.theta_hat = stats::mean(y);
  e.variance = stats::sample_variance(y) / static_cast<double>(y.size());
  e.n = y.size();
  return e;
}

inline RectifiedEstimate classical_mean(const LabeledSet& h) { return classical_mean(h.y()); }

// ---------------------------------------------------------------------------
// Quantiles

namespace detail {

inline double ecdf(std::span<const double> sorted, double t) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

struct QuantileScore {
  std::vector<double> y, yhat_h, yhat_u;  // sorted
  double q;
  double lambda;

  QuantileScore(std::span<const double> y_, std::span<const double> yh_, std::span<const double> yu_, double q_,
                double lambda_)
      : y(y_.begin(), y_.end()), yhat_h(yh_.begin(), yh_.end()), yhat_u(yu_.begin(), yu_.end()), q(q_), lambda(lambda_) {
    std::sort(y.begin(), y.end());
    std::sort(yhat_h.begin(), yhat_h.end());
    std::sort(yhat_u.begin(), yhat_u.end());
  }

  // Combined score with g(theta, v) = q - 1{v <= theta}; nonincreasing for lambda in {0, 1}.
  double operator()(double t) const {
    return lambda * (q - ecdf(yhat_u, t)) + (q - ecdf(y, t)) - lambda * (q - ecdf(yhat_h, t));
  }
};

}  // namespace detail

/// Smallest candidate (observed y or yhat value) at which the combined
/// indicator score reaches zero or below.
inline RectifiedEstimate rectified_quantile(std::span<const double> y, std::span<const double> yhat_h,
                                            std::span<const double> yhat_u, double q, double lambda) {
  detail::check_lambda(lambda, "estimators");
  if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidArgument, "estimators", "quantile level must lie in (0,1)");
  if (y.size() < 2 || yhat_u.empty()) throw Error(ErrorCode::EmptyFrame, "estimators", "need n >= 2 and N >= 1");
  const detail::QuantileScore score(y, yhat_h, yhat_u, q, lambda);

  std::vector<double> candidates;
  candidates.reserve(y.size() * 2 + yhat_u.size());
  candidates.insert(candidates.end(), score.y.begin(), score.y.end());
  if (lambda > 0.0) {
    candidates.insert(candidates.end(), score.yhat_h.begin(), score.yhat_h.end());
    candidates.insert(candidates.end(), score.yhat_u.begin(), score.yhat_u.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  constexpr double tol = 64 * std::numeric_limits<double>::epsilon();
  double theta = candidates.back();
  for (double c : candidates) {
    if (score(c) <= tol) {
      theta = c;
      break;
    }
  }

  RectifiedEstimate e;
  e.theta_hat = theta;
  e.lambda = lambda;
  e.n = y.size();
  e.big_n = yhat_u.size();
  e.estimand = EstimandKind::Quantile;
  e.q = q;

  // Sandwich variance: score variance over squared slope, the slope taken as
  // a central difference of the empirical CDFs at a Silverman bandwidth.
  auto ind = [theta](double v) { return v <= theta ? 1.0 : 0.0; };
  std::vector<double> gu(yhat_u.size()), gh(y.size());
  for (std::size_t i = 0; i < yhat_u.size(); ++i) gu[i] = ind(yhat_u[i]);
  for (std::size_t j = 0; j < y.size(); ++j) gh[j] = ind(y[j]) - lambda * ind(yhat_h[j]);
  const double score_var = lambda * lambda * stats::sample_variance(gu) / static_cast<double>(gu.size()) +
                           stats::sample_variance(gh) / static_cast<double>(gh.size());
  const double sd = std::sqrt(stats::sample_variance(y));
  const double iqr = stats::sorted_percentile(score.y, 0.75) - stats::sorted_percentile(score.y, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = sd > 0.0 ? sd : 1.0;
  const double bw = 0.9 * spread * std::pow(static_cast<double>(y.size()), -0.2);
  const double slope = (score(theta + bw) - score(theta - bw)) / (2.0 * bw);
  e.variance = slope != 0.0 ? score_var / (slope * slope) : std::numeric_limits<double>::infinity();
  return e;
}

inline RectifiedEstimate rectified_quantile(const LabeledSet& h, const UnlabeledFrame& u, double q, double lambda) {
  require_disjoint(h, u, "estimators");
  return rectified_quantile(h.y(), h.yhat(), u.yhat(), q, lambda);
}

// ---------------------------------------------------------------------------
// Generic scalar estimating equation

namespace detail {

struct ScalarProblem {
  const std::vector<std::vector<std::string>>* cov_h = nullptr;
  const std::vector<std::vector<std::string>>* cov_u = nullptr;
  std::span<const double> y, yhat_h, yhat_u;
  double lambda = 1.0;
  ScoreFunction g;

  const std::vector<std::string>& xh(std::size_t j) const {
    static const std::vector<std::string> none;
    return cov_h ? (*cov_h)[j] : none;
  }
  const std::vector<std::string>& xu(std::size_t i) const {
    static const std::vector<std::string> none;
    return cov_u ? (*cov_u)[i] : none;
  }

  double combined(double t) const {
    double su = 0.0, sh = 0.0;
    if (lambda != 0.0) {
      for (std::size_t i = 0; i < yhat_u.size(); ++i) su += g(t, xu(i), yhat_u[i]);
      su /= static_cast<double>(yhat_u.size());
    }
    for (std::size_t j = 0; j < y.size(); ++j) {
      sh += g(t, xh(j), y[j]);
      if (lambda != 0.0) sh -= lambda * g(t, xh(j), yhat_h[j]);
    }
    return lambda * su + sh / static_cast<double>(y.size());
  }
};

// Every observation's score must move in one direction across the grid.
inline void check_monotone(const ScalarProblem& p, double a, double b) {
  constexpr int grid = 17;
  int direction = 0;
  auto check = [&](const std::vector<std::string>& x, double v) {
    double prev = p.g(a, x, v);
    for (int k = 1; k < grid; ++k) {
      const double t = a + (b - a) * k / (grid - 1);
      const double cur = p.g(t, x, v);
      const double tol = 1e-12 * std::max({1.0, std::abs(prev), std::abs(cur)});
      int d = cur > prev + tol ? 1 : (cur < prev - tol ? -1 : 0);
      if (d != 0) {
        if (direction != 0 && d != direction)
          throw Error(ErrorCode::NonMonotoneScore, "estimators", "score is not monotone in theta");
        direction = d;
      }
      prev = cur;
    }
  };
  for (std::size_t j = 0; j < p.y.size(); ++j) {
    check(p.xh(j), p.y[j]);
    if (p.lambda != 0.0) check(p.xh(j), p.yhat_h[j]);
  }
  if (p.lambda != 0.0)
    for (std::size_t i = 0; i < p.yhat_u.size(); ++i) check(p.xu(i), p.yhat_u[i]);
}

inline double solve_scalar(const ScalarProblem& p) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto widen = [&](std::span<const double> v) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  };
  widen(p.y);
  if (p.lambda != 0.0) {
    widen(p.yhat_h);
    widen(p.yhat_u);
  }
  double width = hi - lo;
  if (width <= 0.0) width = std::max(1.0, std::abs(lo));
  double a = lo, b = hi;
  if (a == b) {
    a -= width / 2;
    b += width / 2;
  }
  double sa = p.combined(a), sb = p.combined(b);
  int doublings = 0;
  while ((sa > 0.0) == (sb > 0.0) && sa != 0.0 && sb != 0.0) {
    if (++doublings > 40) throw Error(ErrorCode::NoBracket, "estimators", "no sign change of the score after 40 doublings");
    a -= width;
    b += width;
    width *= 2.0;
    sa = p.combined(a);
    sb = p.combined(b);
  }
  check_monotone(p, a, b);
  if (sa == 0.0) return a;

  // Orient so h is nondecreasing, then find the smallest theta with h >= 0.
  const double sign = sa < sb ? 1.0 : -1.0;
  auto h = [&](double t) { return sign * p.combined(t); };
  double left = a, right = b;  // h(left) < 0 <= h(right)
  for (int it = 0; it < 2200; ++it) {
    const double mid = left + (right - left) / 2.0;
    if (mid <= left || mid >= right) break;
    if (h(mid) >= 0.0)
      right = mid;
    else
      left = mid;
  }
  return right;
}

}  // namespace detail

/// Solves lambda * mean_U g(theta, x, yhat) + mean_H g(theta, x, y)
/// - lambda * mean_H g(theta, x, yhat) = 0 for scalar theta.
inline RectifiedEstimate solve_estimating_equation(const EstimandSpec& spec, std::span<const double> y,
                                                   std::span<const double> yhat_h, std::span<const double> yhat_u,
                                                   double lambda,
                                                   const std::vector<std::vector<std::string>>* cov_h = nullptr,
                                                   const std::vector<std::vector<std::string>>* cov_u = nullptr) {
  detail::check_lambda(lambda, "estimators");
  if (y.size() < 2 || yhat_u.empty()) throw Error(ErrorCode::EmptyFrame, "estimators", "need n >= 2 and N >= 1");
  if (spec.kind == EstimandKind::Quantile) return rectified_quantile(y, yhat_h, yhat_u, spec.q, lambda);
  if (spec.kind == EstimandKind::LinearRegression || spec.kind == EstimandKind::LogisticRegression)
    throw Error(ErrorCode::InvalidArgument, "estimators", "regression estimands have dedicated solvers");

  detail::ScalarProblem p;
  p.cov_h = cov_h;
  p.cov_u = cov_u;
  p.y = y;
  p.yhat_h = yhat_h;
  p.yhat_u = yhat_u;
  p.lambda = lambda;
  if (spec.kind == EstimandKind::Mean)
    p.g = [](double t, const std::vector<std::string>&, double v) { return t - v; };
  else if (spec.score)
    p.g = spec.score;
  else
    throw Error(ErrorCode::InvalidArgument, "estimators", "custom estimand needs a score function");

  RectifiedEstimate e;
  e.theta_hat = detail::solve_scalar(p);
  e.lambda = lambda;
  e.n = y.size();
  e.big_n = yhat_u.size();
  e.estimand = spec.kind;
  if (spec.kind == EstimandKind::Mean) {
    e.variance = analytic_variance(y, yhat_h, yhat_u, lambda);
    return e;
  }
  // Sandwich with a finite-difference slope of the combined score.
  const double t = e.theta_hat;
  std::vector<double> gu(yhat_u.size()), gh(y.size());
  for (std::size_t i = 0; i < gu.size(); ++i) gu[i] = p.g(t, p.xu(i), yhat_u[i]);
  for (std::size_t j = 0; j < gh.size(); ++j) gh[j] = p.g(t, p.xh(j), y[j]) - lambda * p.g(t, p.xh(j), yhat_h[j]);
  const double score_var = lambda * lambda * stats::sample_variance(gu) / static_cast<double>(gu.size()) +
                           stats::sample_variance(gh) / static_cast<double>(gh.size());
  const double step = 1e-6 * std::max(1.0, std::abs(t));
  const double slope = (p.combined(t + step) - p.combined(t - step)) / (2.0 * step);
  e.variance = slope != 0.0 ? score_var / (slope * slope) : std::numeric_limits<double>::infinity();
  return e;
}

inline RectifiedEstimate solve_estimating_equation(const EstimandSpec& spec, const LabeledSet& h,
                                                   const UnlabeledFrame& u, double lambda) {
  require_disjoint(h, u, "estimators");
  std::vector<std::vector<std::string>> ch(h.size()), cu(u.size());
  for (std::size_t j = 0; j < h.size(); ++j) ch[j] = h.covariates(j);
  for (std::size_t i = 0; i < u.size(); ++i) cu[i] = u.covariates(i);
  return solve_estimating_equation(spec, h.y(), h.yhat(), u.yhat(), lambda, &ch, &cu);
}

// ---------------------------------------------------------------------------
// Regression estimands

struct RegressionEstimate {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd variance;  // per coefficient, diagonal of the sandwich
  Eigen::MatrixXd covariance;
  double lambda = 0.0;
  std::size_t n = 0;
  std::size_t big_n = 0;
  EstimandKind estimand = EstimandKind::LinearRegression;
  int iterations = 0;
  double score_norm = 0.0;
};

/// Rows of numeric covariates, with a leading column of ones when requested.
inline Eigen::MatrixXd design_matrix(const detail::FrameCore& frame, const std::vector<std::string>& columns,
                                     bool intercept = true) {
  const auto k = static_cast<Eigen::Index>(columns.size() + (intercept ? 1 : 0));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(frame.size()), k);
  Eigen::Index c = 0;
  if (intercept) x.col(c++).setOnes();
  for (const auto& name : columns) {
    auto v = frame.numeric_covariate(name);
    x.col(c++) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return x;
}

namespace detail {

inline Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

inline void check_conditioning(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double smax = s(0), smin = s(s.size() - 1);
  if (!(smin > 0.0) || smax / smin >= 1e12)
    throw Error(ErrorCode::SingularDesign, "estimators", "design second-moment matrix is singular or ill-conditioned");
}

inline Eigen::MatrixXd covariance_of_rows(const Eigen::MatrixXd& rows) {
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

// Sandwich J^-1 M J^-1 with M from per-observation score contributions.
inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& scores_u,
                                const Eigen::MatrixXd& scores_h, double lambda) {
  Eigen::MatrixXd meat = covariance_of_rows(scores_h) / static_cast<double>(scores_h.rows());
  if (lambda != 0.0) meat += lambda * lambda * covariance_of_rows(scores_u) / static_cast<double>(scores_u.rows());
  const Eigen::MatrixXd inv = jacobian.inverse();
  return inv * meat * inv.transpose();
}

inline void check_regression_shapes(const Eigen::MatrixXd& xh, std::span<const double> y,
                                    std::span<const double> yhat_h, const Eigen::MatrixXd& xu,
                                    std::span<const double> yhat_u) {
  if (static_cast<std::size_t>(xh.rows()) != y.size() || y.size() != yhat_h.size() ||
      static_cast<std::size_t>(xu.rows()) != yhat_u.size() || xh.cols() != xu.cols())
    throw Error(ErrorCode::InvalidArgument, "estimators", "regression inputs have mismatched shapes");
  if (y.size() < 2 || yhat_u.empty()) throw Error(ErrorCode::EmptyFrame, "estimators", "need n >= 2 and N >= 1");
}

}  // namespace detail

/// Solves A(lambda) theta = lambda mean_U(x yhat) + mean_H(x y) - lambda mean_H(x yhat)
/// with A(lambda) = lambda mean_U(x x^T) + (1 - lambda) mean_H(x x^T).
inline RegressionEstimate rectified_linear_regression(const Eigen::MatrixXd& xh, std::span<const double> y,
                                                      std::span<const double> yhat_h, const Eigen::MatrixXd& xu,
                                                      std::span<const double> yhat_u, double lambda) {
  detail::check_lambda(lambda, "estimators");
  detail::check_regression_shapes(xh, y, yhat_h, xu, yhat_u);
  const double n = static_cast<double>(xh.rows()), big_n = static_cast<double>(xu.rows());
  const auto yv = detail::as_vector(y), yhv = detail::as_vector(yhat_h), yuv = detail::as_vector(yhat_u);

  Eigen::MatrixXd a = (1.0 - lambda) * (xh.transpose() * xh) / n;
  Eigen::VectorXd rhs = xh.transpose() * (yv - lambda * yhv) / n;
  if (lambda != 0.0) {
    a += lambda * (xu.transpose() * xu) / big_n;
    rhs += lambda * (xu.transpose() * yuv) / big_n;
  }
  detail::check_conditioning(a);

  RegressionEstimate e;
  e.coefficients = a.colPivHouseholderQr().solve(rhs);
  e.lambda = lambda;
  e.n = y.size();
  e.big_n = yhat_u.size();
  e.estimand = EstimandKind::LinearRegression;

  const Eigen::VectorXd fit_h = xh * e.coefficients;
  const Eigen::VectorXd fit_u = xu * e.coefficients;
  const Eigen::MatrixXd su = xu.array().colwise() * (fit_u - yuv).array();
  const Eigen::MatrixXd sh =
      xh.array().colwise() * ((fit_h - yv) - lambda * (fit_h - yhv)).array();
  e.covariance = detail::sandwich(a, su, sh, lambda);
  e.variance = e.covariance.diagonal();
  e.score_norm = (a * e.coefficients - rhs).lpNorm<Eigen::Infinity>();
  return e;
}

inline RegressionEstimate rectified_linear_regression(const LabeledSet& h, const UnlabeledFrame& u,
                                                      const std::vector<std::string>& covariates, double lambda,
                                                      bool intercept = true) {
  require_disjoint(h, u, "estimators");
  return rectified_linear_regression(design_matrix(h, covariates, intercept), h.y(), h.yhat(),
                                     design_matrix(u, covariates, intercept), u.yhat(), lambda);
}

namespace detail {

inline double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

inline double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

}  // namespace detail

/// Damped Newton on the lambda-combined logistic score. Converged when the
/// max-norm of the score drops below 1e-8; at most 100 iterations.
inline RegressionEstimate rectified_logistic_regression(const Eigen::MatrixXd& xh, std::span<const double> y,
                                                        std::span<const double> yhat_h, const Eigen::MatrixXd& xu,
                                                        std::span<const double> yhat_u, double lambda) {
  detail::check_lambda(lambda, "estimators");
  detail::check_regression_shapes(xh, y, yhat_h, xu, yhat_u);
  for (double v : y)
    if (v != 0.0 && v != 1.0) throw Error(ErrorCode::InvalidArgument, "estimators", "logistic responses must be 0 or 1");
  for (auto s : {yhat_h, yhat_u})
    for (double v : s)
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "estimators", "logistic predictions must lie in [0,1]");

  const double n = static_cast<double>(xh.rows()), big_n = static_cast<double>(xu.rows());
  const auto yv = detail::as_vector(y), yhv = detail::as_vector(yhat_h), yuv = detail::as_vector(yhat_u);
  const bool use_u = lambda != 0.0;

  // Convex objective whose gradient is the combined score.
  auto loss = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd eh = xh * th;
    double l = 0.0;
    for (Eigen::Index j = 0; j < eh.size(); ++j)
      l += (1.0 - lambda) * detail::softplus(eh(j)) - (yv(j) - lambda * yhv(j)) * eh(j);
    l /= n;
    if (use_u) {
      const Eigen::VectorXd eu = xu * th;
      double lu = 0.0;
      for (Eigen::Index i = 0; i < eu.size(); ++i) lu += detail::softplus(eu(i)) - yuv(i) * eu(i);
      l += lambda * lu / big_n;
    }
    return l;
  };
  auto score_and_jacobian = [&](const Eigen::VectorXd& th, Eigen::VectorXd& score, Eigen::MatrixXd& jac,
                                double& max_eta) {
    const Eigen::VectorXd eh = xh * th;
    Eigen::VectorXd ph = eh.unaryExpr([](double t) { return detail::sigmoid(t); });
    score = xh.transpose() * ((1.0 - lambda) * ph - (yv - lambda * yhv)) / n;
    Eigen::VectorXd wh = (ph.array() * (1.0 - ph.array())).matrix();
    jac = (1.0 - lambda) * xh.transpose() * wh.asDiagonal() * xh / n;
    max_eta = eh.cwiseAbs().maxCoeff();
    if (use_u) {
      const Eigen::VectorXd eu = xu * th;
      Eigen::VectorXd pu = eu.unaryExpr([](double t) { return detail::sigmoid(t); });
      score += lambda * xu.transpose() * (pu - yuv) / big_n;
      Eigen::VectorXd wu = (pu.array() * (1.0 - pu.array())).matrix();
      jac += lambda * xu.transpose() * wu.asDiagonal() * xu / big_n;
      max_eta = std::max(max_eta, eu.cwiseAbs().maxCoeff());
    }
  };

  RegressionEstimate e;
  e.lambda = lambda;
  e.n = y.size();
  e.big_n = yhat_u.size();
  e.estimand = EstimandKind::LogisticRegression;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(xh.cols());
  Eigen::VectorXd score;
  Eigen::MatrixXd jac;
  double max_eta = 0.0;
  score_and_jacobian(theta, score, jac, max_eta);
  double current = loss(theta);
  int it = 0;
  for (; it < 100 && score.lpNorm<Eigen::Infinity>() >= 1e-8; ++it) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(jac);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw Error(ErrorCode::CompleteSeparation, "estimators", "fitted probabilities saturate; data are separable");
    const Eigen::VectorXd step = ldlt.solve(-score);
    double t = 1.0;
    Eigen::VectorXd next = theta + step;
    double next_loss = loss(next);
    const double slope = score.dot(step);
    while (next_loss > current + 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      next = theta + t * step;
      next_loss = loss(next);
    }
    theta = next;
    current = next_loss;
    score_and_jacobian(theta, score, jac, max_eta);
  }
  e.iterations = it;
  e.score_norm = score.lpNorm<Eigen::Infinity>();
  if (e.score_norm >= 1e-8) {
    if (max_eta > 35.0)
      throw Error(ErrorCode::CompleteSeparation, "estimators", "fitted probabilities saturate; data are separable");
    throw Error(ErrorCode::NoConvergence, "estimators",
                "logistic Newton did not converge; final score norm " + std::to_string(e.score_norm));
  }
  // a vanishing score can also come from coefficients running off to infinity
  if (max_eta > 15.0 && loss(2.0 * theta) <= current)
    throw Error(ErrorCode::CompleteSeparation, "estimators", "fitted probabilities saturate; data are separable");
  e.coefficients = theta;

  const Eigen::VectorXd ph = (xh * theta).unaryExpr([](double t) { return detail::sigmoid(t); });
  const Eigen::VectorXd pu = (xu * theta).unaryExpr([](double t) { return detail::sigmoid(t); });
  const Eigen::MatrixXd su = xu.array().colwise() * (pu - yuv).array();
  const Eigen::MatrixXd sh = xh.array().colwise() * ((ph - yv) - lambda * (ph - yhv)).array();
  e.covariance = detail::sandwich(jac, su, sh, lambda);
  e.variance = e.covariance.diagonal();
  return e;
}

inline RegressionEstimate rectified_logistic_regression(const LabeledSet& h, const UnlabeledFrame& u,
                                                        const std::vector<std::string>& covariates, double lambda,
                                                        bool intercept = true) {
  require_disjoint(h, u, "estimators");
  return rectified_logistic_regression(design_matrix(h, covariates, intercept), h.y(), h.yhat(),
                                       design_matrix(u, covariates, intercept), u.yhat(), lambda);
}

}  // namespace ppsurvey
