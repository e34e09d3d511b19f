#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "data_model.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "tuning.hpp"
#include "variance.hpp"

namespace ppsurvey {

enum class IntervalMethod { AnalyticNormal, BootstrapPercentile };

struct IntervalSpec {
  double level = 0.95;
  IntervalMethod method = IntervalMethod::AnalyticNormal;
  std::size_t bootstrap_b = 2000;
  std::uint64_t seed = 0;
  bool retune_lambda = false;  // re-run power tuning inside each resample
  unsigned workers = 1;

  void validate() const {
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "uncertainty", "level must lie in (0,1)");
    if (method == IntervalMethod::BootstrapPercentile && bootstrap_b < 100)
      throw Error(ErrorCode::InvalidArgument, "uncertainty", "bootstrap needs B >= 100");
  }
};

inline Interval normal_interval(double theta, double variance, double level) {
  const double half = stats::normal_quantile((1.0 + level) / 2.0) * std::sqrt(std::max(0.0, variance));
  return {theta - half, theta + half};
}

/// Percentile bootstrap. H and U are resampled independently with
/// replacement; resample b draws from its own substream (seed, b), so the
/// interval is identical at any worker count.
using ResampleEstimator =
    std::function<double(std::span<const double>, std::span<const double>, std::span<const double>)>;

inline std::vector<double> bootstrap_replicates(std::span<const double> y, std::span<const double> yhat_h,
                                                std::span<const double> yhat_u, const IntervalSpec& spec,
                                                const ResampleEstimator& estimator) {
  std::vector<double> reps(spec.bootstrap_b);
  parallel_for(spec.bootstrap_b, spec.workers, [&](std::size_t b) {
    auto rng = make_rng(spec.seed, "bootstrap", b);
    std::vector<double> ys(y.size()), yhs(y.size()), yus(yhat_u.size());
    for (std::size_t j = 0; j < y.size(); ++j) {
      const auto k = uniform_index(rng, y.size());
      ys[j] = y[k];
      yhs[j] = yhat_h[k];
    }
    for (auto& v : yus) v = yhat_u[uniform_index(rng, yhat_u.size())];
    reps[b] = estimator(ys, yhs, yus);
  });
  return reps;
}

namespace detail {

// Rectified mean over one resample, accumulated without materializing it.
// Values are shifted by the sample means to keep one-pass moments stable.
inline std::vector<double> bootstrap_mean_replicates(std::span<const double> y, std::span<const double> yhat_h,
                                                     std::span<const double> yhat_u, double lambda,
                                                     const IntervalSpec& spec) {
  const double cy = stats::mean(y), ch = stats::mean(yhat_h), cu = stats::mean(yhat_u);
  const std::size_t n = y.size(), big_n = yhat_u.size();
  std::vector<double> reps(spec.bootstrap_b);
  parallel_for(spec.bootstrap_b, spec.workers, [&](std::size_t b) {
    auto rng = make_rng(spec.seed, "bootstrap", b);
    double sy = 0, sh = 0, syy = 0, shh = 0, syh = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto k = uniform_index(rng, n);
      const double dy = y[k] - cy, dh = yhat_h[k] - ch;
      sy += dy;
      sh += dh;
      syy += dy * dy;
      shh += dh * dh;
      syh += dy * dh;
    }
    double su = 0, suu = 0;
    for (std::size_t i = 0; i < big_n; ++i) {
      const double du = yhat_u[uniform_index(rng, big_n)] - cu;
      su += du;
      suu += du * du;
    }
    const double nd = static_cast<double>(n), nu = static_cast<double>(big_n);
    const double my = sy / nd, mh = sh / nd, mu = su / nu;
    double lam = lambda;
    if (spec.retune_lambda) {
      stats::PairedMoments m;
      m.n = n;
      m.var_y = (syy - nd * my * my) / (nd - 1);
      m.var_yhat = (shh - nd * mh * mh) / (nd - 1);
      m.cov = (syh - nd * my * mh) / (nd - 1);
      const double var_u = big_n > 1 ? (suu - nu * mu * mu) / (nu - 1) : 0.0;
      lam = big_n > 1 ? lambda_opt_mean(m, var_u, big_n).lambda : lambda;
    }
    reps[b] = lam * (mu + cu) + (my + cy) - lam * (mh + ch);
  });
  return reps;
}

inline Interval percentile_interval(std::vector<double> reps, double theta, double level) {
  std::sort(reps.begin(), reps.end());
  Interval ci{stats::sorted_percentile(reps, (1.0 - level) / 2.0), stats::sorted_percentile(reps, (1.0 + level) / 2.0)};
  ci.low = std::min(ci.low, theta);
  ci.high = std::max(ci.high, theta);
  return ci;
}

}  // namespace detail

/// Interval for a scalar estimate from raw columns. Supports the mean and
/// quantile estimands; the lambda of `est` is held fixed unless the spec
/// asks for per-resample re-tuning (mean only).
inline Interval confidence_interval(const RectifiedEstimate& est, std::span<const double> y,
                                    std::span<const double> yhat_h, std::span<const double> yhat_u,
                                    const IntervalSpec& spec) {
  spec.validate();
  if (spec.method == IntervalMethod::AnalyticNormal) return normal_interval(est.theta_hat, est.variance, spec.level);
  switch (est.estimand) {
    case EstimandKind::Mean:
      return detail::percentile_interval(detail::bootstrap_mean_replicates(y, yhat_h, yhat_u, est.lambda, spec),
                                         est.theta_hat, spec.level);
    case EstimandKind::Quantile: {
      const double q = est.q, lam = est.lambda;
      auto reps = bootstrap_replicates(y, yhat_h, yhat_u, spec,
                                       [q, lam](auto ys, auto yhs, auto yus) {
                                         return rectified_quantile(ys, yhs, yus, q, lam).theta_hat;
                                       });
      return detail::percentile_interval(std::move(reps), est.theta_hat, spec.level);
    }
    default:
      throw Error(ErrorCode::InvalidArgument, "uncertainty", "bootstrap intervals cover mean and quantile estimands");
  }
}

inline Interval confidence_interval(const RectifiedEstimate& est, const LabeledSet& h, const UnlabeledFrame& u,
                                    const IntervalSpec& spec) {
  require_disjoint(h, u, "uncertainty");
  return confidence_interval(est, h.y(), h.yhat(), u.yhat(), spec);
}

struct Effectiveness {
  bool effective = false;
  double lhs = 0.0;  // plug-in variance of the rectified estimator
  double rhs = 0.0;  // s_y^2 / n, the human-only variance
};

/// Rectification beats the human-only mean when its plug-in variance is
/// strictly smaller than s_y^2 / n.
inline Effectiveness effectiveness_check(std::span<const double> y, std::span<const double> yhat_h,
                                         std::span<const double> yhat_u, double lambda) {
  if (y.size() < 2) throw Error(ErrorCode::EmptyFrame, "uncertainty", "effectiveness check needs n >= 2");
  Effectiveness e;
  e.lhs = analytic_variance(y, yhat_h, yhat_u, lambda);
  e.rhs = stats::sample_variance(y) / static_cast<double>(y.size());
  e.effective = e.lhs < e.rhs;
  return e;
}

inline Effectiveness effectiveness_check(const LabeledSet& h, const UnlabeledFrame& u, double lambda) {
  require_disjoint(h, u, "uncertainty");
  return effectiveness_check(h.y(), h.yhat(), u.yhat(), lambda);
}

/// Fraction of intervals containing theta_star, endpoints included.
inline double record_coverage(std::span<const Interval> intervals, double theta_star) {
  if (intervals.empty()) throw Error(ErrorCode::EmptyInput, "uncertainty", "no intervals to score");
  std::size_t hits = 0;
  for (const auto& ci : intervals) hits += ci.contains(theta_star) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

}  // namespace ppsurvey
