#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "data_model.hpp"
#include "error.hpp"
#include "stats.hpp"
#include "variance.hpp"

namespace ppsurvey {

struct LambdaChoice {
  double lambda = 0.0;
  bool clamped = false;
  bool degenerate = false;  // denominator vanished; fell back to lambda = 0
  double objective_value = 0.0;
  double unclamped_argmin = 0.0;
};

/// Power tuning for the mean: the closed-form minimizer of the plug-in
/// variance, lambda* = c / (s_yhat^2 + (n/N) v_U), clamped to [0,1].
inline LambdaChoice lambda_opt_mean(const stats::PairedMoments& m, double var_u, std::size_t big_n) {
  if (m.n < 2 || big_n < 2) throw Error(ErrorCode::EmptyFrame, "tuning", "power tuning needs n >= 2 and N >= 2");
  LambdaChoice c;
  const double denom = m.var_yhat + static_cast<double>(m.n) / static_cast<double>(big_n) * var_u;
  if (!(denom >= 1e-15)) {
    c.degenerate = true;
    c.lambda = 0.0;
    c.unclamped_argmin = 0.0;
  } else {
    c.unclamped_argmin = m.cov / denom;
    c.lambda = std::clamp(c.unclamped_argmin, 0.0, 1.0);
    c.clamped = c.lambda != c.unclamped_argmin;
  }
  c.objective_value = std::max(0.0, plugin_variance(m, var_u, big_n, c.lambda));
  return c;
}

inline LambdaChoice lambda_opt_mean(std::span<const double> y, std::span<const double> yhat_h,
                                    std::span<const double> yhat_u) {
  return lambda_opt_mean(stats::paired_moments(y, yhat_h), stats::sample_variance(yhat_u), yhat_u.size());
}

inline LambdaChoice lambda_opt_mean(const LabeledSet& h, const UnlabeledFrame& u) {
  require_disjoint(h, u, "tuning");
  return lambda_opt_mean(h.y(), h.yhat(), u.yhat());
}

/// Grid search over {0, step, 2 step, ..., 1} on the same plug-in objective;
/// ties go to the smallest lambda.
inline LambdaChoice lambda_grid_search(const stats::PairedMoments& m, double var_u, std::size_t big_n, double step) {
  if (!(step > 0.0 && step <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tuning", "grid step must lie in (0, 1]");
  if (m.n < 2 || big_n < 1) throw Error(ErrorCode::EmptyFrame, "tuning", "grid search needs n >= 2 and N >= 1");
  const auto points = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  LambdaChoice best;
  best.objective_value = plugin_variance(m, var_u, big_n, 0.0);
  auto consider = [&](double lam) {
    const double v = plugin_variance(m, var_u, big_n, lam);
    if (v < best.objective_value) {
      best.objective_value = v;
      best.lambda = lam;
    }
  };
  for (std::size_t k = 1; k <= points; ++k) consider(std::min(1.0, static_cast<double>(k) * step));
  if (static_cast<double>(points) * step < 1.0 - 1e-12) consider(1.0);
  best.unclamped_argmin = best.lambda;
  best.objective_value = std::max(0.0, best.objective_value);
  return best;
}

inline LambdaChoice lambda_grid_search(std::span<const double> y, std::span<const double> yhat_h,
                                       std::span<const double> yhat_u, double step) {
  return lambda_grid_search(stats::paired_moments(y, yhat_h), stats::sample_variance(yhat_u), yhat_u.size(), step);
}

inline LambdaChoice lambda_grid_search(const LabeledSet& h, const UnlabeledFrame& u, double step) {
  require_disjoint(h, u, "tuning");
  return lambda_grid_search(h.y(), h.yhat(), u.yhat(), step);
}

}  // namespace ppsurvey
