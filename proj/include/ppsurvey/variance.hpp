#pragma once

#include <cstddef>
#include <span>

#include "data_model.hpp"
#include "stats.hpp"

namespace ppsurvey {

/// Plug-in variance of the lambda-scaled rectified mean,
///   lambda^2 * Var_U(yhat) / N + Var_H(y - lambda * yhat) / n,
/// with Var_U(yhat) supplied precomputed.
inline double analytic_variance(std::span<const double> y, std::span<const double> yhat_h, double var_u,
                                std::size_t big_n, double lambda) {
  const std::size_t n = y.size();
  double m = 0.0;
  for (std::size_t j = 0; j < n; ++j) m += y[j] - lambda * yhat_h[j];
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = y[j] - lambda * yhat_h[j] - m;
    ss += r * r;
  }
  return lambda * lambda * var_u / static_cast<double>(big_n) + ss / static_cast<double>(n - 1) / static_cast<double>(n);
}

inline double analytic_variance(std::span<const double> y, std::span<const double> yhat_h,
                                std::span<const double> yhat_u, double lambda) {
  return analytic_variance(y, yhat_h, stats::sample_variance(yhat_u), yhat_u.size(), lambda);
}

inline double analytic_variance(const LabeledSet& h, const UnlabeledFrame& u, double lambda) {
  require_disjoint(h, u, "uncertainty");
  return analytic_variance(h.y(), h.yhat(), u.yhat(), lambda);
}

/// The same objective expanded as a quadratic in lambda from moments:
///   lambda^2 v_U / N + (s_y^2 - 2 lambda c + lambda^2 s_yhat^2) / n.
inline double plugin_variance(const stats::PairedMoments& m, double var_u, std::size_t big_n, double lambda) {
  const double n = static_cast<double>(m.n);
  return lambda * lambda * var_u / static_cast<double>(big_n) +
         (m.var_y - 2.0 * lambda * m.cov + lambda * lambda * m.var_yhat) / n;
}

}  // namespace ppsurvey
