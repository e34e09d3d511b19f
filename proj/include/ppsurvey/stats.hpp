#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace ppsurvey::stats {

inline double mean(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

// All variances and covariances use the n-1 denominator.
inline double sample_variance(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(n - 1);
}

inline double sample_covariance(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = mean(a);
  const double mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(n - 1);
}

inline double correlation(std::span<const double> a, std::span<const double> b) {
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return sample_covariance(a, b) / std::sqrt(va * vb);
}

/// Second-order summary of a labeled sample: everything the mean estimator,
/// its plug-in variance and the power-tuning rule need from H.
struct PairedMoments {
  std::size_t n = 0;
  double mean_y = 0.0;
  double mean_yhat = 0.0;
  double var_y = 0.0;
  double var_yhat = 0.0;
  double cov = 0.0;
};

inline PairedMoments paired_moments(std::span<const double> y, std::span<const double> yhat) {
  PairedMoments m;
  m.n = y.size();
  m.mean_y = mean(y);
  m.mean_yhat = mean(yhat);
  if (m.n < 2) return m;
  double syy = 0.0, shh = 0.0, syh = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) {
    const double dy = y[i] - m.mean_y;
    const double dh = yhat[i] - m.mean_yhat;
    syy += dy * dy;
    shh += dh * dh;
    syh += dy * dh;
  }
  const double d = static_cast<double>(m.n - 1);
  m.var_y = syy / d;
  m.var_yhat = shh / d;
  m.cov = syh / d;
  return m;
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

/// Linear-interpolation percentile (Hyndman-Fan type 7) of a sorted sample.
inline double sorted_percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::nan("");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return sorted_percentile(values, p);
}

}  // namespace ppsurvey::stats
