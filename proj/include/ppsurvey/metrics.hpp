#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "data_model.hpp"
#include "error.hpp"

namespace ppsurvey {

/// Relative error in percent, 100 |theta_hat - theta_star| / |theta_star|.
inline double bias_pct(double theta_hat, double theta_star) {
  if (theta_star == 0.0) throw Error(ErrorCode::ZeroTruth, "metrics", "relative bias undefined for a zero target");
  return 100.0 * std::abs(theta_hat - theta_star) / std::abs(theta_star);
}

/// Effective-sample-size gain in percent: 100 (var_human / var_method - 1).
inline double ess_gain_pct(double var_human, double var_method) {
  if (!(var_method > 0.0)) throw Error(ErrorCode::ZeroMethodVariance, "metrics", "method variance must be positive");
  return 100.0 * (var_human / var_method - 1.0);
}

inline double individual_mae(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) throw Error(ErrorCode::EmptyInput, "metrics", "no pairs");
  if (y.size() != yhat.size()) throw Error(ErrorCode::InvalidArgument, "metrics", "y and yhat lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

struct SubgroupRow {
  std::string group_label;
  std::size_t n_group = 0;
  double bias_before_pct = 0.0;
  double bias_after_pct = 0.0;
  double abs_delta = 0.0;
  double rel_delta_pct = 0.0;  // NaN when bias_before_pct is zero
};

enum class Recentering { Additive, Multiplicative };

/// Shifts every prediction so the frame mean equals theta_rec, or rescales
/// for the multiplicative variant.
inline std::vector<double> recenter_predictions(std::span<const double> yhat, double theta_rec,
                                                Recentering mode = Recentering::Additive) {
  if (yhat.empty()) throw Error(ErrorCode::EmptyInput, "metrics", "no predictions to recenter");
  double mean_hat = 0.0;
  for (double v : yhat) mean_hat += v;
  mean_hat /= static_cast<double>(yhat.size());
  std::vector<double> out(yhat.begin(), yhat.end());
  if (mode == Recentering::Additive) {
    const double shift = theta_rec - mean_hat;
    for (auto& v : out) v += shift;
  } else {
    if (mean_hat == 0.0) throw Error(ErrorCode::ZeroTruth, "metrics", "cannot rescale predictions with zero mean");
    const double scale = theta_rec / mean_hat;
    for (auto& v : out) v *= scale;
  }
  return out;
}

/// Recenters the predictions, then compares per-group relative bias
/// against the group truth means before and after.
inline std::vector<SubgroupRow> subgroup_bias_report(std::span<const double> y, std::span<const double> yhat,
                                                     std::span<const std::string> labels, double theta_rec,
                                                     Recentering mode = Recentering::Additive) {
  if (y.empty()) throw Error(ErrorCode::EmptyInput, "metrics", "empty evaluation frame");
  if (y.size() != yhat.size() || y.size() != labels.size())
    throw Error(ErrorCode::InvalidArgument, "metrics", "frame columns have different lengths");
  const auto recentered = recenter_predictions(yhat, theta_rec, mode);

  struct Acc {
    std::size_t n = 0;
    double y = 0, before = 0, after = 0;
  };
  std::map<std::string, Acc> groups;
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto& a = groups[labels[i]];
    ++a.n;
    a.y += y[i];
    a.before += yhat[i];
    a.after += recentered[i];
  }
  std::vector<SubgroupRow> rows;
  for (const auto& [label, a] : groups) {
    const double n = static_cast<double>(a.n);
    const double truth = a.y / n;
    if (truth == 0.0)
      throw Error(ErrorCode::ZeroGroupTruthMean, "metrics", "group '" + label + "' has zero truth mean");
    SubgroupRow r;
    r.group_label = label;
    r.n_group = a.n;
    r.bias_before_pct = 100.0 * std::abs(a.before / n - truth) / std::abs(truth);
    r.bias_after_pct = 100.0 * std::abs(a.after / n - truth) / std::abs(truth);
    r.abs_delta = r.bias_before_pct - r.bias_after_pct;
    r.rel_delta_pct = r.bias_before_pct > 0.0 ? 100.0 * r.abs_delta / r.bias_before_pct
                                              : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SubgroupRow> subgroup_bias_report(const LabeledSet& frame, double theta_rec,
                                                     const std::string& group_key,
                                                     Recentering mode = Recentering::Additive) {
  auto g = frame.group_index(group_key);
  if (!g) throw Error(ErrorCode::UnknownGroupKey, "metrics", "no group column '" + group_key + "'");
  std::vector<std::string> labels(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) labels[i] = frame.groups(i)[*g];
  return subgroup_bias_report(frame.y(), frame.yhat(), labels, theta_rec, mode);
}

inline csv::Table subgroup_table(const std::vector<SubgroupRow>& rows) {
  csv::Table t;
  t.header = {"group", "n_group", "bias_before_pct", "bias_after_pct", "abs_delta", "rel_delta_pct"};
  for (const auto& r : rows)
    t.rows.push_back({r.group_label, std::to_string(r.n_group), csv::format_number(r.bias_before_pct),
                      csv::format_number(r.bias_after_pct), csv::format_number(r.abs_delta),
                      csv::format_number(r.rel_delta_pct)});
  return t;
}

}  // namespace ppsurvey
