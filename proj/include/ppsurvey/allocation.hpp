#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "simulation.hpp"
#include "stats.hpp"
#include "uncertainty.hpp"

namespace ppsurvey {

struct AllocationPoint {
  double ft_share = 0.0;
  std::size_t m_train = 0;
  std::size_t n_rect = 0;
  double mean_bias_pct = 0.0;
  double mean_ess_gain_pct = 0.0;
  Interval bias_ci;
  Interval ess_ci;
  double coverage = 0.0;
  double mean_lambda = 0.0;
  // Sample covariance of (bias, ess) across replications, for ellipses.
  double cov_bias_bias = 0.0;
  double cov_bias_ess = 0.0;
  double cov_ess_ess = 0.0;
  std::vector<double> bias_samples;
  std::vector<double> ess_samples;
};

struct AllocationSweep {
  std::size_t budget = 1000;
  std::vector<double> shares{0.1, 0.2, 0.4, 0.6, 0.8};
  PopulationConfig population;
  LearningCurve curve;
  IntervalSpec interval;
  std::size_t replications = 100;
};

namespace detail {

inline Interval mean_interval(std::span<const double> v, double level) {
  const double m = stats::mean(v);
  const double se = std::sqrt(stats::sample_variance(v) / static_cast<double>(v.size()));
  return normal_interval(m, se * se, level);
}

}  // namespace detail

/// Fixed-budget fine-tune versus rectify sweep. For each share, m_train =
/// round(share * budget) labeled responses feed the learning-curve predictor
/// and the remaining n_rect are held out as the rectification sample; the
/// two sets never intersect. The population is drawn once; each replication
/// redraws the labeled pool, its partition and the predictor noise.
inline std::vector<AllocationPoint> run_allocation_sweep(const AllocationSweep& sweep, std::uint64_t master_seed,
                                                         unsigned workers = 1) {
  if (sweep.budget < 10) throw Error(ErrorCode::InvalidArgument, "allocation", "budget must be at least 10");
  if (sweep.shares.empty()) throw Error(ErrorCode::ShareOutOfRange, "allocation", "no shares given");
  for (double s : sweep.shares)
    if (!(s > 0.0 && s < 1.0))
      throw Error(ErrorCode::ShareOutOfRange, "allocation", "share " + std::to_string(s) + " is outside (0,1)");
  if (sweep.replications < 2) throw Error(ErrorCode::InvalidArgument, "allocation", "need at least 2 replications");
  sweep.curve.validate();
  sweep.interval.validate();
  if (sweep.population.size <= sweep.budget)
    throw Error(ErrorCode::BudgetExceedsFrame, "allocation", "population must exceed the labeling budget");

  const auto pop = generate_population(sweep.population, substream_seed(master_seed, "population", 0));
  std::vector<AllocationPoint> points;
  for (double share : sweep.shares) {
    AllocationPoint p;
    p.ft_share = share;
    p.m_train = static_cast<std::size_t>(std::llround(share * static_cast<double>(sweep.budget)));
    p.n_rect = sweep.budget - p.m_train;
    if (p.n_rect < 2)
      throw Error(ErrorCode::ShareOutOfRange, "allocation", "share leaves fewer than 2 responses for rectification");
    const auto model = PredictorModel::learning(sweep.curve, p.m_train);

    std::vector<ReplicationRecord> records(sweep.replications);
    parallel_for(sweep.replications, workers, [&](std::size_t r) {
      auto rng = make_rng(master_seed, "allocation-pool", r);
      auto [pool, rest] = split_indices(pop.size(), sweep.budget, rng);
      for (std::size_t i = 0; i + 1 < pool.size(); ++i)
        std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
      const std::span<const std::size_t> train(pool.data(), p.m_train);
      const std::span<const std::size_t> held(pool.data() + p.m_train, p.n_rect);
      {
        const std::unordered_set<std::size_t> train_ids(train.begin(), train.end());
        for (auto i : held)
          if (train_ids.contains(i))
            throw Error(ErrorCode::OverlapError, "allocation", "fine-tuning record reused for rectification");
      }
      const auto yhat = simulate_predictor(pop, model, substream_seed(master_seed, "predictor", r));
      std::vector<double> y(held.size()), yh(held.size()), yu(rest.size());
      for (std::size_t j = 0; j < held.size(); ++j) {
        y[j] = pop.y[held[j]];
        yh[j] = yhat[held[j]];
      }
      for (std::size_t i = 0; i < rest.size(); ++i) yu[i] = yhat[rest[i]];
      IntervalSpec spec = sweep.interval;
      spec.seed = substream_seed(master_seed, "bootstrap", r);
      spec.workers = 1;
      records[r] = evaluate_replication(y, yh, yu, LambdaPolicy::opt(), spec, pop.theta_star);
    });

    for (const auto& rec : records) {
      p.bias_samples.push_back(rec.bias_pct);
      p.ess_samples.push_back(rec.ess_gain_pct);
      p.coverage += rec.covered ? 1.0 : 0.0;
      p.mean_lambda += rec.lambda;
    }
    const double k = static_cast<double>(records.size());
    p.coverage /= k;
    p.mean_lambda /= k;
    p.mean_bias_pct = stats::mean(p.bias_samples);
    p.mean_ess_gain_pct = stats::mean(p.ess_samples);
    p.bias_ci = detail::mean_interval(p.bias_samples, sweep.interval.level);
    p.ess_ci = detail::mean_interval(p.ess_samples, sweep.interval.level);
    p.cov_bias_bias = stats::sample_variance(p.bias_samples);
    p.cov_ess_ess = stats::sample_variance(p.ess_samples);
    p.cov_bias_ess = stats::sample_covariance(p.bias_samples, p.ess_samples);
    points.push_back(std::move(p));
  }
  return points;
}

/// True when a is at least as good as b on both objectives (lower bias,
/// higher ESS gain) and strictly better on one.
inline bool dominates(const AllocationPoint& a, const AllocationPoint& b) {
  return a.mean_bias_pct <= b.mean_bias_pct && a.mean_ess_gain_pct >= b.mean_ess_gain_pct &&
         (a.mean_bias_pct < b.mean_bias_pct || a.mean_ess_gain_pct > b.mean_ess_gain_pct);
}

/// Nondominated points, ordered by ft_share. Sorting by bias then sweeping
/// the running ESS maximum gives O(k log k).
inline std::vector<AllocationPoint> pareto_frontier(std::span<const AllocationPoint> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "allocation", "no allocation points");
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].mean_bias_pct != points[b].mean_bias_pct) return points[a].mean_bias_pct < points[b].mean_bias_pct;
    return points[a].mean_ess_gain_pct > points[b].mean_ess_gain_pct;
  });
  std::vector<char> keep(points.size(), 0);
  double best_ess = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    // Points with equal bias form a block; within it only the top ESS value survives.
    std::size_t j = i;
    while (j < order.size() && points[order[j]].mean_bias_pct == points[order[i]].mean_bias_pct) ++j;
    const double block_best = points[order[i]].mean_ess_gain_pct;
    if (block_best > best_ess) {
      for (std::size_t k = i; k < j && points[order[k]].mean_ess_gain_pct == block_best; ++k) keep[order[k]] = 1;
    }
    best_ess = std::max(best_ess, block_best);
    i = j;
  }
  std::vector<AllocationPoint> out;
  for (std::size_t k = 0; k < points.size(); ++k)
    if (keep[k]) out.push_back(points[k]);
  std::stable_sort(out.begin(), out.end(),
                   [](const AllocationPoint& a, const AllocationPoint& b) { return a.ft_share < b.ft_share; });
  return out;
}

enum class Regime { Conservative, Balanced, Aggressive };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::Conservative: return "conservative";
    case Regime::Balanced: return "balanced";
    case Regime::Aggressive: return "aggressive";
  }
  return "unknown";
}

/// Conservative: m_train <= 0.2 budget; Aggressive: m_train >= 0.6 budget;
/// Balanced otherwise. Integer comparisons keep the boundaries exact.
inline Regime classify_regime(std::size_t m_train, std::size_t budget) {
  if (m_train * 5 <= budget) return Regime::Conservative;
  if (m_train * 5 >= budget * 3) return Regime::Aggressive;
  return Regime::Balanced;
}

inline std::vector<Regime> classify_regimes(std::span<const AllocationPoint> points, std::size_t budget) {
  std::vector<Regime> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(classify_regime(p.m_train, budget));
  return out;
}

}  // namespace ppsurvey
