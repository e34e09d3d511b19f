#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "tuning.hpp"
#include "uncertainty.hpp"

namespace ppsurvey {

// ---------------------------------------------------------------------------
// Populations

/// Categorical covariate. Each level shifts the response mean by `effects`
/// and scales the response noise by `noise_scales` (default 1).
struct Attribute {
  std::string name;
  std::vector<std::string> levels;
  std::vector<double> probabilities;
  std::vector<double> effects;
  std::vector<double> noise_scales;
};

enum class ThetaStarMode { Empirical, Analytic };

struct PopulationConfig {
  std::size_t size = 1000;
  std::vector<Attribute> attributes;
  double base_mean = 0.0;
  double noise_sd = 1.0;
  ThetaStarMode theta_star_mode = ThetaStarMode::Empirical;

  void validate() const {
    auto fail = [](const std::string& m) { return Error(ErrorCode::InvalidConfig, "simulation", m); };
    if (size < 1) throw fail("population size must be positive");
    if (!(noise_sd >= 0.0) || !std::isfinite(base_mean)) throw fail("noise_sd must be >= 0 and base_mean finite");
    for (const auto& a : attributes) {
      const auto k = a.levels.size();
      if (k == 0 || a.probabilities.size() != k || (!a.effects.empty() && a.effects.size() != k) ||
          (!a.noise_scales.empty() && a.noise_scales.size() != k))
        throw fail("attribute '" + a.name + "' has inconsistent level lists");
      double total = 0.0;
      for (double p : a.probabilities) {
        if (!(p >= 0.0)) throw fail("attribute '" + a.name + "' has a negative probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) throw fail("probabilities of attribute '" + a.name + "' do not sum to 1");
      for (double s : a.noise_scales)
        if (!(s >= 0.0)) throw fail("attribute '" + a.name + "' has a negative noise scale");
    }
  }

  /// Superpopulation mean: base plus probability-weighted level effects.
  double analytic_mean() const {
    double m = base_mean;
    for (const auto& a : attributes)
      for (std::size_t l = 0; l < a.effects.size(); ++l) m += a.probabilities[l] * a.effects[l];
    return m;
  }
};

/// Finite population with ground-truth responses.
struct Population {
  std::vector<std::string> attribute_names;
  std::vector<std::vector<std::string>> level_names;
  std::vector<std::vector<std::uint16_t>> levels;  // [attribute][record]
  std::vector<double> y;
  double theta_star = 0.0;

  std::size_t size() const noexcept { return y.size(); }

  const std::string& label(std::size_t attribute, std::size_t record) const {
    return level_names[attribute][levels[attribute][record]];
  }

  std::optional<std::size_t> attribute_index(std::string_view name) const {
    for (std::size_t a = 0; a < attribute_names.size(); ++a)
      if (attribute_names[a] == name) return a;
    return std::nullopt;
  }

  std::vector<std::string> labels(std::string_view attribute) const {
    auto a = attribute_index(attribute);
    if (!a) throw Error(ErrorCode::UnknownGroupKey, "simulation", "no attribute '" + std::string(attribute) + "'");
    std::vector<std::string> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = label(*a, i);
    return out;
  }

  /// Evaluation frame with attributes as both covariates and group keys.
  FullFrame to_full_frame(std::span<const double> yhat) const {
    FullFrame f;
    f.covariate_names = attribute_names;
    f.group_names = attribute_names;
    f.records.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
      FullFrame::Record r;
      r.respondent_id = "p" + std::to_string(i);
      for (std::size_t a = 0; a < attribute_names.size(); ++a) r.covariates.push_back(label(a, i));
      r.group_keys = r.covariates;
      r.y = y[i];
      r.yhat = yhat[i];
      f.records.push_back(std::move(r));
    }
    return f;
  }
};

inline Population generate_population(const PopulationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto rng = make_rng(seed, "population");
  std::normal_distribution<double> normal;
  Population pop;
  const std::size_t k = cfg.attributes.size();
  pop.levels.assign(k, std::vector<std::uint16_t>(cfg.size));
  for (const auto& a : cfg.attributes) {
    pop.attribute_names.push_back(a.name);
    pop.level_names.push_back(a.levels);
  }
  pop.y.resize(cfg.size);
  for (std::size_t i = 0; i < cfg.size; ++i) {
    double mu = cfg.base_mean, scale = cfg.noise_sd;
    for (std::size_t a = 0; a < k; ++a) {
      const auto& attr = cfg.attributes[a];
      const double u = uniform01(rng);
      std::size_t l = 0;
      double cum = attr.probabilities[0];
      while (u >= cum && l + 1 < attr.levels.size()) cum += attr.probabilities[++l];
      pop.levels[a][i] = static_cast<std::uint16_t>(l);
      if (!attr.effects.empty()) mu += attr.effects[l];
      if (!attr.noise_scales.empty()) scale *= attr.noise_scales[l];
    }
    pop.y[i] = mu + scale * normal(rng);
  }
  pop.theta_star = cfg.theta_star_mode == ThetaStarMode::Analytic ? cfg.analytic_mean() : stats::mean(pop.y);
  return pop;
}

// ---------------------------------------------------------------------------
// Predictors

/// Bias and noise of an emulated fine-tuned model as functions of the number
/// of training responses m: bias(m) = b0 exp(-m / tau), s(m) = s0 / (1 + m / kappa).
struct LearningCurve {
  double b0 = 0.35;
  double tau = 450.0;
  double s0 = 1.0;
  double kappa = 300.0;

  void validate() const {
    if (!(tau > 0.0) || !(kappa > 0.0) || !(s0 >= 0.0) || !std::isfinite(b0) || b0 <= -1.0)
      throw Error(ErrorCode::InvalidCurve, "simulation", "learning curve needs tau > 0, kappa > 0, s0 >= 0, b0 > -1");
  }
  double bias_at(double m) const { return b0 * std::exp(-m / tau); }
  double noise_at(double m) const { return s0 / (1.0 + m / kappa); }
};

enum class PredictorKind { AdditiveBias, MultiplicativeBias, SubgroupBias, NoisyOracle, LearningCurve };

struct PredictorModel {
  PredictorKind kind = PredictorKind::NoisyOracle;
  double bias = 0.0;    // additive offset
  double factor = 1.0;  // multiplicative factor
  double noise_sd = 0.0;
  std::string group_attribute;                  // subgroup-bias
  std::map<std::string, double> group_offsets;  // subgroup-bias, by level label
  std::optional<double> correlation_target;     // calibrates noise_sd when set
  LearningCurve curve;                          // learning-curve
  std::size_t m_train = 0;                      // learning-curve
  std::string seed_stream = "predictor";

  void validate() const {
    auto fail = [](const std::string& m) { return Error(ErrorCode::InvalidConfig, "simulation", m); };
    if (!(noise_sd >= 0.0)) throw fail("noise_sd must be >= 0");
    if (kind == PredictorKind::MultiplicativeBias && !(factor > 0.0)) throw fail("multiplicative factor must be > 0");
    if (kind == PredictorKind::NoisyOracle && !correlation_target) throw fail("noisy-oracle needs a correlation target");
    if (correlation_target && !(*correlation_target >= -1.0 && *correlation_target <= 1.0))
      throw fail("correlation target must lie in [-1,1]");
    if (kind == PredictorKind::LearningCurve) curve.validate();
  }

  static PredictorModel additive(double b, double noise) {
    PredictorModel m;
    m.kind = PredictorKind::AdditiveBias;
    m.bias = b;
    m.noise_sd = noise;
    return m;
  }
  static PredictorModel multiplicative(double a, double noise) {
    PredictorModel m;
    m.kind = PredictorKind::MultiplicativeBias;
    m.factor = a;
    m.noise_sd = noise;
    return m;
  }
  static PredictorModel noisy_oracle(double rho) {
    PredictorModel m;
    m.kind = PredictorKind::NoisyOracle;
    m.correlation_target = rho;
    return m;
  }
  static PredictorModel learning(const LearningCurve& c, std::size_t m_train) {
    PredictorModel m;
    m.kind = PredictorKind::LearningCurve;
    m.curve = c;
    m.m_train = m_train;
    return m;
  }
};

inline std::string to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::AdditiveBias: return "additive-bias";
    case PredictorKind::MultiplicativeBias: return "multiplicative-bias";
    case PredictorKind::SubgroupBias: return "subgroup-bias";
    case PredictorKind::NoisyOracle: return "noisy-oracle";
    case PredictorKind::LearningCurve: return "learning-curve";
  }
  return "unknown";
}

/// Shipped presets named after the synthesis methods they stand in for. They
/// differ only in (bias factor, correlation); no fidelity to real models is
/// implied.
inline PredictorModel predictor_profile(std::string_view name) {
  auto preset = [](double factor, double rho) {
    PredictorModel m = PredictorModel::multiplicative(factor, 0.0);
    m.correlation_target = rho;
    return m;
  };
  if (name == "demo-only") return preset(0.80, 0.20);
  if (name == "persona") return preset(1.25, 0.45);
  if (name == "domain-ft") return preset(1.04, 0.30);
  if (name == "subpop-ft") return preset(0.92, 0.35);
  throw Error(ErrorCode::InvalidConfig, "simulation", "unknown predictor profile '" + std::string(name) + "'");
}

inline const std::vector<std::string>& predictor_profile_names() {
  static const std::vector<std::string> names{"demo-only", "persona", "domain-ft", "subpop-ft"};
  return names;
}

namespace detail {

// Noise-free part of the prediction for record i.
inline std::vector<double> predictor_signal(const Population& pop, const PredictorModel& model) {
  std::vector<double> base(pop.size());
  switch (model.kind) {
    case PredictorKind::AdditiveBias:
      for (std::size_t i = 0; i < base.size(); ++i) base[i] = pop.y[i] + model.bias;
      break;
    case PredictorKind::MultiplicativeBias:
      for (std::size_t i = 0; i < base.size(); ++i) base[i] = model.factor * pop.y[i];
      break;
    case PredictorKind::SubgroupBias: {
      auto a = pop.attribute_index(model.group_attribute);
      if (!a)
        throw Error(ErrorCode::UnknownGroupKey, "simulation", "no attribute '" + model.group_attribute + "'");
      std::vector<double> offset(pop.level_names[*a].size(), 0.0);
      for (std::size_t l = 0; l < offset.size(); ++l)
        if (auto it = model.group_offsets.find(pop.level_names[*a][l]); it != model.group_offsets.end())
          offset[l] = it->second;
      for (std::size_t i = 0; i < base.size(); ++i) base[i] = pop.y[i] + offset[pop.levels[*a][i]];
      break;
    }
    case PredictorKind::NoisyOracle:
      base = pop.y;
      break;
    case PredictorKind::LearningCurve: {
      const double b = model.curve.bias_at(static_cast<double>(model.m_train));
      for (std::size_t i = 0; i < base.size(); ++i) base[i] = pop.y[i] * (1.0 + b);
      break;
    }
  }
  return base;
}

inline std::vector<double> standard_normals(Rng& rng, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> z(n);
  for (auto& v : z) v = normal(rng);
  return z;
}

}  // namespace detail

/// Noise scale s such that corr(y, signal + s z) equals the model's target on
/// the given draw z; found by bisection on the measured correlation, which
/// is evaluated in closed form from the moments of (y, signal, z).
inline double calibrate_noise(std::span<const double> y, std::span<const double> signal, std::span<const double> z,
                              double target) {
  const double vy = stats::sample_variance(y), vb = stats::sample_variance(signal), vz = stats::sample_variance(z);
  const double cyb = stats::sample_covariance(y, signal), cyz = stats::sample_covariance(y, z),
               cbz = stats::sample_covariance(signal, z);
  auto corr = [&](double s) {
    const double v = vb + 2.0 * s * cbz + s * s * vz;
    return v > 0.0 && vy > 0.0 ? (cyb + s * cyz) / std::sqrt(vy * v) : 0.0;
  };
  auto fail = [&] {
    return Error(ErrorCode::UnattainableCorrelation, "simulation",
                 "correlation " + std::to_string(target) + " is not reachable by adding noise");
  };
  if (!(target > 0.0) || vy <= 0.0) throw fail();
  const double c0 = corr(0.0);
  if (target > c0 + 1e-12) throw fail();
  if (target >= c0) return 0.0;
  double lo = 0.0, hi = std::sqrt(std::max(vb, vy) / std::max(vz, 1e-300));
  int doublings = 0;
  while (corr(hi) > target) {
    hi *= 2.0;
    if (++doublings > 200) throw fail();
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (corr(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Replaces a correlation target by the concrete noise scale that attains it
/// on this population. The calibration draw uses its own substream.
inline PredictorModel resolve_predictor(const Population& pop, const PredictorModel& model, std::uint64_t seed) {
  model.validate();
  PredictorModel out = model;
  if (model.kind == PredictorKind::LearningCurve) {
    out.noise_sd = model.curve.noise_at(static_cast<double>(model.m_train));
    return out;
  }
  if (!model.correlation_target) return out;
  const auto signal = detail::predictor_signal(pop, model);
  auto rng = make_rng(seed, model.seed_stream + "/calibration");
  const auto z = detail::standard_normals(rng, pop.size());
  out.noise_sd = calibrate_noise(pop.y, signal, z, *model.correlation_target);
  out.correlation_target.reset();
  // y + noise at a fixed scale
  if (out.kind == PredictorKind::NoisyOracle) {
    out.kind = PredictorKind::AdditiveBias;
    out.bias = 0.0;
  }
  return out;
}

/// Predictions aligned to the population. With a correlation target, the
/// noise scale is calibrated on the very draw that is returned.
inline std::vector<double> simulate_predictor(const Population& pop, const PredictorModel& model, std::uint64_t seed) {
  model.validate();
  auto signal = detail::predictor_signal(pop, model);
  auto rng = make_rng(seed, model.seed_stream);
  const auto z = detail::standard_normals(rng, pop.size());
  double s = model.noise_sd;
  if (model.kind == PredictorKind::LearningCurve) s = model.curve.noise_at(static_cast<double>(model.m_train));
  if (model.correlation_target) s = calibrate_noise(pop.y, signal, z, *model.correlation_target);
  for (std::size_t i = 0; i < signal.size(); ++i) signal[i] += s * z[i];
  return signal;
}

inline std::vector<double> learning_curve_predictor(const Population& pop, std::size_t m_train,
                                                    const LearningCurve& curve, std::uint64_t seed) {
  return simulate_predictor(pop, PredictorModel::learning(curve, m_train), seed);
}

// ---------------------------------------------------------------------------
// Replication studies

struct LambdaPolicy {
  enum class Kind { Fixed, Opt, Unrectified };
  Kind kind = Kind::Opt;
  double lambda = 1.0;

  static LambdaPolicy fixed(double l) { return {Kind::Fixed, l}; }
  static LambdaPolicy opt() { return {Kind::Opt, 0.0}; }
  static LambdaPolicy unrectified() { return {Kind::Unrectified, 1.0}; }

  std::string label() const {
    switch (kind) {
      case Kind::Fixed: return "rec_lambda=" + csv::format_number(lambda);
      case Kind::Opt: return "rec_lambda_opt";
      case Kind::Unrectified: return "none";
    }
    return "unknown";
  }
};

/// Minimum coverage at which an ESS gain is reported; operationalizes
/// "nominal 0.95 not achieved" with binomial slack at R = 2000.
inline constexpr double kCoverageGate = 0.93;

struct ReplicationRecord {
  double theta_hat = 0.0;
  double theta_star = 0.0;
  double lambda = 0.0;
  double variance = 0.0;
  Interval ci;
  bool covered = false;
  double bias_pct = 0.0;
  double var_human = 0.0;
  double ess_gain_pct = 0.0;
  bool effective = false;
};

struct ReplicationReport {
  std::size_t replications = 0;
  double theta_star = 0.0;  // mean over replications in superpopulation mode
  double mean_theta_hat = 0.0;
  double mc_se = 0.0;  // standard error of mean_theta_hat
  double empirical_variance = 0.0;
  double mean_variance = 0.0;
  double mean_bias_pct = 0.0;  // mean of per-replication |error| in percent
  double bias_pct_sd = 0.0;
  double bias_of_mean_pct = 0.0;  // relative error of the replication-mean estimate
  double coverage = 0.0;
  double ess_gain_raw_pct = 0.0;  // mean per-replication ESS gain, ungated
  std::optional<double> mean_ess_gain_pct;  // empty when coverage < kCoverageGate
  double ess_gain_sd = 0.0;
  double mean_lambda = 0.0;
  double mean_ci_width = 0.0;
  double effective_rate = 0.0;
  std::vector<ReplicationRecord> per_replication;
};

/// Estimate, interval and diagnostics for one (H, U) draw.
inline ReplicationRecord evaluate_replication(std::span<const double> y, std::span<const double> yhat_h,
                                              std::span<const double> yhat_u, const LambdaPolicy& policy,
                                              const IntervalSpec& interval, double theta_star) {
  ReplicationRecord rec;
  rec.theta_star = theta_star;
  rec.var_human = stats::sample_variance(y) / static_cast<double>(y.size());
  if (policy.kind == LambdaPolicy::Kind::Unrectified) {
    rec.theta_hat = stats::mean(yhat_u);
    rec.lambda = 1.0;
    rec.variance = stats::sample_variance(yhat_u) / static_cast<double>(yhat_u.size());
    if (interval.method == IntervalMethod::AnalyticNormal) {
      rec.ci = normal_interval(rec.theta_hat, rec.variance, interval.level);
    } else {
      auto reps = bootstrap_replicates(y, yhat_h, yhat_u, interval, [](auto, auto, auto yus) { return stats::mean(yus); });
      rec.ci = detail::percentile_interval(std::move(reps), rec.theta_hat, interval.level);
    }
  } else {
    double lambda = policy.lambda;
    if (policy.kind == LambdaPolicy::Kind::Opt) lambda = lambda_opt_mean(y, yhat_h, yhat_u).lambda;
    const auto est = rectified_mean(y, yhat_h, yhat_u, lambda);
    rec.theta_hat = est.theta_hat;
    rec.lambda = lambda;
    rec.variance = est.variance;
    rec.ci = confidence_interval(est, y, yhat_h, yhat_u, interval);
  }
  rec.covered = rec.ci.contains(theta_star);
  rec.bias_pct = bias_pct(rec.theta_hat, theta_star);
  rec.ess_gain_pct = ess_gain_pct(rec.var_human, rec.variance);
  rec.effective = rec.variance < rec.var_human;
  return rec;
}

/// Aggregates records in index order.
inline ReplicationReport summarize(std::vector<ReplicationRecord> records, bool keep_records) {
  ReplicationReport r;
  const std::size_t count = records.size();
  r.replications = count;
  if (count == 0) return r;
  const double k = static_cast<double>(count);
  std::vector<double> theta(count), bias(count), ess(count);
  std::size_t covered = 0, effective = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& rec = records[i];
    theta[i] = rec.theta_hat;
    bias[i] = rec.bias_pct;
    ess[i] = rec.ess_gain_pct;
    r.theta_star += rec.theta_star;
    r.mean_variance += rec.variance;
    r.mean_lambda += rec.lambda;
    r.mean_ci_width += rec.ci.width();
    covered += rec.covered ? 1 : 0;
    effective += rec.effective ? 1 : 0;
  }
  r.theta_star /= k;
  r.mean_variance /= k;
  r.mean_lambda /= k;
  r.mean_ci_width /= k;
  r.mean_theta_hat = stats::mean(theta);
  r.empirical_variance = stats::sample_variance(theta);
  r.mc_se = std::sqrt(r.empirical_variance / k);
  r.mean_bias_pct = stats::mean(bias);
  r.bias_pct_sd = std::sqrt(stats::sample_variance(bias));
  r.bias_of_mean_pct = bias_pct(r.mean_theta_hat, r.theta_star);
  r.coverage = static_cast<double>(covered) / k;
  r.effective_rate = static_cast<double>(effective) / k;
  r.ess_gain_raw_pct = stats::mean(ess);
  r.ess_gain_sd = std::sqrt(stats::sample_variance(ess));
  if (r.coverage >= kCoverageGate) r.mean_ess_gain_pct = r.ess_gain_raw_pct;
  if (keep_records) r.per_replication = std::move(records);
  return r;
}

struct ReplicationStudy {
  PopulationConfig population;
  PredictorModel predictor;
  std::size_t n_human = 100;
  LambdaPolicy policy = LambdaPolicy::opt();
  IntervalSpec interval;
  std::size_t replications = 1000;
  bool redraw_population = false;  // superpopulation mode: fresh population every replication
  bool keep_records = false;
};

/// Monte-Carlo study. By default the population is drawn once and each
/// replication redraws predictor noise and the labeled split; every random
/// draw comes from a substream keyed by (master_seed, purpose, replication).
inline ReplicationReport run_replications(const ReplicationStudy& study, std::uint64_t master_seed,
                                          unsigned workers = 1) {
  if (study.replications < 1) throw Error(ErrorCode::InvalidArgument, "simulation", "need at least one replication");
  if (study.n_human < 2) throw Error(ErrorCode::InvalidArgument, "simulation", "n_human must be at least 2");
  if (study.n_human >= study.population.size)
    throw Error(ErrorCode::BudgetExceedsFrame, "simulation", "n_human must be below the population size");
  study.interval.validate();
  study.predictor.validate();

  std::optional<Population> fixed;
  PredictorModel model = study.predictor;
  {
    const auto first = generate_population(study.population, substream_seed(master_seed, "population", 0));
    model = resolve_predictor(first, study.predictor, substream_seed(master_seed, "calibration"));
    if (!study.redraw_population) fixed = first;
  }

  std::vector<ReplicationRecord> records(study.replications);
  parallel_for(study.replications, workers, [&](std::size_t r) {
    std::optional<Population> fresh;
    if (study.redraw_population)
      fresh = generate_population(study.population, substream_seed(master_seed, "population", r));
    const Population& pop = fresh ? *fresh : *fixed;
    const auto yhat = simulate_predictor(pop, model, substream_seed(master_seed, "predictor", r));
    auto rng = make_rng(master_seed, "split", r);
    const auto [hi, ui] = split_indices(pop.size(), study.n_human, rng);
    std::vector<double> y(hi.size()), yh(hi.size()), yu(ui.size());
    for (std::size_t j = 0; j < hi.size(); ++j) {
      y[j] = pop.y[hi[j]];
      yh[j] = yhat[hi[j]];
    }
    for (std::size_t i = 0; i < ui.size(); ++i) yu[i] = yhat[ui[i]];
    IntervalSpec spec = study.interval;
    spec.seed = substream_seed(master_seed, "bootstrap", r);
    spec.workers = 1;
    records[r] = evaluate_replication(y, yh, yu, study.policy, spec, pop.theta_star);
  });
  return summarize(std::move(records), study.keep_records);
}

}  // namespace ppsurvey
