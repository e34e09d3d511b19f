#pragma once

// Command implementations behind the ppsurvey CLI. Each command computes
// every report in memory and returns it; nothing touches the output
// directory until all inputs validated and all numerics succeeded.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <ppsurvey/config.hpp>
#include <ppsurvey/ppsurvey.hpp>

namespace ppsurvey::cli {

using Json = config::Json;

/// Report files keyed by file name, plus the fully resolved configuration
/// that produced them.
struct Outputs {
  std::map<std::string, std::string> files;
  Json resolved;
};

inline std::string fmt(double v) { return csv::format_number(v); }

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json number_or_null(std::optional<double> v) { return v ? Json(*v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  std::string labeled_path;
  std::string unlabeled_path;
  FrameSchema schema;
  std::optional<std::string> map_path;
  std::string estimand = "mean";
  double q = 0.5;
  std::string lambda = "opt";
  IntervalSpec interval{0.95, IntervalMethod::BootstrapPercentile, 2000, 0, false, 1};
};

inline Json to_json(const EstimateOptions& o) {
  Json j;
  j["labeled"] = o.labeled_path;
  j["unlabeled"] = o.unlabeled_path;
  j["id_column"] = o.schema.id_column ? Json(*o.schema.id_column) : Json(nullptr);
  j["response_column"] = o.schema.response_column.value_or("y");
  j["prediction_column"] = o.schema.prediction_column;
  j["covariate_columns"] = o.schema.covariate_columns;
  j["group_columns"] = o.schema.group_columns;
  j["map"] = o.map_path ? Json(*o.map_path) : Json(nullptr);
  j["estimand"] = o.estimand;
  j["q"] = o.q;
  j["lambda"] = o.lambda;
  j["interval"] = config::to_json(o.interval);
  j["seed"] = o.interval.seed;
  return j;
}

inline double parse_fixed_lambda(const std::string& s) {
  auto v = csv::parse_number(s);
  if (!v || !(*v >= 0.0 && *v <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "cli", "--lambda must be 'opt' or a number in [0,1]");
  return *v;
}

inline Outputs cmd_estimate(const EstimateOptions& o) {
  const ScalarMap map = o.map_path ? ScalarMap::load(*o.map_path) : ScalarMap::passthrough();
  const auto h = load_labeled(o.labeled_path, o.schema, map);
  const auto u = load_unlabeled(o.unlabeled_path, o.schema);
  require_disjoint(h, u, "cli");
  o.interval.validate();

  Outputs out;
  out.resolved = to_json(o);
  Json summary;
  summary["estimand"] = o.estimand;
  summary["n"] = h.size();
  summary["N"] = u.size();

  const bool tuned = o.lambda == "opt";
  std::optional<LambdaChoice> choice;
  double lambda = 0.0;
  if (tuned) {
    if (o.estimand != "mean")
      throw Error(ErrorCode::InvalidArgument, "cli", "power tuning is defined for the mean; pass --lambda VALUE");
    choice = lambda_opt_mean(h, u);
    lambda = choice->lambda;
  } else {
    lambda = parse_fixed_lambda(o.lambda);
  }

  if (o.estimand == "mean" || o.estimand == "quantile") {
    RectifiedEstimate est = o.estimand == "mean" ? rectified_mean(h, u, lambda) : rectified_quantile(h, u, o.q, lambda);
    est.ci = confidence_interval(est, h, u, o.interval);
    const auto eff = effectiveness_check(h, u, lambda);
    const auto human = classical_mean(h);

    csv::Table t;
    t.header = {"estimand", "theta_hat", "lambda", "variance", "ci_low", "ci_high", "level", "ci_method",
                "n", "N", "effective", "effect_lhs", "effect_rhs", "human_mean", "human_variance", "ess_gain_pct"};
    const double ess = est.variance > 0.0 ? ess_gain_pct(human.variance, est.variance)
                                          : std::numeric_limits<double>::infinity();
    const std::string estimand = o.estimand == "quantile" ? "quantile(" + fmt(o.q) + ")" : o.estimand;
    t.rows.push_back({estimand, fmt(est.theta_hat), fmt(est.lambda), fmt(est.variance), fmt(est.ci->low),
                      fmt(est.ci->high), fmt(o.interval.level), config::to_string(o.interval.method),
                      std::to_string(est.n), std::to_string(est.big_n), eff.effective ? "true" : "false",
                      fmt(eff.lhs), fmt(eff.rhs), fmt(human.theta_hat), fmt(human.variance), fmt(ess)});
    out.files["estimate.csv"] = csv::to_string(t);

    summary["theta_hat"] = est.theta_hat;
    summary["lambda"] = est.lambda;
    if (choice) {
      summary["lambda_tuning"] = {{"clamped", choice->clamped},
                                  {"degenerate", choice->degenerate},
                                  {"unclamped_argmin", choice->unclamped_argmin},
                                  {"objective_value", choice->objective_value}};
    }
    summary["variance"] = est.variance;
    summary["ci"] = {{"low", est.ci->low}, {"high", est.ci->high}, {"level", o.interval.level},
                     {"method", config::to_string(o.interval.method)}};
    if (o.interval.method == IntervalMethod::BootstrapPercentile)
      summary["ci"]["resampling"] = "H and U resampled independently with replacement";
    summary["effectiveness"] = {{"effective", eff.effective}, {"lhs", eff.lhs}, {"rhs", eff.rhs}};
    summary["human_only"] = {{"theta_hat", human.theta_hat}, {"variance", human.variance}};
    summary["ess_gain_pct"] = ess;
  } else if (o.estimand == "linear-regression" || o.estimand == "logistic-regression") {
    const bool linear = o.estimand == "linear-regression";
    const auto est = linear ? rectified_linear_regression(h, u, o.schema.covariate_columns, lambda)
                            : rectified_logistic_regression(h, u, o.schema.covariate_columns, lambda);
    csv::Table t;
    t.header = {"term", "coefficient", "variance", "ci_low", "ci_high", "level"};
    std::vector<std::string> terms{"intercept"};
    for (const auto& c : o.schema.covariate_columns) terms.push_back(c);
    Json coefs = Json::array();
    for (Eigen::Index k = 0; k < est.coefficients.size(); ++k) {
      const auto ci = normal_interval(est.coefficients(k), est.variance(k), o.interval.level);
      const auto& term = terms[static_cast<std::size_t>(k)];
      t.rows.push_back({term, fmt(est.coefficients(k)), fmt(est.variance(k)), fmt(ci.low), fmt(ci.high),
                        fmt(o.interval.level)});
      coefs.push_back({{"term", term}, {"coefficient", est.coefficients(k)}, {"variance", est.variance(k)}});
    }
    out.files["estimate.csv"] = csv::to_string(t);
    summary["lambda"] = lambda;
    summary["coefficients"] = coefs;
    summary["ci_method"] = "analytic-normal (sandwich)";
    summary["iterations"] = est.iterations;
  } else {
    throw Error(ErrorCode::InvalidArgument, "cli", "unknown estimand '" + o.estimand + "'");
  }
  out.files["summary.json"] = dump(summary);
  return out;
}

// ---------------------------------------------------------------------------
// study commands

struct StudyOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  unsigned workers = 1;
};

namespace detail {

inline std::uint64_t resolve_seed(const Json& cfg, const StudyOptions& o) {
  if (o.seed) return *o.seed;
  return config::detail::get<std::uint64_t>(cfg, "seed", 0, "config");
}

// Named predictors of a study: the explicit `predictor` section, or the
// listed profiles (default: all four), optionally narrowed by --profile.
inline std::vector<std::pair<std::string, PredictorModel>> study_predictors(const Json& cfg, const PopulationConfig& pop,
                                                                            const StudyOptions& o) {
  std::vector<std::pair<std::string, PredictorModel>> out;
  if (o.profile) {
    out.emplace_back(*o.profile, predictor_profile(*o.profile));
    return out;
  }
  if (cfg.contains("predictor")) {
    const auto& pj = cfg.at("predictor");
    std::string name = pj.contains("profile") ? pj.at("profile").get<std::string>() : "custom";
    out.emplace_back(name, config::parse_predictor(pj, pop));
    return out;
  }
  auto names = config::detail::get<std::vector<std::string>>(cfg, "profiles", predictor_profile_names(), "config");
  for (const auto& n : names) out.emplace_back(n, predictor_profile(n));
  return out;
}

inline std::vector<LambdaPolicy> study_policies(const Json& cfg, std::vector<LambdaPolicy> fallback) {
  if (!cfg.contains("policies")) return fallback;
  std::vector<LambdaPolicy> out;
  for (const auto& p : cfg.at("policies")) out.push_back(config::parse_policy(p));
  if (out.empty()) throw config::detail::invalid("policies must not be empty");
  return out;
}

inline ReplicationStudy base_study(const Json& cfg, const PopulationConfig& pop, IntervalSpec interval_default) {
  ReplicationStudy s;
  s.population = pop;
  s.n_human = config::detail::get<std::size_t>(cfg, "n_human", 100, "config");
  s.replications = config::detail::get<std::size_t>(cfg, "replications", 2000, "config");
  s.redraw_population = config::detail::get<bool>(cfg, "superpopulation", false, "config");
  s.interval = cfg.contains("interval") ? config::parse_interval(cfg.at("interval"), interval_default) : interval_default;
  return s;
}

inline Json report_json(const ReplicationReport& r) {
  Json j;
  j["replications"] = r.replications;
  j["theta_star"] = r.theta_star;
  j["mean_theta_hat"] = r.mean_theta_hat;
  j["mc_se"] = r.mc_se;
  j["mean_bias_pct"] = r.mean_bias_pct;
  j["bias_pct_sd"] = r.bias_pct_sd;
  j["bias_of_mean_pct"] = r.bias_of_mean_pct;
  j["coverage"] = r.coverage;
  j["mean_ess_gain_pct"] = number_or_null(r.mean_ess_gain_pct);
  j["ess_gain_ungated_pct"] = r.ess_gain_raw_pct;
  j["mean_lambda"] = r.mean_lambda;
  j["mean_variance"] = r.mean_variance;
  j["empirical_variance"] = r.empirical_variance;
  j["mean_ci_width"] = r.mean_ci_width;
  j["effective_rate"] = r.effective_rate;
  return j;
}

inline void allow_study_keys(const Json& cfg, std::initializer_list<const char*> extra) {
  std::vector<const char*> keys{"seed", "population", "predictor", "profiles", "n_human", "replications",
                                "superpopulation", "interval", "policies"};
  keys.insert(keys.end(), extra.begin(), extra.end());
  if (!cfg.is_object()) throw config::detail::invalid("config must be a JSON object");
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw config::detail::invalid("unknown key '" + it.key() + "' in config");
  }
}

inline PopulationConfig study_population(const Json& cfg) {
  return cfg.contains("population") ? config::parse_population(cfg.at("population")) : PopulationConfig{};
}

inline Json resolved_study(const ReplicationStudy& s, std::uint64_t seed) {
  Json j;
  j["seed"] = seed;
  j["population"] = config::to_json(s.population);
  j["n_human"] = s.n_human;
  j["replications"] = s.replications;
  j["superpopulation"] = s.redraw_population;
  j["interval"] = config::to_json(s.interval);
  return j;
}

}  // namespace detail

/// Table-2 shaped study: every predictor crossed with every rectification
/// policy, all sharing the same seeded splits.
inline Outputs cmd_simulate(const StudyOptions& o) {
  const auto cfg = config::load(o.config_path);
  detail::allow_study_keys(cfg, {});
  const auto pop = detail::study_population(cfg);
  const auto seed = detail::resolve_seed(cfg, o);
  auto study = detail::base_study(cfg, pop, IntervalSpec{0.95, IntervalMethod::BootstrapPercentile, 1000, 0, false, 1});
  const auto predictors = detail::study_predictors(cfg, pop, o);
  const auto policies = detail::study_policies(
      cfg, {LambdaPolicy::unrectified(), LambdaPolicy::fixed(1.0), LambdaPolicy::opt()});

  Outputs out;
  out.resolved = detail::resolved_study(study, seed);
  out.resolved["predictors"] = Json::object();
  out.resolved["policies"] = Json::array();
  for (const auto& p : policies) out.resolved["policies"].push_back(config::to_json(p));

  csv::Table t;
  t.header = {"method", "rectification", "bias_pct", "bias_of_mean_pct", "ess_gain_pct", "coverage",
              "mean_lambda", "mean_ci_width", "replications"};
  Json summary = Json::array();
  for (const auto& [name, model] : predictors) {
    out.resolved["predictors"][name] = config::to_json(model);
    for (const auto& policy : policies) {
      study.predictor = model;
      study.policy = policy;
      const auto r = run_replications(study, seed, o.workers);
      t.rows.push_back({name, policy.label(), fmt(r.mean_bias_pct), fmt(r.bias_of_mean_pct),
                        r.mean_ess_gain_pct ? fmt(*r.mean_ess_gain_pct) : std::string("NR"), fmt(r.coverage),
                        fmt(r.mean_lambda), fmt(r.mean_ci_width), std::to_string(r.replications)});
      auto j = detail::report_json(r);
      j["method"] = name;
      j["rectification"] = policy.label();
      summary.push_back(std::move(j));
    }
  }
  out.files["table2.csv"] = csv::to_string(t);
  out.files["summary.json"] = dump(Json{{"command", "simulate"},
                                        {"coverage_gate", kCoverageGate},
                                        {"ess_not_reported", "NR when coverage < coverage_gate"},
                                        {"rows", summary}});
  return out;
}

/// Coverage of nominal intervals under each requested interval method.
inline Outputs cmd_coverage(const StudyOptions& o) {
  const auto cfg = config::load(o.config_path);
  detail::allow_study_keys(cfg, {"interval_methods"});
  const auto pop = detail::study_population(cfg);
  const auto seed = detail::resolve_seed(cfg, o);
  auto study = detail::base_study(cfg, pop, IntervalSpec{0.95, IntervalMethod::AnalyticNormal, 1000, 0, false, 1});
  if (!cfg.contains("superpopulation")) study.redraw_population = true;
  const auto predictors = detail::study_predictors(cfg, pop, o);
  const auto policies = detail::study_policies(cfg, {LambdaPolicy::fixed(1.0), LambdaPolicy::opt()});
  std::vector<IntervalMethod> methods{IntervalMethod::AnalyticNormal, IntervalMethod::BootstrapPercentile};
  if (cfg.contains("interval_methods")) {
    methods.clear();
    for (const auto& m : cfg.at("interval_methods")) methods.push_back(config::parse_interval_method(m.get<std::string>()));
  }

  Outputs out;
  out.resolved = detail::resolved_study(study, seed);
  csv::Table t;
  t.header = {"method", "rectification", "interval_method", "level", "coverage", "nominal_band_ok", "mean_ci_width",
              "mean_theta_hat", "theta_star", "replications"};
  Json rows = Json::array();
  for (const auto& [name, model] : predictors) {
    out.resolved["predictors"][name] = config::to_json(model);
    for (const auto& policy : policies) {
      for (auto m : methods) {
        study.predictor = model;
        study.policy = policy;
        study.interval.method = m;
        const auto r = run_replications(study, seed, o.workers);
        const bool ok = r.coverage >= 0.93 && r.coverage <= 0.97;
        t.rows.push_back({name, policy.label(), config::to_string(m), fmt(study.interval.level), fmt(r.coverage),
                          ok ? "true" : "false", fmt(r.mean_ci_width), fmt(r.mean_theta_hat), fmt(r.theta_star),
                          std::to_string(r.replications)});
        auto j = detail::report_json(r);
        j["method"] = name;
        j["rectification"] = policy.label();
        j["interval_method"] = config::to_string(m);
        rows.push_back(std::move(j));
      }
    }
  }
  out.files["coverage.csv"] = csv::to_string(t);
  out.files["summary.json"] = dump(Json{{"command", "coverage"}, {"band", {0.93, 0.97}}, {"rows", rows}});
  return out;
}

/// ESS gain of the power-tuned estimator across labeled-sample sizes.
inline Outputs cmd_ess_curve(const StudyOptions& o) {
  const auto cfg = config::load(o.config_path);
  detail::allow_study_keys(cfg, {"n_human_grid"});
  const auto pop = detail::study_population(cfg);
  const auto seed = detail::resolve_seed(cfg, o);
  auto study = detail::base_study(cfg, pop, IntervalSpec{0.95, IntervalMethod::AnalyticNormal, 1000, 0, false, 1});
  study.policy = LambdaPolicy::opt();
  const auto grid = config::detail::get<std::vector<std::size_t>>(cfg, "n_human_grid", {50, 100, 150, 200}, "config");
  const auto predictors = detail::study_predictors(cfg, pop, o);

  Outputs out;
  out.resolved = detail::resolved_study(study, seed);
  out.resolved["n_human_grid"] = grid;
  csv::Table t;
  t.header = {"method", "n_human", "ess_gain_pct", "ess_ci_low", "ess_ci_high", "ess_reported", "coverage",
              "mean_lambda", "replications"};
  Json rows = Json::array();
  for (const auto& [name, model] : predictors) {
    out.resolved["predictors"][name] = config::to_json(model);
    for (auto n : grid) {
      study.predictor = model;
      study.n_human = n;
      const auto r = run_replications(study, seed, o.workers);
      const double se = r.ess_gain_sd / std::sqrt(static_cast<double>(r.replications));
      const auto ci = normal_interval(r.ess_gain_raw_pct, se * se, study.interval.level);
      t.rows.push_back({name, std::to_string(n), fmt(r.ess_gain_raw_pct), fmt(ci.low), fmt(ci.high),
                        r.mean_ess_gain_pct ? "true" : "false", fmt(r.coverage), fmt(r.mean_lambda),
                        std::to_string(r.replications)});
      auto j = detail::report_json(r);
      j["method"] = name;
      j["n_human"] = n;
      rows.push_back(std::move(j));
    }
  }
  out.files["ess_curve.csv"] = csv::to_string(t);
  out.files["summary.json"] = dump(Json{{"command", "ess-curve"}, {"rows", rows}});
  return out;
}

inline csv::Table allocation_table(const std::vector<AllocationPoint>& points, std::size_t budget,
                                   const std::vector<AllocationPoint>& frontier) {
  csv::Table t;
  t.header = {"ft_share", "m_train", "n_rect", "regime", "mean_bias_pct", "bias_ci_low", "bias_ci_high",
              "mean_ess_gain_pct", "ess_ci_low", "ess_ci_high", "coverage", "mean_lambda", "cov_bias_bias",
              "cov_bias_ess", "cov_ess_ess", "on_frontier"};
  for (const auto& p : points) {
    bool on = false;
    for (const auto& f : frontier) on = on || f.ft_share == p.ft_share;
    t.rows.push_back({fmt(p.ft_share), std::to_string(p.m_train), std::to_string(p.n_rect),
                      to_string(classify_regime(p.m_train, budget)), fmt(p.mean_bias_pct), fmt(p.bias_ci.low),
                      fmt(p.bias_ci.high), fmt(p.mean_ess_gain_pct), fmt(p.ess_ci.low), fmt(p.ess_ci.high),
                      fmt(p.coverage), fmt(p.mean_lambda), fmt(p.cov_bias_bias), fmt(p.cov_bias_ess),
                      fmt(p.cov_ess_ess), on ? "true" : "false"});
  }
  return t;
}

/// Fine-tune versus rectify budget sweep with Pareto frontier and regimes.
inline Outputs cmd_allocate(const StudyOptions& o) {
  const auto cfg = config::load(o.config_path);
  detail::allow_study_keys(cfg, {"budget", "shares", "curve"});
  AllocationSweep sweep;
  sweep.population = detail::study_population(cfg);
  const auto seed = detail::resolve_seed(cfg, o);
  sweep.budget = config::detail::get<std::size_t>(cfg, "budget", sweep.budget, "config");
  sweep.shares = config::detail::get<std::vector<double>>(cfg, "shares", sweep.shares, "config");
  sweep.replications = config::detail::get<std::size_t>(cfg, "replications", sweep.replications, "config");
  sweep.curve = config::parse_curve(cfg.value("curve", Json::object()), sweep.population);
  sweep.interval = IntervalSpec{0.95, IntervalMethod::AnalyticNormal, 1000, 0, false, 1};
  if (cfg.contains("interval")) sweep.interval = config::parse_interval(cfg.at("interval"), sweep.interval);

  const auto points = run_allocation_sweep(sweep, seed, o.workers);
  const auto frontier = pareto_frontier(points);

  Outputs out;
  out.resolved = Json{{"seed", seed},
                      {"population", config::to_json(sweep.population)},
                      {"budget", sweep.budget},
                      {"shares", sweep.shares},
                      {"curve", config::to_json(sweep.curve)},
                      {"replications", sweep.replications},
                      {"interval", config::to_json(sweep.interval)}};
  out.files["allocation.csv"] = csv::to_string(allocation_table(points, sweep.budget, frontier));
  out.files["frontier.csv"] = csv::to_string(allocation_table(frontier, sweep.budget, frontier));

  csv::Table scatter;
  scatter.header = {"ft_share", "replication", "bias_pct", "ess_gain_pct"};
  for (const auto& p : points)
    for (std::size_t r = 0; r < p.bias_samples.size(); ++r)
      scatter.rows.push_back({fmt(p.ft_share), std::to_string(r), fmt(p.bias_samples[r]), fmt(p.ess_samples[r])});
  out.files["allocation_scatter.csv"] = csv::to_string(scatter);

  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].mean_bias_pct < points[best].mean_bias_pct) best = i;
  Json frontier_shares = Json::array();
  for (const auto& f : frontier) frontier_shares.push_back(f.ft_share);
  out.files["summary.json"] = dump(Json{{"command", "allocate"},
                                        {"budget", sweep.budget},
                                        {"bias_minimizing_share", points[best].ft_share},
                                        {"frontier_shares", frontier_shares}});
  return out;
}

/// Per-subgroup bias before and after recentering predictions on the
/// power-tuned estimate.
inline Outputs cmd_subgroup(const StudyOptions& o) {
  const auto cfg = config::load(o.config_path);
  detail::allow_study_keys(cfg, {"group_keys", "recentering"});
  const auto pop_cfg = detail::study_population(cfg);
  const auto seed = detail::resolve_seed(cfg, o);
  const auto predictors = detail::study_predictors(cfg, pop_cfg, o);
  const auto n_human = config::detail::get<std::size_t>(cfg, "n_human", 100, "config");
  const auto mode_name = config::detail::get<std::string>(cfg, "recentering", "additive", "config");
  if (mode_name != "additive" && mode_name != "multiplicative")
    throw config::detail::invalid("recentering must be 'additive' or 'multiplicative'");
  const auto mode = mode_name == "additive" ? Recentering::Additive : Recentering::Multiplicative;

  const auto pop = generate_population(pop_cfg, substream_seed(seed, "population", 0));
  std::vector<std::string> keys = pop.attribute_names;
  if (cfg.contains("group_keys")) keys = config::detail::get<std::vector<std::string>>(cfg, "group_keys", {}, "config");

  Outputs out;
  out.resolved = Json{{"seed", seed},
                      {"population", config::to_json(pop_cfg)},
                      {"n_human", n_human},
                      {"group_keys", keys},
                      {"recentering", mode_name}};
  csv::Table t;
  t.header = {"method", "attribute", "group", "n_group", "bias_before_pct", "bias_after_pct", "abs_delta",
              "rel_delta_pct"};
  Json rows = Json::array();
  for (const auto& [name, model] : predictors) {
    out.resolved["predictors"][name] = config::to_json(model);
    const auto yhat = simulate_predictor(pop, model, substream_seed(seed, "predictor", 0));
    auto rng = make_rng(seed, "split", 0);
    const auto [hi, ui] = split_indices(pop.size(), n_human, rng);
    std::vector<double> y(hi.size()), yh(hi.size()), yu(ui.size());
    for (std::size_t j = 0; j < hi.size(); ++j) {
      y[j] = pop.y[hi[j]];
      yh[j] = yhat[hi[j]];
    }
    for (std::size_t i = 0; i < ui.size(); ++i) yu[i] = yhat[ui[i]];
    const auto lambda = lambda_opt_mean(y, yh, yu).lambda;
    const auto est = rectified_mean(y, yh, yu, lambda);
    Json entry{{"method", name},
               {"lambda", lambda},
               {"theta_rec", est.theta_hat},
               {"theta_star", pop.theta_star},
               {"population_bias_before_pct", bias_pct(stats::mean(yhat), pop.theta_star)},
               {"population_bias_after_pct", bias_pct(est.theta_hat, pop.theta_star)},
               {"individual_mae", individual_mae(pop.y, yhat)}};
    for (const auto& key : keys) {
      const auto labels = pop.labels(key);
      for (const auto& r : subgroup_bias_report(pop.y, yhat, labels, est.theta_hat, mode))
        t.rows.push_back({name, key, r.group_label, std::to_string(r.n_group), fmt(r.bias_before_pct),
                          fmt(r.bias_after_pct), fmt(r.abs_delta), fmt(r.rel_delta_pct)});
    }
    rows.push_back(std::move(entry));
  }
  out.files["subgroup.csv"] = csv::to_string(t);
  out.files["summary.json"] = dump(Json{{"command", "subgroup"}, {"rows", rows}});
  return out;
}

}  // namespace ppsurvey::cli
