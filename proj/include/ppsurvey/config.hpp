#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "allocation.hpp"
#include "error.hpp"
#include "simulation.hpp"
#include "uncertainty.hpp"

// JSON study configuration. Every section is optional and falls back to the
// defaults of the corresponding struct; unknown keys are rejected so typos
// do not silently change a study.
namespace ppsurvey::config {

using Json = nlohmann::ordered_json;

namespace detail {

inline Error invalid(const std::string& what) { return Error(ErrorCode::InvalidConfig, "config", what); }

inline void allow_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw invalid(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw invalid("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
T get(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw invalid("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace detail

inline PopulationConfig parse_population(const Json& j) {
  detail::allow_keys(j, {"size", "base_mean", "noise_sd", "theta_star", "attributes"}, "population");
  PopulationConfig c;
  c.size = detail::get<std::size_t>(j, "size", c.size, "population");
  c.base_mean = detail::get<double>(j, "base_mean", c.base_mean, "population");
  c.noise_sd = detail::get<double>(j, "noise_sd", c.noise_sd, "population");
  const auto mode = detail::get<std::string>(j, "theta_star", "empirical", "population");
  if (mode == "empirical")
    c.theta_star_mode = ThetaStarMode::Empirical;
  else if (mode == "analytic")
    c.theta_star_mode = ThetaStarMode::Analytic;
  else
    throw detail::invalid("theta_star must be 'empirical' or 'analytic'");
  if (j.contains("attributes")) {
    for (const auto& a : j.at("attributes")) {
      detail::allow_keys(a, {"name", "levels", "probabilities", "effects", "noise_scales"}, "attribute");
      Attribute attr;
      attr.name = detail::get<std::string>(a, "name", "", "attribute");
      attr.levels = detail::get<std::vector<std::string>>(a, "levels", {}, "attribute");
      attr.probabilities = detail::get<std::vector<double>>(a, "probabilities", {}, "attribute");
      attr.effects = detail::get<std::vector<double>>(a, "effects", {}, "attribute");
      attr.noise_scales = detail::get<std::vector<double>>(a, "noise_scales", {}, "attribute");
      c.attributes.push_back(std::move(attr));
    }
  }
  c.validate();
  return c;
}

inline Json to_json(const PopulationConfig& c) {
  Json j;
  j["size"] = c.size;
  j["base_mean"] = c.base_mean;
  j["noise_sd"] = c.noise_sd;
  j["theta_star"] = c.theta_star_mode == ThetaStarMode::Empirical ? "empirical" : "analytic";
  j["attributes"] = Json::array();
  for (const auto& a : c.attributes) {
    Json ja;
    ja["name"] = a.name;
    ja["levels"] = a.levels;
    ja["probabilities"] = a.probabilities;
    ja["effects"] = a.effects;
    ja["noise_scales"] = a.noise_scales;
    j["attributes"].push_back(std::move(ja));
  }
  return j;
}

inline LearningCurve parse_curve(const Json& j, const PopulationConfig& pop) {
  detail::allow_keys(j, {"b0", "tau", "s0", "kappa"}, "curve");
  LearningCurve c;
  c.s0 = 2.0 * pop.noise_sd;
  c.b0 = detail::get<double>(j, "b0", c.b0, "curve");
  c.tau = detail::get<double>(j, "tau", c.tau, "curve");
  c.s0 = detail::get<double>(j, "s0", c.s0, "curve");
  c.kappa = detail::get<double>(j, "kappa", c.kappa, "curve");
  c.validate();
  return c;
}

inline Json to_json(const LearningCurve& c) { return Json{{"b0", c.b0}, {"tau", c.tau}, {"s0", c.s0}, {"kappa", c.kappa}}; }

inline PredictorKind parse_predictor_kind(const std::string& s) {
  if (s == "additive-bias") return PredictorKind::AdditiveBias;
  if (s == "multiplicative-bias") return PredictorKind::MultiplicativeBias;
  if (s == "subgroup-bias") return PredictorKind::SubgroupBias;
  if (s == "noisy-oracle") return PredictorKind::NoisyOracle;
  if (s == "learning-curve") return PredictorKind::LearningCurve;
  throw detail::invalid("unknown predictor kind '" + s + "'");
}

inline PredictorModel parse_predictor(const Json& j, const PopulationConfig& pop) {
  detail::allow_keys(j,
                     {"profile", "kind", "bias", "factor", "noise_sd", "group_attribute", "group_offsets",
                      "correlation_target", "curve", "m_train", "seed_stream"},
                     "predictor");
  PredictorModel m;
  if (j.contains("profile")) m = predictor_profile(detail::get<std::string>(j, "profile", "", "predictor"));
  if (j.contains("kind")) m.kind = parse_predictor_kind(detail::get<std::string>(j, "kind", "", "predictor"));
  m.bias = detail::get<double>(j, "bias", m.bias, "predictor");
  m.factor = detail::get<double>(j, "factor", m.factor, "predictor");
  m.noise_sd = detail::get<double>(j, "noise_sd", m.noise_sd, "predictor");
  m.group_attribute = detail::get<std::string>(j, "group_attribute", m.group_attribute, "predictor");
  if (j.contains("group_offsets")) m.group_offsets = detail::get<std::map<std::string, double>>(j, "group_offsets", {}, "predictor");
  if (j.contains("correlation_target")) {
    if (j.at("correlation_target").is_null())
      m.correlation_target.reset();
    else
      m.correlation_target = detail::get<double>(j, "correlation_target", 0.0, "predictor");
  }
  if (j.contains("curve")) m.curve = parse_curve(j.at("curve"), pop);
  m.m_train = detail::get<std::size_t>(j, "m_train", m.m_train, "predictor");
  m.seed_stream = detail::get<std::string>(j, "seed_stream", m.seed_stream, "predictor");
  m.validate();
  return m;
}

inline Json to_json(const PredictorModel& m) {
  Json j;
  j["kind"] = to_string(m.kind);
  j["bias"] = m.bias;
  j["factor"] = m.factor;
  j["noise_sd"] = m.noise_sd;
  j["group_attribute"] = m.group_attribute;
  j["group_offsets"] = m.group_offsets;
  j["correlation_target"] = m.correlation_target ? Json(*m.correlation_target) : Json(nullptr);
  j["curve"] = to_json(m.curve);
  j["m_train"] = m.m_train;
  j["seed_stream"] = m.seed_stream;
  return j;
}

inline IntervalMethod parse_interval_method(const std::string& s) {
  if (s == "analytic-normal") return IntervalMethod::AnalyticNormal;
  if (s == "bootstrap-percentile") return IntervalMethod::BootstrapPercentile;
  throw detail::invalid("interval method must be 'analytic-normal' or 'bootstrap-percentile'");
}

inline std::string to_string(IntervalMethod m) {
  return m == IntervalMethod::AnalyticNormal ? "analytic-normal" : "bootstrap-percentile";
}

inline IntervalSpec parse_interval(const Json& j, IntervalSpec spec = {}) {
  detail::allow_keys(j, {"level", "method", "B", "retune_lambda"}, "interval");
  spec.level = detail::get<double>(j, "level", spec.level, "interval");
  if (j.contains("method")) spec.method = parse_interval_method(detail::get<std::string>(j, "method", "", "interval"));
  spec.bootstrap_b = detail::get<std::size_t>(j, "B", spec.bootstrap_b, "interval");
  spec.retune_lambda = detail::get<bool>(j, "retune_lambda", spec.retune_lambda, "interval");
  spec.validate();
  return spec;
}

inline Json to_json(const IntervalSpec& s) {
  return Json{{"level", s.level}, {"method", to_string(s.method)}, {"B", s.bootstrap_b}, {"retune_lambda", s.retune_lambda}};
}

inline LambdaPolicy parse_policy(const Json& j) {
  if (j.is_number()) {
    const double l = j.get<double>();
    if (!(l >= 0.0 && l <= 1.0)) throw detail::invalid("lambda must lie in [0,1]");
    return LambdaPolicy::fixed(l);
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "opt") return LambdaPolicy::opt();
    if (s == "none") return LambdaPolicy::unrectified();
  }
  throw detail::invalid("lambda policy must be a number in [0,1], \"opt\" or \"none\"");
}

inline Json to_json(const LambdaPolicy& p) {
  switch (p.kind) {
    case LambdaPolicy::Kind::Fixed: return Json(p.lambda);
    case LambdaPolicy::Kind::Opt: return Json("opt");
    case LambdaPolicy::Kind::Unrectified: return Json("none");
  }
  return Json(nullptr);
}

inline Json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "config", "cannot open config '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config", "'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace ppsurvey::config
