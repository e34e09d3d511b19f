// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Sizes and tolerances are the contractual ones; nothing is scaled
// down here.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include <ppsurvey/config.hpp>
#include <ppsurvey/ppsurvey.hpp>

#include "support.hpp"

using namespace ppsurvey;
namespace ts = testing_support;
namespace fs = std::filesystem;
using V = std::vector<double>;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome& out;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      out.pass = false;
      if (!out.detail.empty()) out.detail += "; ";
      out.detail += what;
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

PopulationConfig survey_population(std::size_t size) {
  PopulationConfig c;
  c.size = size;
  c.base_mean = 3.0;
  c.noise_sd = 1.0;
  c.attributes.push_back({"age", {"18-29", "30-49", "50-64", "65+"}, {0.2, 0.33, 0.26, 0.21}, {-0.4, -0.1, 0.15, 0.45}, {}});
  c.attributes.push_back({"sex", {"F", "M"}, {0.52, 0.48}, {0.1, -0.11}, {}});
  return c;
}

// 1. rectified mean reductions
Outcome identities() {
  Outcome o;
  Check c{o};
  ts::Gen g(101);
  double worst0 = 0, worst1 = 0;
  for (int i = 0; i < 1000; ++i) {
    auto in = ts::random_instance(g, g.index(2, 200), g.index(1, 2000));
    const double h = ts::plain_mean(in.y);
    worst0 = std::max(worst0, std::abs(rectified_mean(in.y, in.yhat_h, in.yhat_u, 0.0).theta_hat - h));
    const double u = ts::plain_mean(in.yhat_u);
    worst1 = std::max(worst1, std::abs(rectified_mean(in.y, in.y, in.yhat_u, 1.0).theta_hat - u));
  }
  c.require(worst0 <= 1e-12, "lambda=0 max deviation " + num(worst0));
  c.require(worst1 <= 1e-12, "perfect lambda=1 max deviation " + num(worst1));
  o.detail = o.pass ? "max deviations " + num(worst0) + ", " + num(worst1) : o.detail;
  return o;
}

// 2. closed-form tuning against a fine grid
Outcome tuning_vs_grid() {
  Outcome o;
  Check c{o};
  ts::Gen g(202);
  double worst = 0;
  for (int i = 0; i < 500; ++i) {
    const auto in = ts::random_instance(g, 100, 2000);
    const double a = lambda_opt_mean(in.y, in.yhat_h, in.yhat_u).lambda;
    const double b = lambda_grid_search(in.y, in.yhat_h, in.yhat_u, 1e-4).lambda;
    worst = std::max(worst, std::abs(a - b));
  }
  c.require(worst <= 1e-3, "max |closed - grid| " + num(worst));
  if (o.pass) o.detail = "max |closed - grid| " + num(worst);
  return o;
}

// 3. MC unbiasedness under a 1.3x multiplicative predictor
Outcome unbiasedness(unsigned workers) {
  Outcome o;
  Check c{o};
  ReplicationStudy s;
  s.population = survey_population(5100);
  s.predictor = PredictorModel::multiplicative(1.3, 1.0);
  s.n_human = 100;
  s.replications = 5000;
  s.policy = LambdaPolicy::unrectified();
  const auto raw = run_replications(s, 303, workers);
  s.policy = LambdaPolicy::opt();
  const auto rec = run_replications(s, 303, workers);
  const double z = std::abs(rec.mean_theta_hat - rec.theta_star) / rec.mc_se;
  c.require(raw.bias_of_mean_pct >= 28 && raw.bias_of_mean_pct <= 32, "unrectified bias " + num(raw.bias_of_mean_pct));
  c.require(rec.bias_of_mean_pct < 0.5, "rectified MC-mean bias " + num(rec.bias_of_mean_pct));
  c.require(z < 3, "rectified error " + num(z) + " MC s.e.");
  if (o.pass)
    o.detail = "unrectified " + num(raw.bias_of_mean_pct) + "%, rectified " + num(rec.bias_of_mean_pct) + "% (" + num(z) +
               " s.e.)";
  return o;
}

// 4. coverage of analytic and bootstrap intervals
Outcome coverage(unsigned workers) {
  Outcome o;
  Check c{o};
  ReplicationStudy s;
  s.population = survey_population(500);
  s.population.theta_star_mode = ThetaStarMode::Analytic;
  s.redraw_population = true;
  s.predictor = PredictorModel::additive(0.4, 0.8);
  s.n_human = 100;
  s.replications = 2000;
  std::string detail;
  for (auto policy : {LambdaPolicy::fixed(1.0), LambdaPolicy::opt()}) {
    for (auto method : {IntervalMethod::AnalyticNormal, IntervalMethod::BootstrapPercentile}) {
      s.policy = policy;
      s.interval = IntervalSpec{0.95, method, 1000, 0, false, 1};
      const auto r = run_replications(s, 404, workers);
      const std::string tag = policy.label() + "/" + config::to_string(method);
      c.require(r.coverage >= 0.93 && r.coverage <= 0.97, tag + " coverage " + num(r.coverage));
      detail += (detail.empty() ? "" : ", ") + tag + " " + num(r.coverage);
    }
  }
  if (o.pass) o.detail = detail;
  return o;
}

// 5. ESS sign pattern
Outcome sign_pattern(unsigned workers) {
  Outcome o;
  Check c{o};
  ReplicationStudy s;
  s.population = survey_population(2100);
  s.n_human = 100;
  s.replications = 2000;
  s.predictor = PredictorModel::noisy_oracle(0.2);
  s.policy = LambdaPolicy::fixed(1.0);
  const auto weak1 = run_replications(s, 505, workers);
  s.policy = LambdaPolicy::opt();
  const auto weak_opt = run_replications(s, 505, workers);
  s.predictor = PredictorModel::noisy_oracle(0.9);
  const auto strong_opt = run_replications(s, 505, workers);
  c.require(weak1.ess_gain_raw_pct < 0, "rho=0.2 lambda=1 ESS " + num(weak1.ess_gain_raw_pct));
  c.require(weak_opt.ess_gain_raw_pct >= -1, "rho=0.2 lambda_opt ESS " + num(weak_opt.ess_gain_raw_pct));
  c.require(strong_opt.ess_gain_raw_pct > 0, "rho=0.9 lambda_opt ESS " + num(strong_opt.ess_gain_raw_pct));
  if (o.pass)
    o.detail = "rho=0.2: lambda=1 " + num(weak1.ess_gain_raw_pct) + "%, opt " + num(weak_opt.ess_gain_raw_pct) +
               "%; rho=0.9 opt " + num(strong_opt.ess_gain_raw_pct) + "%";
  return o;
}

// 6. ESS gain shrinks with more human labels
Outcome ess_trend(unsigned workers) {
  Outcome o;
  Check c{o};
  const auto cfg = config::load(std::string(PPSURVEY_DATA_DIR) + "/configs/ess_curve.json");
  ReplicationStudy s;
  s.population = config::parse_population(cfg.at("population"));
  s.predictor = predictor_profile("domain-ft");
  s.policy = LambdaPolicy::opt();
  s.replications = 2000;
  V gains;
  for (std::size_t n : {50, 100, 150, 200}) {
    s.n_human = n;
    gains.push_back(run_replications(s, 606, workers).ess_gain_raw_pct);
  }
  int inversions = 0;
  for (std::size_t i = 1; i < gains.size(); ++i) {
    const double rise = gains[i] - gains[i - 1];
    if (rise > 0) {
      ++inversions;
      c.require(rise <= 0.5, "inversion of " + num(rise) + " points");
    }
  }
  c.require(inversions <= 1, std::to_string(inversions) + " inversions");
  std::string d;
  for (double v : gains) d += (d.empty() ? "" : " > ") + num(v);
  if (o.pass) o.detail = "ESS % at n=50..200: " + d;
  return o;
}

// 7. analytic variance against replication variance
Outcome variance_validity(unsigned workers) {
  Outcome o;
  Check c{o};
  ReplicationStudy s;
  s.population = survey_population(10100);
  s.redraw_population = true;
  s.predictor = PredictorModel::multiplicative(1.2, 0.8);
  s.policy = LambdaPolicy::fixed(0.7);
  s.n_human = 100;
  s.replications = 20000;
  const auto r = run_replications(s, 707, workers);
  const double rel = std::abs(r.mean_variance / r.empirical_variance - 1.0);
  c.require(rel <= 0.05, "relative gap " + num(rel));
  if (o.pass) o.detail = "analytic " + num(r.mean_variance) + " vs empirical " + num(r.empirical_variance);
  return o;
}

// 8. estimand reductions against independent oracles
Outcome estimand_reductions() {
  Outcome o;
  Check c{o};
  std::size_t quantile_cases = 0, quantile_bad = 0;
  for (std::size_t n = 2; n <= 8; ++n) {
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      V y(n);
      std::size_t r = code;
      for (auto& v : y) {
        v = double(1 + r % 3);
        r /= 3;
      }
      for (double q : {0.1, 0.2, 0.25, 1.0 / 3.0, 0.5, 0.6, 0.75, 0.9}) {
        ++quantile_cases;
        if (rectified_quantile(y, V(n, 0.0), V{2.0}, q, 0.0).theta_hat != ts::brute_quantile(y, q)) ++quantile_bad;
      }
    }
  }
  c.require(quantile_bad == 0, std::to_string(quantile_bad) + " quantile mismatches");

  ts::Gen g(808);
  double lin = 0, logit = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 20 + g.index(0, 40);
    ts::Mat xh;
    V y, yb, yh;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = g.normal(), b = g.normal();
      xh.push_back({1.0, a, b});
      y.push_back(0.5 + a - 2 * b + g.normal());
      yb.push_back(g.uniform() < 1 / (1 + std::exp(-(0.2 + 0.8 * a - 0.5 * b))) ? 1.0 : 0.0);
      yh.push_back(g.uniform());
    }
    Eigen::MatrixXd x(n, 3), xu(30, 3);
    for (std::size_t i = 0; i < n; ++i) x.row(i) << 1, xh[i][1], xh[i][2];
    for (int i = 0; i < 30; ++i) xu.row(i) << 1, g.normal(), g.normal();
    const V yu(30, 0.5);
    const auto ls = ts::least_squares(xh, y);
    const auto fit = rectified_linear_regression(x, y, yh, xu, yu, 0.0);
    const auto irls = ts::irls_logistic(xh, yb);
    const auto lfit = rectified_logistic_regression(x, yb, yh, xu, yu, 0.0);
    for (int k = 0; k < 3; ++k) {
      lin = std::max(lin, std::abs(fit.coefficients(k) - ls[k]));
      logit = std::max(logit, std::abs(lfit.coefficients(k) - irls[k]));
    }
  }
  c.require(lin <= 1e-8, "linear max deviation " + num(lin));
  c.require(logit <= 1e-6, "logistic max deviation " + num(logit));
  if (o.pass)
    o.detail = std::to_string(quantile_cases) + " quantile cases exact; linear " + num(lin) + ", logistic " + num(logit);
  return o;
}

// 9. allocation sweep under the shipped learning curve
Outcome allocation(unsigned workers) {
  Outcome o;
  Check c{o};
  const auto cfg = config::load(std::string(PPSURVEY_DATA_DIR) + "/configs/allocate.json");
  AllocationSweep s;
  s.population = config::parse_population(cfg.at("population"));
  s.curve = config::parse_curve(cfg.at("curve"), s.population);
  s.budget = 1000;
  s.shares = {0.1, 0.2, 0.4, 0.6, 0.8};
  s.replications = 100;
  const auto pts = run_allocation_sweep(s, cfg.value("seed", 3u), workers);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].mean_bias_pct < pts[best].mean_bias_pct) best = i;
  c.require(pts[best].ft_share != 0.8, "bias minimized at the 0.8 share");

  std::vector<double> brute;
  for (const auto& a : pts) {
    bool dominated = false;
    for (const auto& b : pts)
      dominated = dominated || (b.mean_bias_pct <= a.mean_bias_pct && b.mean_ess_gain_pct >= a.mean_ess_gain_pct &&
                                (b.mean_bias_pct < a.mean_bias_pct || b.mean_ess_gain_pct > a.mean_ess_gain_pct));
    if (!dominated) brute.push_back(a.ft_share);
  }
  std::vector<double> front;
  for (const auto& p : pareto_frontier(pts)) front.push_back(p.ft_share);
  c.require(front == brute, "frontier differs from brute force");

  const std::map<std::size_t, Regime> want{{100, Regime::Conservative}, {200, Regime::Conservative},
                                           {400, Regime::Balanced},     {600, Regime::Aggressive},
                                           {800, Regime::Aggressive}};
  const auto regimes = classify_regimes(pts, s.budget);
  for (std::size_t i = 0; i < pts.size(); ++i)
    c.require(regimes[i] == want.at(pts[i].m_train), "regime of m_train " + std::to_string(pts[i].m_train));
  if (o.pass) {
    std::string f;
    for (double v : front) f += (f.empty() ? "" : ",") + num(v);
    o.detail = "bias minimized at share " + num(pts[best].ft_share) + "; frontier {" + f + "}";
  }
  return o;
}

// 10. CLI determinism across reruns and worker counts
int run(const std::string& cmd) {
  const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::map<std::string, std::string> reports(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "run_config.json") out[e.path().filename().string()] = ts::slurp(e.path().string());
  return out;
}

Outcome determinism() {
  Outcome o;
  Check c{o};
  ts::TempDir tmp("determinism");
  const std::string data = PPSURVEY_DATA_DIR;
  const auto small = tmp.write("study.json", R"({
    "population": {"size": 700, "base_mean": 3.0, "noise_sd": 1.0,
                   "attributes": [{"name": "sex", "levels": ["F", "M"], "probabilities": [0.5, 0.5], "effects": [0.2, -0.2]}]},
    "replications": 40, "interval": {"B": 100}
  })");
  const std::vector<std::pair<std::string, std::string>> commands{
      {"estimate", "estimate --labeled " + data + "/frames/labeled.csv --unlabeled " + data +
                       "/frames/unlabeled.csv --id-col respondent_id --y-col response --map " + data +
                       "/maps/atp_6option.map --B 500 --seed 17"},
      {"simulate", "simulate --config " + small + " --seed 17"},
      {"coverage", "coverage --config " + small + " --seed 17 --profile persona"},
      {"ess-curve", "ess-curve --config " + data + "/configs/ess_curve.json --seed 17"},
      {"allocate", "allocate --config " + data + "/configs/allocate.json --seed 17"},
      {"subgroup", "subgroup --config " + data + "/configs/subgroup.json --seed 17"}};
  for (const auto& [name, args] : commands) {
    std::vector<std::map<std::string, std::string>> runs;
    int k = 0;
    for (int workers : {1, 1, 3}) {
      const auto dir = tmp.path / (name + std::to_string(k++));
      const int rc = run(std::string(PPSURVEY_CLI) + " --out " + dir.string() + " --workers " + std::to_string(workers) +
                         " " + args);
      c.require(rc == 0, name + " exited " + std::to_string(rc));
      if (rc == 0) runs.push_back(reports(dir));
    }
    if (runs.size() == 3) {
      c.require(!runs[0].empty(), name + " wrote no reports");
      c.require(runs[0] == runs[1], name + " differs between identical reruns");
      c.require(runs[0] == runs[2], name + " differs between worker counts");
    }
  }
  if (o.pass) o.detail = "6 commands byte-identical across 2 reruns and workers 1/3";
  return o;
}

}  // namespace

int main() {
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "rectified-mean identities", 5, identities},
      {2, "tuned lambda vs grid search", 10, tuning_vs_grid},
      {3, "MC unbiasedness", 120, [&] { return unbiasedness(workers); }},
      {4, "interval coverage", 300, [&] { return coverage(workers); }},
      {5, "ESS sign pattern", 0, [&] { return sign_pattern(workers); }},
      {6, "ESS trend in n_human", 0, [&] { return ess_trend(workers); }},
      {7, "analytic variance validity", 0, [&] { return variance_validity(workers); }},
      {8, "estimand reductions", 0, estimand_reductions},
      {9, "allocation sweep", 300, [&] { return allocation(workers); }},
      {10, "CLI determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.budget_s > 0 && secs > cr.budget_s) {
      out.pass = false;
      out.detail += (out.detail.empty() ? "" : "; ") + std::string("runtime over ") + num(cr.budget_s) + " s";
    }
    if (!out.pass) ++failures;
    std::printf("%s %2d %-28s %7.1fs  %s\n", out.pass ? "PASS" : "FAIL", cr.id, cr.name, secs, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
