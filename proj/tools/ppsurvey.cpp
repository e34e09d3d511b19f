// ppsurvey: prediction-powered survey estimation from the command line.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using namespace ppsurvey;

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalError = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes every file only after the whole run succeeded. Reports go through a
// temp name + rename so a reader never sees half a file.
void write_outputs(const cli::Outputs& out, const std::string& dir, const std::string& command, unsigned workers) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cli", "cannot create output directory '" + dir + "': " + ec.message());

  auto files = out.files;
  cli::Json sidecar{{"command", command},
                    {"config", out.resolved},
                    {"workers", workers},
                    {"timestamp", utc_timestamp()}};
  files["run_config.json"] = cli::dump(sidecar);

  for (const auto& [name, body] : files) {
    const fs::path target = fs::path(dir) / name;
    const fs::path tmp = fs::path(dir) / ("." + name + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw Error(ErrorCode::Io, "cli", "cannot write '" + tmp.string() + "'");
      f << body;
      if (!f) throw Error(ErrorCode::Io, "cli", "write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::Io, "cli", "cannot rename into '" + target.string() + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-powered estimation for survey data"};
  app.require_subcommand(1);

  std::string out_dir;
  if (const char* env = std::getenv("PPSURVEY_OUT_DIR")) out_dir = env;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--out", out_dir, "output directory (default: $PPSURVEY_OUT_DIR)");
  app.add_option("--workers", workers, "worker threads; results do not depend on this")->check(CLI::PositiveNumber);

  // estimate
  cli::EstimateOptions est;
  std::string id_col, y_col = "y", covariates, groups, map_path, ci_method = "bootstrap-percentile";
  std::uint64_t est_seed = 0;
  auto* estimate = app.add_subcommand("estimate", "rectified estimate from a labeled and an unlabeled CSV");
  estimate->add_option("--labeled", est.labeled_path, "CSV with responses and predictions")->required();
  estimate->add_option("--unlabeled", est.unlabeled_path, "CSV with predictions only")->required();
  estimate->add_option("--id-col", id_col, "respondent id column");
  estimate->add_option("--y-col", y_col, "response column")->capture_default_str();
  estimate->add_option("--yhat-col", est.schema.prediction_column, "prediction column")->capture_default_str();
  estimate->add_option("--covariates", covariates, "comma-separated covariate columns");
  estimate->add_option("--groups", groups, "comma-separated group columns");
  estimate->add_option("--map", map_path, "ordinal map file (token = value per line)");
  estimate->add_option("--estimand", est.estimand, "mean | quantile | linear-regression | logistic-regression")
      ->capture_default_str();
  estimate->add_option("--q", est.q, "quantile level")->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--lambda", est.lambda, "'opt' or a fixed value in [0,1]")->capture_default_str();
  estimate->add_option("--ci", ci_method, "analytic-normal | bootstrap-percentile")->capture_default_str();
  estimate->add_option("--level", est.interval.level, "confidence level")->capture_default_str();
  estimate->add_option("--B", est.interval.bootstrap_b, "bootstrap resamples")->capture_default_str();
  estimate->add_flag("--retune", est.interval.retune_lambda, "re-tune lambda inside each bootstrap resample");
  estimate->add_option("--seed", est_seed, "bootstrap seed")->capture_default_str();

  // study commands share their options
  cli::StudyOptions study;
  std::uint64_t study_seed = 0;
  std::string profile;
  auto add_study = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", study.config_path, "JSON config")->required();
    sub->add_option("--seed", study_seed, "master seed (overrides config)");
    sub->add_option("--profile", profile, "run a single named predictor profile");
    return sub;
  };
  auto* simulate = add_study("simulate", "replication study across predictors and rectification policies");
  auto* coverage = add_study("coverage", "empirical coverage of nominal intervals");
  auto* ess_curve = add_study("ess-curve", "ESS gain across labeled-sample sizes");
  auto* allocate = add_study("allocate", "fine-tune versus rectify budget allocation sweep");
  auto* subgroup = add_study("subgroup", "subgroup bias before and after recentering");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }

  auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "cli", "no output directory: pass --out or set PPSURVEY_OUT_DIR");
    cli::Outputs out;
    if (sub == estimate) {
      if (!id_col.empty()) est.schema.id_column = id_col;
      est.schema.response_column = y_col;
      est.schema.covariate_columns = split_list(covariates);
      est.schema.group_columns = split_list(groups);
      if (!map_path.empty()) est.map_path = map_path;
      est.interval.method = config::parse_interval_method(ci_method);
      est.interval.seed = est_seed;
      est.interval.workers = workers;
      out = cli::cmd_estimate(est);
    } else {
      if (sub->count("--seed")) study.seed = study_seed;
      if (!profile.empty()) study.profile = profile;
      study.workers = workers;
      if (sub == simulate) out = cli::cmd_simulate(study);
      else if (sub == coverage) out = cli::cmd_coverage(study);
      else if (sub == ess_curve) out = cli::cmd_ess_curve(study);
      else if (sub == allocate) out = cli::cmd_allocate(study);
      else if (sub == subgroup) out = cli::cmd_subgroup(study);
    }
    write_outputs(out, out_dir, command, workers);
    return 0;
  } catch (const Error& e) {
    std::cerr << "ppsurvey " << command << ": " << e.what() << "\n";
    return e.numerical() ? kNumericalError : kInputError;
  } catch (const cli::Json::exception& e) {
    std::cerr << "ppsurvey " << command << ": config: " << e.what() << "\n";
    return kInputError;
  }
}
