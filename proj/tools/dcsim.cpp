// dcsim: run, sweep, validate and inspect data-collaboration experiments.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure (including
// a method that failed in some trial; its outputs are still written).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcsim/dcsim.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out_dir = "dcsim-out";
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the base seed");
  cmd->add_option("--trials", c.trials, "override the trial count");
  cmd->add_option("--out-dir", c.out_dir, "directory for output files")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "trials run in parallel (results do not depend on it)")->capture_default_str();
}

dcsim::ExperimentConfig load(const Common& c) {
  auto cfg = dcsim::load_config(c.config);
  dcsim::apply_overrides(cfg, c.seed, c.trials);
  return cfg;
}

int cmd_run(const Common& c) {
  const auto prep = dcsim::prepare_experiment(load(c));
  dcsim::RunTimings timings;
  const auto report = dcsim::run_experiment(prep, c.jobs, &timings);
  dcsim::emit_report(report, c.out_dir);
  dcsim::emit_timings(timings, c.out_dir);
  std::cout << dcsim::summary_table(report);
  std::size_t failed = 0;
  for (const auto& rec : report.trials) {
    if (!rec.error) continue;
    ++failed;
    std::cerr << "trial " << rec.trial << " " << rec.method << ": " << *rec.error << "\n";
  }
  std::cerr << "wrote " << (fs::path(c.out_dir) / "report.json").string() << " (" << timings.total_ms / 1000.0 << " s)\n";
  return failed ? kRuntimeError : kOk;
}

int cmd_sweep(const Common& c, const std::vector<std::size_t>& k, const std::vector<double>& alpha) {
  const auto cfg = load(c);
  dcsim::validate_config(cfg);
  const auto sweep = dcsim::run_sweep(cfg, k, alpha, c.jobs);
  dcsim::emit_sweep(sweep, c.out_dir);
  for (const auto& w : sweep.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "k\\alpha";
  for (double a : alpha) std::cout << "\t" << a;
  std::cout << "\n";
  for (std::size_t i = 0; i < k.size(); ++i) {
    std::cout << k[i];
    for (double v : sweep.mean_acc[i]) std::cout << "\t" << v;
    std::cout << "\n";
  }
  return kOk;
}

int cmd_validate(const std::string& path) {
  const auto prep = dcsim::prepare_experiment(dcsim::load_config(path));
  std::cout << "ok: " << prep.config.methods.size() << " methods, " << prep.config.trials << " trials, "
            << prep.features << " features, " << prep.train_rows << " training rows per trial\n";
  return kOk;
}

int cmd_report(const std::string& path, const std::string& out_dir) {
  fs::path p = path;
  if (fs::is_directory(p)) p /= "report.json";
  const auto report = dcsim::read_report(p);
  if (!out_dir.empty()) dcsim::emit_report(report, out_dir);
  std::cout << dcsim::summary_table(report);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-collaboration analysis simulator"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "run every configured method over all trials");
  add_common(run, run_opts);

  auto* sweep = app.add_subcommand("sweep", "mean DC(SMOTE) ACC over a (k, alpha) grid");
  add_common(sweep, sweep_opts);
  std::vector<std::size_t> k_grid;
  std::vector<double> alpha_grid;
  sweep->add_option("--k", k_grid, "neighbour counts, comma separated")->required()->delimiter(',');
  sweep->add_option("--alpha", alpha_grid, "extrapolation bounds, comma separated")->required()->delimiter(',');

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", validate_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string report_path, report_out;
  auto* report = app.add_subcommand("report", "print the summary of a stored report");
  report->add_option("path", report_path, "report.json or the directory holding it")->required();
  report->add_option("--out-dir", report_out, "also re-emit the tables into this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts, k_grid, alpha_grid);
    if (*validate) return cmd_validate(validate_path);
    if (*report) return cmd_report(report_path, report_out);
  } catch (const dcsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}
