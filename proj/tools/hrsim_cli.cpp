// Command-line front end: cohort simulation, marginal-effect oracle,
// full study runs, and report rendering.
//
// Exit codes: 0 success, 2 validation/usage error, 3 missing artifact,
// 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hrsim/oracle.hpp"
#include "hrsim/sim_engine.hpp"
#include "hrsim/study.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitMissingArtifact = 3;
constexpr int kExitNumerical = 4;

std::vector<std::pair<double, double>> parse_scenarios(const std::string& spec) {
  std::vector<std::pair<double, double>> points;
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("--scenarios expects logHR_E:logHR_L pairs, got '" +
                                  item + "'");
    points.emplace_back(std::stod(item.substr(0, colon)),
                        std::stod(item.substr(colon + 1)));
  }
  if (points.empty()) throw std::invalid_argument("--scenarios: empty list");
  return points;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo study of hazard-ratio non-collapsibility and "
               "built-in selection bias"};
  app.require_subcommand(1);

  // simulate: one cohort as CSV on stdout.
  auto* simulate = app.add_subcommand("simulate", "emit a single simulated cohort as CSV");
  double sim_e = 0.0, sim_l = 0.0;
  int sim_n = 10000;
  std::uint64_t sim_seed = 0;
  simulate->add_option("--log-hr-e", sim_e, "treatment log hazard ratio");
  simulate->add_option("--log-hr-l", sim_l, "covariate log hazard ratio");
  simulate->add_option("--n", sim_n, "number of subjects");
  simulate->add_option("--seed", sim_seed, "RNG seed");

  // oracle: duplicate-cohort marginal effect for one scenario.
  auto* oracle = app.add_subcommand("oracle", "estimate the true marginal log HR");
  double ora_e = 0.0, ora_l = 0.0;
  int ora_n = 10000, ora_reps = 100;
  std::uint64_t ora_seed = 0;
  std::string ora_cache;
  oracle->add_option("--log-hr-e", ora_e, "treatment log hazard ratio");
  oracle->add_option("--log-hr-l", ora_l, "covariate log hazard ratio");
  oracle->add_option("--n", ora_n, "originals per replication");
  oracle->add_option("--reps", ora_reps, "number of replications");
  oracle->add_option("--seed", ora_seed, "RNG seed");
  oracle->add_option("--cache", ora_cache, "oracle cache file to reuse/update");

  // run-study: the full scenario grid.
  auto* run = app.add_subcommand("run-study", "run the Monte Carlo study grid");
  std::string run_config, run_out = "out", run_scenarios, run_profile;
  int run_reps = -1, run_oracle_reps = -1, run_n = -1, run_workers = -1;
  std::uint64_t run_seed = 0;
  bool run_seed_set = false;
  run->add_option("--config", run_config, "key = value config file");
  run->add_option("--out", run_out, "output directory");
  run->add_option("--scenarios", run_scenarios,
                  "comma-separated logHR_E:logHR_L pairs replacing the grid");
  run->add_option("--reps", run_reps, "replications per scenario");
  run->add_option("--oracle-reps", run_oracle_reps, "oracle replications");
  run->add_option("--n", run_n, "subjects per cohort");
  run->add_option("--workers", run_workers, "worker threads (0 = auto)");
  run->add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { run_seed = v; run_seed_set = true; },
      "master seed");
  run->add_option("--profile", run_profile, "'quick' for a desk-scale run");

  // report: render a completed bundle.
  auto* report = app.add_subcommand("report", "summarize a completed study bundle");
  std::string report_dir;
  report->add_option("dir", report_dir, "study output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) {
      hrsim::Scenario scenario = hrsim::Scenario::paper_preset(sim_e, sim_l, sim_seed);
      scenario.n_subjects = sim_n;
      hrsim::write_cohort_csv(hrsim::generate_cohort(scenario), std::cout);
      return 0;
    }
    if (*oracle) {
      hrsim::Scenario scenario = hrsim::Scenario::paper_preset(ora_e, ora_l, ora_seed);
      scenario.n_subjects = ora_n;
      scenario.validate();
      std::optional<hrsim::OracleCache> cache;
      if (!ora_cache.empty()) cache.emplace(ora_cache);
      std::optional<hrsim::OracleEstimate> est;
      if (cache) est = cache->lookup(scenario, ora_reps);
      if (!est) {
        est = hrsim::true_marginal_hr(scenario, ora_reps);
        if (cache) {
          cache->store(*est);
          cache->save();
        }
      }
      std::cout << "log_hr_marginal=" << est->log_hr_marginal
                << " mc_sd=" << est->mc_sd << " n_converged=" << est->n_converged
                << "/" << est->n_replications << "\n";
      return 0;
    }
    if (*run) {
      hrsim::StudyConfig config;
      if (!run_config.empty()) config = hrsim::StudyConfig::from_file(run_config);
      if (run_profile == "quick") {
        config.apply_quick_profile();
      } else if (!run_profile.empty()) {
        throw std::invalid_argument("unknown profile '" + run_profile + "'");
      }
      if (!run_scenarios.empty()) config.scenario_list = parse_scenarios(run_scenarios);
      if (run_reps >= 0) config.replications = run_reps;
      if (run_oracle_reps >= 0) config.oracle_replications = run_oracle_reps;
      if (run_n >= 0) config.n_subjects = run_n;
      if (run_workers >= 0) config.worker_count = run_workers;
      if (run_seed_set) config.master_seed = run_seed;
      config.output_directory = run_out;
      config.validate();
      const hrsim::StudyResult result = hrsim::run_study(config);
      hrsim::write_study_outputs(result);
      int n_failed = 0;
      for (const auto& s : result.scenarios)
        if (s.decomposition.n_converged < s.decomposition.n_total / 2) ++n_failed;
      if (n_failed > 0) {
        std::cerr << n_failed << " scenario(s) lost more than half of their "
                  << "replications to convergence failures\n";
        return kExitNumerical;
      }
      std::cout << "study complete: " << result.scenarios.size()
                << " scenario(s) written to " << config.output_directory << "\n";
      return 0;
    }
    if (*report) {
      std::cout << hrsim::render_report(report_dir);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    if (what.find("missing study bundle") != std::string::npos ||
        what.find("cannot read") != std::string::npos)
      return kExitMissingArtifact;
    return kExitNumerical;
  }
  return 0;
}
