#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hrsim/analysis.hpp"

namespace hrsim {

// Full study configuration: the scenario grid crossed with shared
// simulation settings.  An explicit scenario list, when nonempty,
// replaces the grid cross product.
struct StudyConfig {
  std::vector<double> treatment_grid{-0.9, -0.5, 0.0, 0.5, 0.9};
  std::vector<double> covariate_grid{-0.4, -0.2, 0.0, 0.2, 0.4};
  std::vector<std::pair<double, double>> scenario_list;  // (log HR_E, log HR_L)
  int replications = 500;
  int oracle_replications = 100;
  int n_subjects = 10000;
  std::uint64_t master_seed = 20250825;
  int worker_count = 0;  // 0 = hardware concurrency
  std::string output_directory;

  void validate() const;
  std::uint64_t config_hash() const;  // independent of workers and paths
  std::vector<std::pair<double, double>> scenario_points() const;
  void apply_quick_profile();  // N=2000, 100 reps, 25 oracle reps

  static StudyConfig from_file(const std::string& path);
};

struct PeriodCell {
  double start_day = 0.0;
  double end_day = 0.0;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n_used = 0;
  int n_excluded = 0;
  double mean_events_treated = 0.0;
  double mean_events_control = 0.0;
};

struct ScenarioStudyResult {
  Scenario scenario;  // seed holds the derived per-scenario substream base
  DecompositionRow decomposition;
  double period_interval_days = 0.0;  // 0 when no period analysis ran
  double period_max_day = 0.0;
  std::vector<PeriodCell> periods;
  std::vector<TrajectoryPoint> trajectory;
};

struct StudyResult {
  StudyConfig config;
  std::vector<ScenarioStudyResult> scenarios;
};

// Derived substream seeds: fixed mixing of the master seed with the
// scenario parameter hash and the replication index, so results never
// depend on grid ordering or scheduling.
std::uint64_t scenario_seed_base(const StudyConfig& config, const Scenario& scenario);
std::uint64_t replication_seed(std::uint64_t scenario_base, int replication_index);

// Runs every scenario: cached oracle, per-replication fits, decomposition,
// period grids (50-day intervals to day 400 for a harmful factor, 100-day
// to day 800 for a protective one) and survivor covariate trajectories.
StudyResult run_study(const StudyConfig& config);

// Persists table1/table2/table3/figure1/figure2 CSVs plus manifest.json
// into config.output_directory; all writes are atomic.  Raw mode: full
// double precision.
void write_study_outputs(const StudyResult& result);

// Reads a persisted bundle and renders the decomposition table with
// 3-decimal rounding; flags scenarios whose selection-bias CI excludes 0.
// Throws std::runtime_error when the bundle is missing.
std::string render_report(const std::string& output_directory);

}  // namespace hrsim
