#pragma once

#include <span>
#include <vector>

#include "hrsim/cox.hpp"
#include "hrsim/oracle.hpp"
#include "hrsim/sim_engine.hpp"

namespace hrsim {

// Per-replication adjusted / crude / IPTW estimates.
struct ReplicationResult {
  int replication_index = 0;
  double log_hr_adjusted = 0.0;
  double log_hr_crude = 0.0;
  double log_hr_iptw = 0.0;
  bool adjusted_ok = false;
  bool crude_ok = false;
  bool iptw_ok = false;
};

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// One row of the decomposition table: Monte Carlo means and 95% CIs
// (mean +- 1.96*sd across replications) plus the two bias components.
struct DecompositionRow {
  Scenario scenario;
  double log_hr_marginal = 0.0;
  double marginal_mc_sd = 0.0;
  Interval adjusted, crude, iptw;
  Interval noncollapsibility;  // mean(adjusted) - marginal
  Interval selection_bias;     // marginal - mean(crude)
  int n_converged = 0;
  int n_total = 0;
};

// Crude fit restricted to one follow-up interval of a single cohort.
struct PeriodEstimate {
  double start_day = 0.0;
  double end_day = 0.0;
  bool estimable = false;
  double log_hr_crude = 0.0;
  double se = 0.0;  // model-based, from the restricted fit
  int events_treated = 0;
  int events_control = 0;
  int at_risk_start_treated = 0;
  int at_risk_start_control = 0;
  // Mean covariate among survivors (observed_time > end_day) per arm.
  bool survivors_treated = false;
  bool survivors_control = false;
  double mean_covariate_treated = 0.0;
  double mean_covariate_control = 0.0;
};

// Fits the three models on one cohort; individual failures are recorded
// in the flags rather than thrown.
ReplicationResult analyze_replication(const Cohort& cohort,
                                      const CoxOptions& options = {});

// Means over converged replications; requires at least two of them.
// The Eq-style identity noncollapsibility + selection_bias ==
// mean(adjusted) - mean(crude) holds exactly.
DecompositionRow decompose(const Scenario& scenario,
                           std::span<const ReplicationResult> replications,
                           const OracleEstimate& oracle);

// For interval (a, b]: risk set is everyone with observed_time > a; events
// inside the interval count, everyone else is censored at b.  Intervals
// with no events in either arm come back flagged non-estimable.
std::vector<PeriodEstimate> period_specific_hr(const Cohort& cohort,
                                               double interval_days,
                                               double max_day,
                                               const CoxOptions& options = {});

// Mean covariate among survivors past time t, per arm.
struct SurvivorMeans {
  bool treated_valid = false, control_valid = false;
  double treated = 0.0, control = 0.0;
  int n_treated = 0, n_control = 0;
};
SurvivorMeans survivor_mean_covariate(const Cohort& cohort, double t);

// Per-arm trajectory of mean covariate at interval ends 0, w, 2w, ..,
// averaged across replication cohorts.
struct TrajectoryPoint {
  double t_days = 0.0;
  bool treated_valid = false, control_valid = false;
  double treated = 0.0, control = 0.0;
  double treated_sd = 0.0, control_sd = 0.0;  // across replications
};
std::vector<TrajectoryPoint> covariate_trajectory(std::span<const Cohort> cohorts,
                                                  double interval_days,
                                                  double max_day);

}  // namespace hrsim
