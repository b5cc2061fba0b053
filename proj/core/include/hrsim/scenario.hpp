#pragma once

#include <cstdint>
#include <string>

namespace hrsim {

// One grid point of the simulation study: true conditional effects,
// baseline-hazard parameters, cohort size, censoring and horizon.
struct Scenario {
  double log_hr_treatment = 0.0;   // beta1, log hazard ratio of treatment
  double log_hr_covariate = 0.0;   // beta2, log hazard ratio per covariate unit
  int n_subjects = 10000;
  double treat_prob = 0.5;
  double covariate_mean = 5.0;
  double covariate_sd = 2.0;
  double weibull_scale = 1.2e-5;   // lambda, per-day^shape
  double weibull_shape = 2.0;      // v
  double censor_rate = 0.005;      // per day
  double admin_horizon_days = 1095.0;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument listing every offending field.
  void validate() const;

  // Hash of every field except the seed; used for oracle caching and
  // for deriving per-scenario seed substreams.
  std::uint64_t param_hash() const;

  static Scenario paper_preset(double log_hr_treatment, double log_hr_covariate,
                               std::uint64_t seed = 0);
};

}  // namespace hrsim
