#pragma once

#include <vector>

#include "hrsim/cox.hpp"
#include "hrsim/sim_engine.hpp"

namespace hrsim {

// Logistic model P(Z=1|L) = expit(alpha0 + alpha1 * L).
struct PropensityModel {
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  bool converged = false;
  bool separation = false;
  int iterations = 0;

  double propensity(double l) const;
};

struct PropensityOptions {
  double tol = 1e-10;  // on max |score|
  int max_iter = 25;
};

// Maximum-likelihood logistic regression of treatment on (1, L) by
// Newton iteration (IRLS).  Throws on a single-arm cohort; flags
// complete separation as non-converged.
PropensityModel fit_propensity(const Cohort& cohort,
                               const PropensityOptions& options = {});

// Inverse-probability-of-treatment weights:
//   treated   1 / PS(L_i)
//   control   1 / (1 - PS(L_i))
// Every weight is >= 1.  A propensity numerically at 0 or 1 is an error
// naming the subject; the model must have converged.
std::vector<double> compute_weights(const PropensityModel& model,
                                    const Cohort& cohort);

// fit_propensity -> compute_weights -> weighted crude Cox fit
// (treatment as the only regressor).
CoxFit iptw_hazard_ratio(const Cohort& cohort, const CoxOptions& options = {});

// Unweighted design helpers shared across the analysis layer.
CoxDesign make_design(const Cohort& cohort, bool adjust_covariate);

}  // namespace hrsim
