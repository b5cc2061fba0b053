#pragma once

#include <ostream>
#include <vector>

#include "hrsim/rng.hpp"
#include "hrsim/scenario.hpp"

namespace hrsim {

struct Subject {
  int id = 0;
  int treatment = 0;            // Z
  double covariate = 0.0;       // L
  double latent_event_time = 0.0;  // T
  double censor_time = 0.0;        // C
  double observed_time = 0.0;      // min(T, C, horizon)
  int event = 0;                // 1 iff T <= min(C, horizon)
  double weight = 1.0;
};

// Immutable after generation; subject ids are dense 0..N-1.
struct Cohort {
  Scenario scenario;
  std::vector<Subject> subjects;
};

int draw_treatment(Rng& rng, double treat_prob);
double draw_covariate(Rng& rng, double mean, double sd);

// Weibull proportional-hazards inverse transform:
//   T = [ -log(u) / (scale * exp(b1*z + b2*l)) ]^(1/shape)
// Strictly decreasing in u and in the linear predictor.
double invert_survival_time(double u, int z, double l, const Scenario& scenario);

double draw_censor_time(Rng& rng, double rate);

// Pure function of (scenario, scenario.seed); per-subject draw order is
// fixed (treatment, covariate, event uniform, censor time).
Cohort generate_cohort(const Scenario& scenario);

// CSV with header id,z,l,time,event; time with 6 decimal places.
void write_cohort_csv(const Cohort& cohort, std::ostream& out);

}  // namespace hrsim
