#include "hrsim/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hrsim {

int draw_treatment(Rng& rng, double treat_prob) {
  return rng.bernoulli(treat_prob) ? 1 : 0;
}

double draw_covariate(Rng& rng, double mean, double sd) {
  return rng.normal(mean, sd);
}

double invert_survival_time(double u, int z, double l, const Scenario& scenario) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("invert_survival_time: u must lie in (0,1)");
  double eta = scenario.log_hr_treatment * z + scenario.log_hr_covariate * l;
  double rate = scenario.weibull_scale * std::exp(eta);
  return std::pow(-std::log(u) / rate, 1.0 / scenario.weibull_shape);
}

double draw_censor_time(Rng& rng, double rate) {
  return rng.exponential(rate);
}

Cohort generate_cohort(const Scenario& scenario) {
  scenario.validate();
  Cohort cohort;
  cohort.scenario = scenario;
  cohort.subjects.resize(scenario.n_subjects);
  Rng rng(scenario.seed);
  for (int i = 0; i < scenario.n_subjects; ++i) {
    Subject& s = cohort.subjects[i];
    s.id = i;
    s.treatment = draw_treatment(rng, scenario.treat_prob);
    s.covariate = draw_covariate(rng, scenario.covariate_mean, scenario.covariate_sd);
    double u = rng.uniform01();
    s.latent_event_time = invert_survival_time(u, s.treatment, s.covariate, scenario);
    s.censor_time = draw_censor_time(rng, scenario.censor_rate);
    double cens = std::min(s.censor_time, scenario.admin_horizon_days);
    s.observed_time = std::min(s.latent_event_time, cens);
    s.event = s.latent_event_time <= cens ? 1 : 0;
    s.weight = 1.0;
  }
  return cohort;
}

void write_cohort_csv(const Cohort& cohort, std::ostream& out) {
  out << "id,z,l,time,event\n";
  char buf[128];
  for (const Subject& s : cohort.subjects) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.6f,%d\n", s.id, s.treatment,
                  s.covariate, s.observed_time, s.event);
    out << buf;
  }
}

}  // namespace hrsim
