#include "hrsim/scenario.hpp"

#include <bit>
#include <stdexcept>

#include "hrsim/rng.hpp"

namespace hrsim {

void Scenario::validate() const {
  std::string bad;
  auto flag = [&bad](const char* field) {
    if (!bad.empty()) bad += ", ";
    bad += field;
  };
  if (n_subjects <= 0) flag("n_subjects");
  if (!(treat_prob > 0.0 && treat_prob < 1.0)) flag("treat_prob");
  if (!(covariate_sd > 0.0)) flag("covariate_sd");
  if (!(weibull_scale > 0.0)) flag("weibull_scale");
  if (!(weibull_shape > 0.0)) flag("weibull_shape");
  if (!(censor_rate > 0.0)) flag("censor_rate");
  if (!(admin_horizon_days > 0.0)) flag("admin_horizon_days");
  if (!std::isfinite(log_hr_treatment)) flag("log_hr_treatment");
  if (!std::isfinite(log_hr_covariate)) flag("log_hr_covariate");
  if (!bad.empty())
    throw std::invalid_argument("invalid Scenario field(s): " + bad);
}

std::uint64_t Scenario::param_hash() const {
  auto bits = [](double x) { return std::bit_cast<std::uint64_t>(x); };
  std::uint64_t h = 0x687273696d2e7363ULL;
  h = hash_combine(h, bits(log_hr_treatment));
  h = hash_combine(h, bits(log_hr_covariate));
  h = hash_combine(h, static_cast<std::uint64_t>(n_subjects));
  h = hash_combine(h, bits(treat_prob));
  h = hash_combine(h, bits(covariate_mean));
  h = hash_combine(h, bits(covariate_sd));
  h = hash_combine(h, bits(weibull_scale));
  h = hash_combine(h, bits(weibull_shape));
  h = hash_combine(h, bits(censor_rate));
  h = hash_combine(h, bits(admin_horizon_days));
  return h;
}

Scenario Scenario::paper_preset(double log_hr_treatment, double log_hr_covariate,
                                std::uint64_t seed) {
  Scenario s;
  s.log_hr_treatment = log_hr_treatment;
  s.log_hr_covariate = log_hr_covariate;
  s.seed = seed;
  return s;
}

}  // namespace hrsim
