#include "hrsim/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hrsim/cox.hpp"
#include "hrsim/iptw.hpp"

namespace hrsim {

namespace {
constexpr std::uint64_t kDuplicateTag = 0x6475706c69636174ULL;
constexpr std::uint64_t kOracleTag = 0x6f7261636c65ULL;

std::string cache_key(const Scenario& scenario, int n_replications) {
  std::uint64_t h = scenario.param_hash();
  h = hash_combine(h, scenario.seed);
  h = hash_combine(h, static_cast<std::uint64_t>(n_replications));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}
}  // namespace

Cohort duplicate_cohort(const Cohort& cohort, Rng& rng) {
  const Scenario& scenario = cohort.scenario;
  Cohort combined;
  combined.scenario = scenario;
  combined.subjects = cohort.subjects;
  combined.subjects.reserve(2 * cohort.subjects.size());
  int next_id = static_cast<int>(cohort.subjects.size());
  for (const Subject& orig : cohort.subjects) {
    Subject dup;
    dup.id = next_id++;
    dup.treatment = 1 - orig.treatment;
    dup.covariate = orig.covariate;
    const double u = rng.uniform01();
    dup.latent_event_time =
        invert_survival_time(u, dup.treatment, dup.covariate, scenario);
    dup.censor_time = draw_censor_time(rng, scenario.censor_rate);
    const double cens = std::min(dup.censor_time, scenario.admin_horizon_days);
    dup.observed_time = std::min(dup.latent_event_time, cens);
    dup.event = dup.latent_event_time <= cens ? 1 : 0;
    combined.subjects.push_back(dup);
  }
  return combined;
}

OracleEstimate true_marginal_hr(const Scenario& scenario, int n_replications) {
  scenario.validate();
  if (n_replications < 1)
    throw std::invalid_argument("true_marginal_hr: n_replications must be >= 1");

  OracleEstimate estimate;
  estimate.scenario = scenario;
  estimate.n_replications = n_replications;

  double sum = 0.0, sumsq = 0.0;
  int used = 0;
  for (int r = 0; r < n_replications; ++r) {
    const std::uint64_t rep_seed =
        hash_combine(hash_combine(scenario.seed, kOracleTag),
                     static_cast<std::uint64_t>(r));
    Scenario rep_scenario = scenario;
    rep_scenario.seed = rep_seed;
    const Cohort originals = generate_cohort(rep_scenario);
    Rng dup_rng(hash_combine(rep_seed, kDuplicateTag));
    const Cohort combined = duplicate_cohort(originals, dup_rng);
    const CoxFit crude = fit(make_design(combined, /*adjust_covariate=*/false));
    if (!crude.converged) continue;
    sum += crude.beta(0);
    sumsq += crude.beta(0) * crude.beta(0);
    ++used;
  }
  if (used < 1)
    throw std::runtime_error("true_marginal_hr: no replication converged");
  estimate.n_converged = used;
  estimate.log_hr_marginal = sum / used;
  estimate.mc_sd =
      used > 1 ? std::sqrt(std::max(0.0, (sumsq - sum * sum / used) / (used - 1)))
               : 0.0;
  return estimate;
}

OracleCache::OracleCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception&) {
    return;  // unreadable cache is treated as empty
  }
  for (auto& [key, rec] : doc.items()) {
    OracleEstimate e;
    Scenario& s = e.scenario;
    s.log_hr_treatment = rec.at("log_hr_treatment");
    s.log_hr_covariate = rec.at("log_hr_covariate");
    s.n_subjects = rec.at("n_subjects");
    s.treat_prob = rec.at("treat_prob");
    s.covariate_mean = rec.at("covariate_mean");
    s.covariate_sd = rec.at("covariate_sd");
    s.weibull_scale = rec.at("weibull_scale");
    s.weibull_shape = rec.at("weibull_shape");
    s.censor_rate = rec.at("censor_rate");
    s.admin_horizon_days = rec.at("admin_horizon_days");
    s.seed = rec.at("seed");
    e.log_hr_marginal = rec.at("log_hr_marginal");
    e.mc_sd = rec.at("mc_sd");
    e.n_replications = rec.at("n_replications");
    e.n_converged = rec.at("n_converged");
    entries_[key] = e;
  }
}

std::optional<OracleEstimate> OracleCache::lookup(const Scenario& scenario,
                                                  int n_replications) const {
  auto it = entries_.find(cache_key(scenario, n_replications));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void OracleCache::store(const OracleEstimate& estimate) {
  entries_[cache_key(estimate.scenario, estimate.n_replications)] = estimate;
}

void OracleCache::save() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [key, e] : entries_) {
    const Scenario& s = e.scenario;
    doc[key] = {{"log_hr_treatment", s.log_hr_treatment},
                {"log_hr_covariate", s.log_hr_covariate},
                {"n_subjects", s.n_subjects},
                {"treat_prob", s.treat_prob},
                {"covariate_mean", s.covariate_mean},
                {"covariate_sd", s.covariate_sd},
                {"weibull_scale", s.weibull_scale},
                {"weibull_shape", s.weibull_shape},
                {"censor_rate", s.censor_rate},
                {"admin_horizon_days", s.admin_horizon_days},
                {"seed", s.seed},
                {"log_hr_marginal", e.log_hr_marginal},
                {"mc_sd", e.mc_sd},
                {"n_replications", e.n_replications},
                {"n_converged", e.n_converged}};
  }
  const std::string tmp = path_ + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("OracleCache: cannot write " + tmp);
    out << doc.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path_);
}

}  // namespace hrsim
