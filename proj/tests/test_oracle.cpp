#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "hrsim/oracle.hpp"

using namespace hrsim;

TEST_CASE("duplicate cohort flips treatment and keeps covariates") {
  Scenario s = Scenario::paper_preset(0.9, 0.4, 13);
  s.n_subjects = 500;
  const Cohort base = generate_cohort(s);
  Rng rng(999);
  const Cohort dup = duplicate_cohort(base, rng);
  REQUIRE(dup.subjects.size() == 1000);

  int treated = 0;
  for (const Subject& sub : dup.subjects) treated += sub.treatment;
  CHECK(treated == 500);  // every subject appears once per arm

  // Originals first, duplicates after; pairs share L and oppose Z.
  for (int i = 0; i < 500; ++i) {
    CHECK(dup.subjects[i].covariate == base.subjects[i].covariate);
    CHECK(dup.subjects[i].treatment == base.subjects[i].treatment);
    CHECK(dup.subjects[500 + i].covariate == base.subjects[i].covariate);
    CHECK(dup.subjects[500 + i].treatment == 1 - base.subjects[i].treatment);
  }

  // Covariate multiset is exactly doubled.
  std::vector<double> l_base, l_dup;
  for (const Subject& sub : base.subjects) {
    l_base.push_back(sub.covariate);
    l_base.push_back(sub.covariate);
  }
  for (const Subject& sub : dup.subjects) l_dup.push_back(sub.covariate);
  std::sort(l_base.begin(), l_base.end());
  std::sort(l_dup.begin(), l_dup.end());
  CHECK(l_base == l_dup);
}

TEST_CASE("duplicates get fresh outcome draws") {
  Scenario s = Scenario::paper_preset(0.0, 0.0, 14);
  s.n_subjects = 200;
  const Cohort base = generate_cohort(s);
  Rng rng(123);
  const Cohort dup = duplicate_cohort(base, rng);
  int identical = 0;
  for (int i = 0; i < 200; ++i)
    identical += dup.subjects[200 + i].latent_event_time ==
                 base.subjects[i].latent_event_time;
  CHECK(identical == 0);
}

TEST_CASE("null treatment effect gives a null marginal estimate") {
  Scenario s = Scenario::paper_preset(0.0, 0.4, 21);
  s.n_subjects = 2000;
  const OracleEstimate est = true_marginal_hr(s, 20);
  CHECK(est.n_converged == 20);
  CHECK(std::abs(est.log_hr_marginal) < 3.0 * est.mc_sd / std::sqrt(20.0) + 0.01);
}

TEST_CASE("marginal effect is attenuated toward zero under a strong covariate") {
  Scenario s = Scenario::paper_preset(0.9, 0.4, 31);
  s.n_subjects = 4000;
  const OracleEstimate est = true_marginal_hr(s, 10);
  CHECK(est.n_converged == 10);
  CHECK(est.log_hr_marginal > 0.0);
  CHECK(est.log_hr_marginal < 0.9);

  Scenario neg = Scenario::paper_preset(-0.9, 0.4, 31);
  neg.n_subjects = 4000;
  const OracleEstimate nest = true_marginal_hr(neg, 10);
  CHECK(nest.log_hr_marginal < 0.0);
  CHECK(nest.log_hr_marginal > -0.9);
}

TEST_CASE("no covariate effect means no attenuation") {
  Scenario s = Scenario::paper_preset(0.9, 0.0, 41);
  s.n_subjects = 4000;
  const OracleEstimate est = true_marginal_hr(s, 10);
  CHECK(std::abs(est.log_hr_marginal - 0.9) < 0.05);
}

TEST_CASE("oracle is deterministic in the scenario seed") {
  Scenario s = Scenario::paper_preset(0.5, 0.2, 55);
  s.n_subjects = 1000;
  const OracleEstimate a = true_marginal_hr(s, 5);
  const OracleEstimate b = true_marginal_hr(s, 5);
  CHECK(a.log_hr_marginal == b.log_hr_marginal);
  CHECK(a.mc_sd == b.mc_sd);
}

TEST_CASE("cache round trip") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "hrsim_oracle_cache_test.json").string();
  std::filesystem::remove(path);

  Scenario s = Scenario::paper_preset(0.5, 0.2, 55);
  s.n_subjects = 1000;
  OracleEstimate est;
  est.scenario = s;
  est.log_hr_marginal = 0.456;
  est.mc_sd = 0.012;
  est.n_replications = 5;
  est.n_converged = 5;

  {
    OracleCache cache(path);
    CHECK(!cache.lookup(s, 5).has_value());
    cache.store(est);
    cache.save();
  }
  {
    OracleCache cache(path);
    CHECK(cache.size() == 1);
    const auto hit = cache.lookup(s, 5);
    REQUIRE(hit.has_value());
    CHECK(hit->log_hr_marginal == est.log_hr_marginal);
    CHECK(hit->mc_sd == est.mc_sd);
    CHECK(hit->n_converged == 5);

    // Different replication count, seed or parameters must all miss.
    CHECK(!cache.lookup(s, 6).has_value());
    Scenario other_seed = s;
    other_seed.seed = 56;
    CHECK(!cache.lookup(other_seed, 5).has_value());
    Scenario other_param = s;
    other_param.log_hr_treatment = 0.6;
    CHECK(!cache.lookup(other_param, 5).has_value());
  }
  std::filesystem::remove(path);
}

TEST_CASE("missing cache file starts empty") {
  OracleCache cache("/nonexistent/dir/never_written.json");
  CHECK(cache.size() == 0);
}
