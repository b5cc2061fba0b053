#pragma once

#include <map>
#include <optional>
#include <string>

#include "hrsim/rng.hpp"
#include "hrsim/sim_engine.hpp"

namespace hrsim {

// Marginal log hazard ratio of a scenario, estimated by the
// duplicate-cohort construction.
struct OracleEstimate {
  Scenario scenario;
  double log_hr_marginal = 0.0;
  double mc_sd = 0.0;
  int n_replications = 100;
  int n_converged = 0;
};

// Appends, for every subject, a duplicate with the same covariate value
// and the opposite treatment assignment; duplicates get fresh event-time
// and censoring draws from the supplied stream.  Result has 2N subjects.
Cohort duplicate_cohort(const Cohort& cohort, Rng& rng);

// Mean unadjusted Cox estimate over independent duplicated cohorts;
// replication r uses a substream derived from scenario.seed.  Replications
// whose fit does not converge are dropped and counted.
OracleEstimate true_marginal_hr(const Scenario& scenario, int n_replications = 100);

// File-backed cache keyed by (scenario parameter hash, seed, replication
// count); one JSON record per scenario with all Scenario fields plus the
// estimate.  Loads on construction if the file exists; save() writes
// atomically (temp file + rename).
class OracleCache {
 public:
  explicit OracleCache(std::string path);
  std::optional<OracleEstimate> lookup(const Scenario& scenario,
                                       int n_replications) const;
  void store(const OracleEstimate& estimate);
  void save() const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::string path_;
  std::map<std::string, OracleEstimate> entries_;
};

}  // namespace hrsim
