#include "hrsim/study.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "hrsim/iptw.hpp"

namespace fs = std::filesystem;

namespace hrsim {

namespace {

constexpr std::uint64_t kReplicationTag = 0x7265706c69636174ULL;
constexpr std::uint64_t kOracleBaseTag = 0x6f7261636c652e62ULL;

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  return fields;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void period_grid(double log_hr_covariate, double& interval_days, double& max_day) {
  if (log_hr_covariate > 0.0) {
    interval_days = 50.0;
    max_day = 400.0;
  } else if (log_hr_covariate < 0.0) {
    interval_days = 100.0;
    max_day = 800.0;
  } else {
    interval_days = 0.0;
    max_day = 0.0;
  }
}

// Trajectories use the period grid when one exists, the harmful-factor
// grid otherwise.
void trajectory_grid(double log_hr_covariate, double& interval_days, double& max_day) {
  period_grid(log_hr_covariate, interval_days, max_day);
  if (interval_days == 0.0) {
    interval_days = 50.0;
    max_day = 400.0;
  }
}

struct RepRecord {
  ReplicationResult result;
  std::vector<PeriodEstimate> periods;
  std::vector<SurvivorMeans> survivor_means;
};

}  // namespace

void StudyConfig::validate() const {
  if (scenario_list.empty() && (treatment_grid.empty() || covariate_grid.empty()))
    throw std::invalid_argument("StudyConfig: empty scenario grid");
  if (replications < 2)
    throw std::invalid_argument("StudyConfig: replications must be >= 2");
  if (oracle_replications < 1)
    throw std::invalid_argument("StudyConfig: oracle_replications must be >= 1");
  if (n_subjects < 2)
    throw std::invalid_argument("StudyConfig: n_subjects must be >= 2");
  if (worker_count < 0)
    throw std::invalid_argument("StudyConfig: worker_count must be >= 0");
}

std::uint64_t StudyConfig::config_hash() const {
  auto bits = [](double x) { return std::bit_cast<std::uint64_t>(x); };
  std::uint64_t h = 0x73747564792e6366ULL;
  for (const auto& [e, l] : scenario_points()) {
    h = hash_combine(h, bits(e));
    h = hash_combine(h, bits(l));
  }
  h = hash_combine(h, static_cast<std::uint64_t>(replications));
  h = hash_combine(h, static_cast<std::uint64_t>(oracle_replications));
  h = hash_combine(h, static_cast<std::uint64_t>(n_subjects));
  h = hash_combine(h, master_seed);
  return h;
}

std::vector<std::pair<double, double>> StudyConfig::scenario_points() const {
  if (!scenario_list.empty()) return scenario_list;
  std::vector<std::pair<double, double>> points;
  for (double e : treatment_grid)
    for (double l : covariate_grid) points.emplace_back(e, l);
  return points;
}

void StudyConfig::apply_quick_profile() {
  n_subjects = 2000;
  replications = 100;
  oracle_replications = 25;
}

StudyConfig StudyConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  StudyConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    auto parse_grid = [&value]() {
      std::vector<double> grid;
      for (const std::string& item : split(value, ','))
        grid.push_back(std::stod(trim(item)));
      return grid;
    };
    if (key == "treatment_grid") {
      config.treatment_grid = parse_grid();
    } else if (key == "covariate_grid") {
      config.covariate_grid = parse_grid();
    } else if (key == "replications") {
      config.replications = std::stoi(value);
    } else if (key == "oracle_replications") {
      config.oracle_replications = std::stoi(value);
    } else if (key == "n_subjects") {
      config.n_subjects = std::stoi(value);
    } else if (key == "master_seed") {
      config.master_seed = std::stoull(value);
    } else if (key == "worker_count") {
      config.worker_count = std::stoi(value);
    } else if (key == "output_directory") {
      config.output_directory = value;
    } else {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
    }
  }
  return config;
}

std::uint64_t scenario_seed_base(const StudyConfig& config, const Scenario& scenario) {
  return hash_combine(config.master_seed, scenario.param_hash());
}

std::uint64_t replication_seed(std::uint64_t scenario_base, int replication_index) {
  return hash_combine(hash_combine(scenario_base, kReplicationTag),
                      static_cast<std::uint64_t>(replication_index));
}

StudyResult run_study(const StudyConfig& config) {
  config.validate();
  const auto points = config.scenario_points();
  const int n_scenarios = static_cast<int>(points.size());
  const int reps = config.replications;

  std::vector<Scenario> scenarios(n_scenarios);
  std::vector<std::uint64_t> bases(n_scenarios);
  for (int s = 0; s < n_scenarios; ++s) {
    Scenario sc = Scenario::paper_preset(points[s].first, points[s].second);
    sc.n_subjects = config.n_subjects;
    bases[s] = scenario_seed_base(config, sc);
    sc.seed = bases[s];
    scenarios[s] = sc;
  }

  // Oracle cache lives next to the outputs when a directory is given.
  std::optional<OracleCache> cache;
  if (!config.output_directory.empty()) {
    fs::create_directories(config.output_directory);
    cache.emplace((fs::path(config.output_directory) / "oracle_cache.json").string());
  }

  std::vector<std::optional<OracleEstimate>> oracles(n_scenarios);
  std::vector<int> oracle_items;
  for (int s = 0; s < n_scenarios; ++s) {
    Scenario oracle_scenario = scenarios[s];
    oracle_scenario.seed = hash_combine(bases[s], kOracleBaseTag);
    if (cache) oracles[s] = cache->lookup(oracle_scenario, config.oracle_replications);
    if (!oracles[s]) oracle_items.push_back(s);
  }

  // Work queue: all oracle estimations first (heaviest), then every
  // (scenario, replication) pair.  Results land in preallocated slots,
  // so scheduling order cannot affect the aggregate.
  std::vector<std::vector<RepRecord>> records(n_scenarios);
  for (auto& r : records) r.resize(reps);

  const int n_oracle_items = static_cast<int>(oracle_items.size());
  const int total_items = n_oracle_items + n_scenarios * reps;
  std::atomic<int> next_item{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto run_item = [&](int item) {
    if (item < n_oracle_items) {
      const int s = oracle_items[item];
      Scenario oracle_scenario = scenarios[s];
      oracle_scenario.seed = hash_combine(bases[s], kOracleBaseTag);
      oracles[s] = true_marginal_hr(oracle_scenario, config.oracle_replications);
      return;
    }
    const int flat = item - n_oracle_items;
    const int s = flat / reps;
    const int r = flat % reps;
    Scenario rep_scenario = scenarios[s];
    rep_scenario.seed = replication_seed(bases[s], r);
    const Cohort cohort = generate_cohort(rep_scenario);
    RepRecord& record = records[s][r];
    record.result = analyze_replication(cohort);
    record.result.replication_index = r;
    double pi, pm;
    period_grid(rep_scenario.log_hr_covariate, pi, pm);
    if (pi > 0.0) record.periods = period_specific_hr(cohort, pi, pm);
    double ti, tm;
    trajectory_grid(rep_scenario.log_hr_covariate, ti, tm);
    for (double t = 0.0; t <= tm + 1e-9; t += ti)
      record.survivor_means.push_back(survivor_mean_covariate(cohort, t));
  };

  auto worker = [&]() {
    for (;;) {
      const int item = next_item.fetch_add(1);
      if (item >= total_items || failed.load()) break;
      try {
        run_item(item);
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = ex.what();
      }
    }
  };

  int n_workers = config.worker_count;
  if (n_workers == 0)
    n_workers = std::max(1u, std::thread::hardware_concurrency());
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failed.load()) throw std::runtime_error("run_study: " + first_error);

  if (cache && !oracle_items.empty()) {
    for (int s : oracle_items) cache->store(*oracles[s]);
    cache->save();
  }

  // Deterministic aggregation, scenario by scenario.
  StudyResult result;
  result.config = config;
  for (int s = 0; s < n_scenarios; ++s) {
    ScenarioStudyResult out;
    out.scenario = scenarios[s];
    std::vector<ReplicationResult> reps_only;
    reps_only.reserve(reps);
    for (const RepRecord& rec : records[s]) reps_only.push_back(rec.result);
    out.decomposition = decompose(scenarios[s], reps_only, *oracles[s]);

    period_grid(scenarios[s].log_hr_covariate, out.period_interval_days,
                out.period_max_day);
    if (out.period_interval_days > 0.0) {
      const std::size_t n_intervals = records[s][0].periods.size();
      for (std::size_t k = 0; k < n_intervals; ++k) {
        PeriodCell cell;
        cell.start_day = records[s][0].periods[k].start_day;
        cell.end_day = records[s][0].periods[k].end_day;
        double sum = 0.0, sumsq = 0.0, ev_t = 0.0, ev_c = 0.0;
        for (const RepRecord& rec : records[s]) {
          const PeriodEstimate& pe = rec.periods[k];
          ev_t += pe.events_treated;
          ev_c += pe.events_control;
          if (!pe.estimable) {
            ++cell.n_excluded;
            continue;
          }
          sum += pe.log_hr_crude;
          sumsq += pe.log_hr_crude * pe.log_hr_crude;
          ++cell.n_used;
        }
        cell.mean_events_treated = ev_t / reps;
        cell.mean_events_control = ev_c / reps;
        if (cell.n_used > 0) {
          cell.mean = sum / cell.n_used;
          const double sd =
              cell.n_used > 1
                  ? std::sqrt(std::max(0.0, (sumsq - sum * sum / cell.n_used) /
                                                (cell.n_used - 1)))
                  : 0.0;
          cell.lo = cell.mean - 1.96 * sd;
          cell.hi = cell.mean + 1.96 * sd;
        }
        out.periods.push_back(cell);
      }
    }

    double ti, tm;
    trajectory_grid(scenarios[s].log_hr_covariate, ti, tm);
    const std::size_t n_points = records[s][0].survivor_means.size();
    for (std::size_t k = 0; k < n_points; ++k) {
      TrajectoryPoint pt;
      pt.t_days = ti * static_cast<double>(k);
      double st = 0.0, sst = 0.0, sc = 0.0, ssc = 0.0;
      int nt = 0, nc = 0;
      for (const RepRecord& rec : records[s]) {
        const SurvivorMeans& m = rec.survivor_means[k];
        if (m.treated_valid) {
          st += m.treated;
          sst += m.treated * m.treated;
          ++nt;
        }
        if (m.control_valid) {
          sc += m.control;
          ssc += m.control * m.control;
          ++nc;
        }
      }
      if (nt > 0) {
        pt.treated_valid = true;
        pt.treated = st / nt;
        if (nt > 1)
          pt.treated_sd = std::sqrt(std::max(0.0, (sst - st * st / nt) / (nt - 1)));
      }
      if (nc > 0) {
        pt.control_valid = true;
        pt.control = sc / nc;
        if (nc > 1)
          pt.control_sd = std::sqrt(std::max(0.0, (ssc - sc * sc / nc) / (nc - 1)));
      }
      out.trajectory.push_back(pt);
    }
    result.scenarios.push_back(std::move(out));
  }
  return result;
}

void write_study_outputs(const StudyResult& result) {
  const StudyConfig& config = result.config;
  if (config.output_directory.empty())
    throw std::invalid_argument("write_study_outputs: no output directory");
  fs::create_directories(config.output_directory);
  const fs::path dir(config.output_directory);

  // table1: the decomposition grid.
  {
    std::ostringstream out;
    out << "log_hr_e,log_hr_l,marginal,marginal_mc_sd,"
        << "adjusted,adjusted_lo,adjusted_hi,crude,crude_lo,crude_hi,"
        << "iptw,iptw_lo,iptw_hi,"
        << "noncollapsibility,noncollapsibility_lo,noncollapsibility_hi,"
        << "selection_bias,selection_bias_lo,selection_bias_hi,"
        << "n_converged,n_total\n";
    for (const ScenarioStudyResult& s : result.scenarios) {
      const DecompositionRow& d = s.decomposition;
      out << fmt_full(s.scenario.log_hr_treatment) << ','
          << fmt_full(s.scenario.log_hr_covariate) << ','
          << fmt_full(d.log_hr_marginal) << ',' << fmt_full(d.marginal_mc_sd) << ','
          << fmt_full(d.adjusted.mean) << ',' << fmt_full(d.adjusted.lo) << ','
          << fmt_full(d.adjusted.hi) << ',' << fmt_full(d.crude.mean) << ','
          << fmt_full(d.crude.lo) << ',' << fmt_full(d.crude.hi) << ','
          << fmt_full(d.iptw.mean) << ',' << fmt_full(d.iptw.lo) << ','
          << fmt_full(d.iptw.hi) << ',' << fmt_full(d.noncollapsibility.mean) << ','
          << fmt_full(d.noncollapsibility.lo) << ','
          << fmt_full(d.noncollapsibility.hi) << ','
          << fmt_full(d.selection_bias.mean) << ','
          << fmt_full(d.selection_bias.lo) << ',' << fmt_full(d.selection_bias.hi)
          << ',' << d.n_converged << ',' << d.n_total << "\n";
    }
    atomic_write(dir / "table1.csv", out.str());
  }

  // table2 (harmful factor) and table3 (protective factor) period grids.
  for (int which = 2; which <= 3; ++which) {
    std::ostringstream out;
    out << "log_hr_e,log_hr_l,interval_start,interval_end,"
        << "log_hr,log_hr_lo,log_hr_hi,n_used,n_excluded,"
        << "mean_events_treated,mean_events_control\n";
    for (const ScenarioStudyResult& s : result.scenarios) {
      const double l = s.scenario.log_hr_covariate;
      if (which == 2 ? !(l > 0.0) : !(l < 0.0)) continue;
      for (const PeriodCell& c : s.periods) {
        out << fmt_full(s.scenario.log_hr_treatment) << ',' << fmt_full(l) << ','
            << fmt_full(c.start_day) << ',' << fmt_full(c.end_day) << ','
            << fmt_full(c.mean) << ',' << fmt_full(c.lo) << ',' << fmt_full(c.hi)
            << ',' << c.n_used << ',' << c.n_excluded << ','
            << fmt_full(c.mean_events_treated) << ','
            << fmt_full(c.mean_events_control) << "\n";
      }
    }
    atomic_write(dir / ("table" + std::to_string(which) + ".csv"), out.str());
  }

  // figure1/figure2: survivor mean-covariate trajectories for the
  // strongest harmful and protective factor levels.
  double max_pos = 0.0, min_neg = 0.0;
  for (const ScenarioStudyResult& s : result.scenarios) {
    max_pos = std::max(max_pos, s.scenario.log_hr_covariate);
    min_neg = std::min(min_neg, s.scenario.log_hr_covariate);
  }
  for (int which = 1; which <= 2; ++which) {
    const double target = which == 1 ? max_pos : min_neg;
    std::ostringstream out;
    out << "log_hr_e,log_hr_l,arm,t_days,mean_l\n";
    if ((which == 1 && target > 0.0) || (which == 2 && target < 0.0)) {
      for (const ScenarioStudyResult& s : result.scenarios) {
        if (s.scenario.log_hr_covariate != target) continue;
        for (const TrajectoryPoint& pt : s.trajectory) {
          if (pt.control_valid)
            out << fmt_full(s.scenario.log_hr_treatment) << ',' << fmt_full(target)
                << ",control," << fmt_full(pt.t_days) << ',' << fmt_full(pt.control)
                << "\n";
          if (pt.treated_valid)
            out << fmt_full(s.scenario.log_hr_treatment) << ',' << fmt_full(target)
                << ",treated," << fmt_full(pt.t_days) << ',' << fmt_full(pt.treated)
                << "\n";
        }
      }
    }
    atomic_write(dir / ("figure" + std::to_string(which) + ".csv"), out.str());
  }

  // Run metadata.
  nlohmann::json manifest;
  char hash_buf[32];
  std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                static_cast<unsigned long long>(config.config_hash()));
  manifest["config_hash"] = hash_buf;
  manifest["master_seed"] = config.master_seed;
  manifest["replications"] = config.replications;
  manifest["oracle_replications"] = config.oracle_replications;
  manifest["n_subjects"] = config.n_subjects;
  manifest["scenarios"] = nlohmann::json::array();
  for (const ScenarioStudyResult& s : result.scenarios) {
    manifest["scenarios"].push_back(
        {{"log_hr_e", s.scenario.log_hr_treatment},
         {"log_hr_l", s.scenario.log_hr_covariate},
         {"n_converged", s.decomposition.n_converged},
         {"n_total", s.decomposition.n_total}});
  }
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string render_report(const std::string& output_directory) {
  const fs::path path = fs::path(output_directory) / "table1.csv";
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("render_report: missing study bundle at " +
                             path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("render_report: empty table1.csv");

  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%7s %7s %9s %9s %9s %9s %24s %24s\n", "logHR_E",
                "logHR_L", "marginal", "adjusted", "crude", "iptw",
                "noncollapsibility (CI)", "selection bias (CI)");
  out << buf;
  int flagged = 0;
  while (std::getline(in, line)) {
    const auto f = split(line, ',');
    if (f.size() < 21) continue;
    const double sel_lo = std::stod(f[17]), sel_hi = std::stod(f[18]);
    const bool excludes_zero = sel_lo > 0.0 || sel_hi < 0.0;
    if (excludes_zero) ++flagged;
    char nc[40], sb[40];
    std::snprintf(nc, sizeof(nc), "%.3f (%.3f, %.3f)", std::stod(f[13]),
                  std::stod(f[14]), std::stod(f[15]));
    std::snprintf(sb, sizeof(sb), "%.3f (%.3f, %.3f)%s", std::stod(f[16]), sel_lo,
                  sel_hi, excludes_zero ? " *" : "");
    std::snprintf(buf, sizeof(buf), "%7.1f %7.1f %9.3f %9.3f %9.3f %9.3f %24s %24s\n",
                  std::stod(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[4]),
                  std::stod(f[7]), std::stod(f[10]), nc, sb);
    out << buf;
  }
  if (flagged > 0)
    out << "warning: " << flagged
        << " scenario(s) have a selection-bias CI excluding 0 (marked *)\n";
  else
    out << "all selection-bias CIs include 0\n";
  return out.str();
}

}  // namespace hrsim
