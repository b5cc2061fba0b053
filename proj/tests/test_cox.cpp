#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hrsim/cox.hpp"
#include "hrsim/rng.hpp"

using namespace hrsim;

namespace {

CoxDesign four_subject_design() {
  CoxDesign d;
  d.times = {1, 2, 3, 4};
  d.events = {1, 1, 1, 0};
  d.regressors.resize(4, 1);
  d.regressors << 1, 0, 1, 0;
  return d;
}

// Independent brute-force maximizer over a dense beta grid.
double grid_search_beta(const CoxDesign& d, double lo = -5.0, double hi = 5.0,
                        double step = 1e-4) {
  double best = lo, best_ll = -1e300;
  Eigen::VectorXd beta(1);
  for (double b = lo; b <= hi + step / 2; b += step) {
    beta(0) = b;
    const double ll = log_partial_likelihood(d, beta);
    if (ll > best_ll) {
      best_ll = ll;
      best = b;
    }
  }
  return best;
}

// Random single-regressor design with both arms and at least one event.
CoxDesign random_design(Rng& rng, int max_n = 12) {
  for (;;) {
    const int n = 4 + static_cast<int>(rng.next() % (max_n - 3));
    CoxDesign d;
    d.regressors.resize(n, 1);
    int events = 0, treated = 0;
    for (int i = 0; i < n; ++i) {
      d.times.push_back(rng.uniform01() * 100.0 + 0.1);
      const int e = rng.bernoulli(0.7) ? 1 : 0;
      const int z = rng.bernoulli(0.5) ? 1 : 0;
      d.events.push_back(e);
      d.regressors(i, 0) = z;
      events += e;
      treated += z;
    }
    if (events >= 1 && treated > 0 && treated < n) return d;
  }
}

}  // namespace

TEST_CASE("log partial likelihood at beta = 0 is -sum log |risk set|") {
  const CoxDesign d = four_subject_design();
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
  CHECK(log_partial_likelihood(d, beta) ==
        doctest::Approx(-3.1780538303479458).epsilon(1e-12));
}

TEST_CASE("log partial likelihood matches a direct risk-set summation") {
  const CoxDesign d = four_subject_design();
  Eigen::VectorXd beta(1);
  beta << 0.5;
  // Hand-summed: events at t=1,2,3 with risk sets {1..4}, {2,3,4}, {3,4}.
  const double e1 = std::exp(0.5), e0 = 1.0;
  const double expected = (0.5 - std::log(e1 + e0 + e1 + e0)) +
                          (0.0 - std::log(e0 + e1 + e0)) +
                          (0.5 - std::log(e1 + e0));
  CHECK(log_partial_likelihood(d, beta) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(-2.9356779183378015));
}

TEST_CASE("explicit unit weights do not change the value") {
  CoxDesign d = four_subject_design();
  Eigen::VectorXd beta(1);
  beta << 0.7;
  const double unweighted = log_partial_likelihood(d, beta);
  d.weights = {1, 1, 1, 1};
  CHECK(log_partial_likelihood(d, beta) == unweighted);
}

TEST_CASE("non-finite beta is a domain error") {
  const CoxDesign d = four_subject_design();
  Eigen::VectorXd beta(1);
  beta << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(log_partial_likelihood(d, beta), std::domain_error);
}

TEST_CASE("score at zero equals event-wise z minus risk-set mean") {
  const CoxDesign d = four_subject_design();
  Eigen::VectorXd score(1);
  Eigen::MatrixXd info(1, 1);
  score_and_information(d, Eigen::VectorXd::Zero(1), score, info);
  CHECK(score(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("analytic derivatives match finite differences") {
  Rng rng(404);
  const double h = 1e-5;
  for (int k = 0; k < 20; ++k) {
    const CoxDesign d = random_design(rng);
    Eigen::VectorXd beta(1);
    beta << (rng.uniform01() - 0.5);
    Eigen::VectorXd score(1);
    Eigen::MatrixXd info(1, 1);
    score_and_information(d, beta, score, info);

    Eigen::VectorXd bp = beta, bm = beta;
    bp(0) += h;
    bm(0) -= h;
    const double fd_grad =
        (log_partial_likelihood(d, bp) - log_partial_likelihood(d, bm)) / (2 * h);
    CHECK(std::abs(score(0) - fd_grad) / std::max(1.0, std::abs(fd_grad)) < 1e-6);

    Eigen::VectorXd sp(1), sm(1);
    Eigen::MatrixXd dummy(1, 1);
    score_and_information(d, bp, sp, dummy);
    score_and_information(d, bm, sm, dummy);
    const double fd_hess = -(sp(0) - sm(0)) / (2 * h);
    CHECK(std::abs(info(0, 0) - fd_hess) / std::max(1.0, std::abs(fd_hess)) < 1e-4);
  }
}

TEST_CASE("score negates under label swap") {
  Rng rng(17);
  const CoxDesign d = random_design(rng);
  CoxDesign swapped = d;
  swapped.regressors = (1.0 - d.regressors.array()).matrix();
  Eigen::VectorXd s1(1), s2(1);
  Eigen::MatrixXd i1(1, 1), i2(1, 1);
  score_and_information(d, Eigen::VectorXd::Zero(1), s1, i1);
  score_and_information(swapped, Eigen::VectorXd::Zero(1), s2, i2);
  CHECK(s1(0) == doctest::Approx(-s2(0)).epsilon(1e-12));
}

TEST_CASE("fit matches the brute-force grid maximizer") {
  const CoxDesign d = four_subject_design();
  const CoxFit f = fit(d);
  REQUIRE(f.converged);
  CHECK(std::abs(f.beta(0) - grid_search_beta(d)) < 1e-4);
  CHECK(f.loglik_at_beta >= f.loglik_at_zero);
}

TEST_CASE("fit matches grid search on random small designs") {
  Rng rng(2718);
  int checked = 0;
  while (checked < 15) {
    const CoxDesign d = random_design(rng);
    // A design whose event-time risk sets are arm-homogeneous has a flat
    // likelihood; the maximizer is not unique there, so skip it.
    Eigen::VectorXd s0(1);
    Eigen::MatrixXd i0(1, 1);
    score_and_information(d, Eigen::VectorXd::Zero(1), s0, i0);
    if (i0(0, 0) < 1e-6) continue;
    const CoxFit f = fit(d);
    if (!f.converged || std::abs(f.beta(0)) > 4.0) continue;
    CHECK(std::abs(f.beta(0) - grid_search_beta(d)) < 1e-4);
    CHECK(f.loglik_at_beta >= f.loglik_at_zero);
    ++checked;
  }
}

TEST_CASE("perfect single comparison flags monotone likelihood") {
  CoxDesign d;
  d.times = {1, 2};
  d.events = {1, 1};
  d.regressors.resize(2, 1);
  d.regressors << 1, 0;
  const CoxFit f = fit(d);
  CHECK(!f.converged);
  CHECK(f.monotone_likelihood);
}

TEST_CASE("zero events is a validation error") {
  CoxDesign d;
  d.times = {1, 2};
  d.events = {0, 0};
  d.regressors.resize(2, 1);
  d.regressors << 1, 0;
  CHECK_THROWS_AS(fit(d), std::invalid_argument);
}

TEST_CASE("constant regressor is flagged non-identifiable") {
  CoxDesign d;
  d.times = {1, 2, 3};
  d.events = {1, 1, 0};
  d.regressors = Eigen::MatrixXd::Ones(3, 1);
  const CoxFit f = fit(d);
  CHECK(f.singular_information);
  CHECK(!f.converged);
}

TEST_CASE("unit weights reproduce the unweighted fit") {
  Rng rng(33);
  const CoxDesign d = random_design(rng, 12);
  CoxDesign w = d;
  w.weights.assign(d.times.size(), 1.0);
  const CoxFit a = fit(d);
  const CoxFit b = fit_weighted(w);
  REQUIRE(a.converged == b.converged);
  if (a.converged) CHECK(std::abs(a.beta(0) - b.beta(0)) < 1e-12);
}

TEST_CASE("common weight rescaling leaves the maximizer unchanged") {
  Rng rng(55);
  Eigen::VectorXd ref;
  for (int k = 0; k < 5; ++k) {
    CoxDesign d = random_design(rng);
    d.weights.clear();
    for (std::size_t i = 0; i < d.times.size(); ++i)
      d.weights.push_back(0.5 + 2.0 * rng.uniform01());
    const CoxFit a = fit_weighted(d);
    CoxDesign scaled = d;
    for (double& w : scaled.weights) w *= 3.7;
    const CoxFit b = fit_weighted(scaled);
    if (!a.converged || !b.converged) continue;
    CHECK(std::abs(a.beta(0) - b.beta(0)) < 1e-7);
  }
}

TEST_CASE("nonpositive weights rejected") {
  CoxDesign d = four_subject_design();
  d.weights = {1, 0, 1, 1};
  CHECK_THROWS_AS(fit_weighted(d), std::invalid_argument);
  CHECK_THROWS_AS(fit_weighted(four_subject_design()), std::invalid_argument);
}

TEST_CASE("label swap negates the estimate") {
  Rng rng(808);
  const CoxDesign d = random_design(rng);
  CoxDesign swapped = d;
  swapped.regressors = (1.0 - d.regressors.array()).matrix();
  const CoxFit a = fit(d);
  const CoxFit b = fit(swapped);
  if (a.converged && b.converged) CHECK(std::abs(a.beta(0) + b.beta(0)) < 1e-10);
}

TEST_CASE("monotone time transforms leave the estimate unchanged") {
  Rng rng(909);
  const CoxDesign d = random_design(rng);
  CoxDesign transformed = d;
  for (double& t : transformed.times) t = std::exp(t / 50.0);
  const CoxFit a = fit(d);
  const CoxFit b = fit(transformed);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(std::abs(a.beta(0) - b.beta(0)) < 1e-10);
}

TEST_CASE("Efron and Breslow agree without ties and both handle ties") {
  Rng rng(616);
  const CoxDesign d = random_design(rng);
  CoxOptions efron, breslow;
  breslow.ties = TieMethod::Breslow;
  const CoxFit a = fit(d, efron);
  const CoxFit b = fit(d, breslow);
  REQUIRE(a.converged);
  CHECK(std::abs(a.beta(0) - b.beta(0)) < 1e-10);

  CoxDesign tied;
  tied.times = {1, 1, 1, 2, 2, 3};
  tied.events = {1, 1, 0, 1, 1, 0};
  tied.regressors.resize(6, 1);
  tied.regressors << 1, 0, 1, 0, 1, 0;
  const CoxFit te = fit(tied, efron);
  const CoxFit tb = fit(tied, breslow);
  CHECK(te.converged);
  CHECK(tb.converged);
  CHECK(std::isfinite(te.beta(0)));
  CHECK(std::isfinite(tb.beta(0)));
  CHECK(te.beta(0) != tb.beta(0));  // the corrections genuinely differ here
}

TEST_CASE("iteration trace is emitted when requested") {
  std::ostringstream trace;
  CoxOptions options;
  options.trace = &trace;
  const CoxFit f = fit(four_subject_design(), options);
  REQUIRE(f.converged);
  std::istringstream in(trace.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == f.iterations);
}
