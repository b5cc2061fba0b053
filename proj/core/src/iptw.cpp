#include "hrsim/iptw.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hrsim {

namespace {
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

double PropensityModel::propensity(double l) const {
  return expit(alpha0 + alpha1 * l);
}

PropensityModel fit_propensity(const Cohort& cohort, const PropensityOptions& options) {
  const std::size_t n = cohort.subjects.size();
  std::size_t n_treated = 0;
  for (const Subject& s : cohort.subjects) n_treated += s.treatment;
  if (n_treated == 0 || n_treated == n)
    throw std::invalid_argument("fit_propensity: cohort has a single arm");

  PropensityModel model;
  model.alpha0 = std::log(static_cast<double>(n_treated) /
                          static_cast<double>(n - n_treated));
  model.alpha1 = 0.0;

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    model.iterations = iter;
    double u0 = 0.0, u1 = 0.0, i00 = 0.0, i01 = 0.0, i11 = 0.0;
    for (const Subject& s : cohort.subjects) {
      const double ps = expit(model.alpha0 + model.alpha1 * s.covariate);
      const double r = s.treatment - ps;
      const double v = ps * (1.0 - ps);
      u0 += r;
      u1 += s.covariate * r;
      i00 += v;
      i01 += s.covariate * v;
      i11 += s.covariate * s.covariate * v;
    }
    if (std::max(std::abs(u0), std::abs(u1)) < options.tol) {
      model.converged = true;
      break;
    }
    const double det = i00 * i11 - i01 * i01;
    if (!(std::abs(det) > 1e-12 * std::max(1.0, i00 * i11))) break;
    model.alpha0 += (i11 * u0 - i01 * u1) / det;
    model.alpha1 += (i00 * u1 - i01 * u0) / det;
    if (!std::isfinite(model.alpha0) || !std::isfinite(model.alpha1)) break;
  }
  // Coefficients diverging along a separating direction never satisfy the
  // score criterion; a huge |alpha| means the same even if the score got small.
  if (!model.converged ||
      std::max(std::abs(model.alpha0), std::abs(model.alpha1)) > 30.0) {
    model.separation = true;
    model.converged = false;
  }
  return model;
}

std::vector<double> compute_weights(const PropensityModel& model, const Cohort& cohort) {
  if (!model.converged)
    throw std::invalid_argument("compute_weights: propensity model not converged");
  std::vector<double> weights;
  weights.reserve(cohort.subjects.size());
  for (const Subject& s : cohort.subjects) {
    const double ps = model.propensity(s.covariate);
    if (!(ps > 1e-12 && ps < 1.0 - 1e-12))
      throw std::runtime_error("compute_weights: degenerate propensity for subject " +
                               std::to_string(s.id));
    weights.push_back(s.treatment ? 1.0 / ps : 1.0 / (1.0 - ps));
  }
  return weights;
}

CoxDesign make_design(const Cohort& cohort, bool adjust_covariate) {
  const auto n = static_cast<Eigen::Index>(cohort.subjects.size());
  CoxDesign design;
  design.times.reserve(n);
  design.events.reserve(n);
  design.regressors.resize(n, adjust_covariate ? 2 : 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Subject& s = cohort.subjects[i];
    design.times.push_back(s.observed_time);
    design.events.push_back(s.event);
    design.regressors(i, 0) = s.treatment;
    if (adjust_covariate) design.regressors(i, 1) = s.covariate;
  }
  return design;
}

CoxFit iptw_hazard_ratio(const Cohort& cohort, const CoxOptions& options) {
  const PropensityModel model = fit_propensity(cohort);
  CoxDesign design = make_design(cohort, /*adjust_covariate=*/false);
  design.weights = compute_weights(model, cohort);
  return fit_weighted(design, options);
}

}  // namespace hrsim
