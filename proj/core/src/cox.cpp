#include "hrsim/cox.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hrsim {

namespace {

std::vector<int> order_descending(const std::vector<double>& times) {
  std::vector<int> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&times](int a, int b) { return times[a] > times[b]; });
  return order;
}

// One pass over the risk sets, largest time first.  Computes the weighted
// log partial likelihood and, when requested, its gradient and negative
// Hessian.  Regressor columns are centered internally; the value and
// derivatives are exactly invariant to the shift, which keeps exp() in range.
void accumulate(const CoxDesign& design, const std::vector<int>& order,
                const Eigen::VectorXd& beta, TieMethod ties, bool want_derivs,
                double& loglik, Eigen::VectorXd* score, Eigen::MatrixXd* info) {
  const Eigen::Index n = design.n();
  const Eigen::Index p = design.p();
  const bool weighted = !design.weights.empty();
  const Eigen::RowVectorXd center = design.regressors.colwise().mean();

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  loglik = 0.0;
  if (want_derivs) {
    score->setZero(p);
    info->setZero(p, p);
  }

  Eigen::VectorXd x(p), s1d(p), s1k(p), xd_sum(p);
  Eigen::MatrixXd s2d(p, p);

  Eigen::Index i = 0;
  while (i < n) {
    const double t = design.times[order[i]];
    // Tie group: everyone at time t enters the risk set, then deaths at t
    // contribute.
    double s0d = 0.0, sumw_d = 0.0, eta_d = 0.0;
    s1d.setZero();
    s2d.setZero();
    xd_sum.setZero();
    int n_deaths = 0;
    Eigen::Index j = i;
    for (; j < n && design.times[order[j]] == t; ++j) {
      const int idx = order[j];
      x = (design.regressors.row(idx) - center).transpose();
      const double w = weighted ? design.weights[idx] : 1.0;
      const double eta = beta.dot(x);
      const double r = w * std::exp(eta);
      s0 += r;
      if (want_derivs) {
        s1 += r * x;
        s2 += r * x * x.transpose();
      }
      if (design.events[idx]) {
        ++n_deaths;
        sumw_d += w;
        eta_d += w * eta;
        s0d += r;
        if (want_derivs) {
          xd_sum += w * x;
          s1d += r * x;
          s2d += r * x * x.transpose();
        }
      }
    }
    if (n_deaths > 0) {
      loglik += eta_d;
      if (want_derivs) *score += xd_sum;
      const double wbar = sumw_d / n_deaths;
      for (int k = 0; k < n_deaths; ++k) {
        const double frac =
            ties == TieMethod::Efron ? static_cast<double>(k) / n_deaths : 0.0;
        const double s0k = s0 - frac * s0d;
        loglik -= wbar * std::log(s0k);
        if (want_derivs) {
          s1k = s1 - frac * s1d;
          *score -= (wbar / s0k) * s1k;
          *info += wbar * ((s2 - frac * s2d) / s0k -
                           (s1k * s1k.transpose()) / (s0k * s0k));
        }
      }
    }
    i = j;
  }
}

bool solvable(const Eigen::LDLT<Eigen::MatrixXd>& ldlt, Eigen::Index p) {
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0)) return false;
  for (Eigen::Index k = 0; k < p; ++k)
    if (!(d(k) > dmax * 1e-12)) return false;
  return true;
}

}  // namespace

void CoxDesign::validate() const {
  const auto n = static_cast<std::size_t>(regressors.rows());
  if (n < 2) throw std::invalid_argument("CoxDesign: need at least 2 subjects");
  if (times.size() != n || events.size() != n)
    throw std::invalid_argument("CoxDesign: times/events/regressors length mismatch");
  if (regressors.cols() < 1)
    throw std::invalid_argument("CoxDesign: need at least one regressor");
  if (!weights.empty()) {
    if (weights.size() != n)
      throw std::invalid_argument("CoxDesign: weights length mismatch");
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w))
        throw std::invalid_argument("CoxDesign: weights must be positive and finite");
  }
  bool any_event = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(times[i] > 0.0) || !std::isfinite(times[i]))
      throw std::invalid_argument("CoxDesign: times must be positive and finite");
    if (events[i] != 0 && events[i] != 1)
      throw std::invalid_argument("CoxDesign: events must be 0/1");
    any_event |= events[i] == 1;
  }
  if (!any_event) throw std::invalid_argument("CoxDesign: no events");
}

double log_partial_likelihood(const CoxDesign& design, const Eigen::VectorXd& beta,
                              TieMethod ties) {
  design.validate();
  if (!beta.allFinite() || beta.size() != design.p())
    throw std::domain_error("log_partial_likelihood: beta must be finite, size p");
  const std::vector<int> order = order_descending(design.times);
  double ll = 0.0;
  accumulate(design, order, beta, ties, false, ll, nullptr, nullptr);
  return ll;
}

void score_and_information(const CoxDesign& design, const Eigen::VectorXd& beta,
                           Eigen::VectorXd& score, Eigen::MatrixXd& info,
                           TieMethod ties) {
  design.validate();
  if (!beta.allFinite() || beta.size() != design.p())
    throw std::domain_error("score_and_information: beta must be finite, size p");
  const std::vector<int> order = order_descending(design.times);
  double ll = 0.0;
  accumulate(design, order, beta, ties, true, ll, &score, &info);
}

CoxFit fit(const CoxDesign& design, const CoxOptions& options) {
  design.validate();
  const Eigen::Index p = design.p();
  const std::vector<int> order = order_descending(design.times);

  CoxFit result;
  result.beta = Eigen::VectorXd::Zero(p);
  result.se = Eigen::VectorXd::Zero(p);

  // Constant regressor column: non-identifiable.
  for (Eigen::Index c = 0; c < p; ++c) {
    const Eigen::VectorXd col = design.regressors.col(c);
    if ((col.array() - col.mean()).abs().maxCoeff() == 0.0) {
      result.singular_information = true;
      return result;
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd score(p);
  Eigen::MatrixXd info(p, p);
  double loglik = 0.0;
  accumulate(design, order, beta, options.ties, true, loglik, &score, &info);
  result.loglik_at_zero = loglik;

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    result.iterations = iter;
    const double max_score = score.cwiseAbs().maxCoeff();
    if (options.trace) {
      *options.trace << iter - 1;
      for (Eigen::Index k = 0; k < p; ++k) *options.trace << ", " << beta(k);
      *options.trace << ", " << loglik << ", " << max_score << "\n";
    }
    if (max_score < options.tol) {
      result.converged = true;
      break;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (!solvable(ldlt, p)) {
      result.singular_information = true;
      break;
    }
    Eigen::VectorXd step = ldlt.solve(score);
    double new_loglik = 0.0;
    Eigen::VectorXd new_beta(p);
    int halvings = 0;
    for (;; ++halvings) {
      new_beta = beta + step;
      accumulate(design, order, new_beta, options.ties, false, new_loglik,
                 nullptr, nullptr);
      if (std::isfinite(new_loglik) && new_loglik >= loglik) break;
      if (halvings >= options.max_halvings) break;
      step *= 0.5;
    }
    const double rel_change =
        std::abs(new_loglik - loglik) / (std::abs(loglik) + 1.0);
    beta = new_beta;
    loglik = new_loglik;
    accumulate(design, order, beta, options.ties, true, loglik, &score, &info);
    if (beta.cwiseAbs().maxCoeff() > options.beta_bound) {
      result.monotone_likelihood = true;
      break;
    }
    if (score.cwiseAbs().maxCoeff() < options.tol ||
        (rel_change < options.tol && score.cwiseAbs().maxCoeff() < 1e-5)) {
      result.converged = true;
      result.iterations = iter;
      break;
    }
    if (iter == options.max_iter) result.hit_max_iter = true;
  }

  // Polish: one full Newton step from a converged point roughly squares
  // the remaining error, taking beta well past the score tolerance.
  if (result.converged) {
    for (int polish = 0; polish < 2; ++polish) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
      if (!solvable(ldlt, p)) break;
      const Eigen::VectorXd refined = beta + ldlt.solve(score);
      double refined_ll = 0.0;
      Eigen::VectorXd refined_score(p);
      Eigen::MatrixXd refined_info(p, p);
      accumulate(design, order, refined, options.ties, true, refined_ll,
                 &refined_score, &refined_info);
      if (!std::isfinite(refined_ll) ||
          refined_score.cwiseAbs().maxCoeff() > score.cwiseAbs().maxCoeff())
        break;
      beta = refined;
      loglik = refined_ll;
      score = refined_score;
      info = refined_info;
    }
  }

  result.beta = beta;
  result.loglik_at_beta = loglik;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (solvable(ldlt, p)) {
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    result.se = cov.diagonal().cwiseSqrt();
  } else {
    result.singular_information = true;
    result.se.setConstant(p, std::numeric_limits<double>::quiet_NaN());
  }
  return result;
}

CoxFit fit_weighted(const CoxDesign& design, const CoxOptions& options) {
  if (design.weights.empty())
    throw std::invalid_argument("fit_weighted: design has no weights");
  return fit(design, options);
}

}  // namespace hrsim
