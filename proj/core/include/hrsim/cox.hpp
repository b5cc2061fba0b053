#pragma once

#include <Eigen/Core>
#include <ostream>
#include <vector>

namespace hrsim {

enum class TieMethod { Efron, Breslow };

struct CoxOptions {
  TieMethod ties = TieMethod::Efron;
  double tol = 1e-9;        // on max |score| and relative log-PL change
  int max_iter = 50;
  int max_halvings = 10;
  double beta_bound = 10.0; // ||beta||_inf beyond this flags monotone likelihood
  std::ostream* trace = nullptr;  // one line per iteration when set
};

// Right-censored design for a weighted Cox partial-likelihood fit.
// Regressors: one column (treatment) or two (treatment, covariate).
// Empty weights mean unit weights.
struct CoxDesign {
  std::vector<double> times;
  std::vector<int> events;
  Eigen::MatrixXd regressors;   // n x p
  std::vector<double> weights;  // empty or size n, all > 0
  double entry_time = 0.0;      // common left boundary, period fits only

  void validate() const;  // throws std::invalid_argument
  Eigen::Index n() const { return regressors.rows(); }
  Eigen::Index p() const { return regressors.cols(); }
};

struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  double loglik_at_beta = 0.0;
  double loglik_at_zero = 0.0;
  int iterations = 0;
  bool converged = false;
  bool monotone_likelihood = false;
  bool hit_max_iter = false;
  bool singular_information = false;
};

// Log of the weighted partial likelihood:
//   sum over events i of w_i * [beta'x_i - log sum_{j in R(t_i)} w_j exp(beta'x_j)]
// with the Efron or Breslow correction when event times tie.
double log_partial_likelihood(const CoxDesign& design, const Eigen::VectorXd& beta,
                              TieMethod ties = TieMethod::Efron);

// Analytic gradient and negative Hessian (observed information) of the
// weighted log partial likelihood.
void score_and_information(const CoxDesign& design, const Eigen::VectorXd& beta,
                           Eigen::VectorXd& score, Eigen::MatrixXd& info,
                           TieMethod ties = TieMethod::Efron);

// Newton-Raphson from beta = 0 with step-halving.
CoxFit fit(const CoxDesign& design, const CoxOptions& options = {});

// Same path as fit but requires explicit positive weights.
CoxFit fit_weighted(const CoxDesign& design, const CoxOptions& options = {});

}  // namespace hrsim
