#pragma once

// Negative-binomial (gamma-mixed Poisson) version of the multi-dilution
// likelihood with a shared dispersion gamma >= 0, its MLE and the boundary
// likelihood ratio test against the Poisson model.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"
#include "iupm/inference.hpp"

namespace iupm {

// Pr(X = 0) = (1 + gamma lambda)^{-1/gamma}; e^{-lambda} at gamma = 0.
double nb_zero_prob(double lambda, double gamma);

// Poisson-equivalent rate -log Pr(X = 0) = log1p(gamma lambda) / gamma.
double nb_effective_rate(double lambda, double gamma);

double nb_log_likelihood(const Eigen::VectorXd& tau, double gamma,
                         const MultiDilutionAssay& assay);

// Gradient in (tau, gamma); the last entry is the gamma derivative.
Eigen::VectorXd nb_gradient(const Eigen::VectorXd& tau, double gamma,
                            const MultiDilutionAssay& assay);

struct NBFit {
  Eigen::VectorXd tau_hat;
  double gamma_hat = 0.0;
  double iupm = 0.0;
  double log_lik = 0.0;
  bool converged = false;
  int iterations = 0;
  bool gamma_at_bound = false;
  ExtremeOutcome extreme = ExtremeOutcome::Regular;
  std::vector<std::string> dvl_ids;
};

// Throws NotIdentifiable when the assay has fewer than two dilution levels.
NBFit fit_negbin(const MultiDilutionAssay& assay, const FitOptions& opts = {});

// Same, reusing a finished Poisson fit of the same assay as the start.
NBFit fit_negbin(const MultiDilutionAssay& assay, const FitResult& poisson,
                 const FitOptions& opts = {});

struct LrtResult {
  double statistic = 0.0;      // floored at 0
  double p_value = 1.0;
  double raw_statistic = 0.0;  // 2 (l_NB - l_P) before flooring
  FitResult poisson;
  NBFit negbin;
};

// 0.5 Pr(chi^2_1 > s) for s > 0, 1 at s = 0.
double lrt_p_value(double statistic);

LrtResult lrt_overdispersion(const MultiDilutionAssay& assay,
                             const FitOptions& opts = {});

}  // namespace iupm
