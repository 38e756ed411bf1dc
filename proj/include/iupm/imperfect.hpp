#pragma once

// Likelihood for error-prone QVOA and UDSA read-outs on per-well records.
// The 2^n marginalization over true lineage indicators is evaluated in the
// product form Pr(W*|1) (S - T0) + Pr(W*|0) T0, so each well costs O(n).

#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"
#include "iupm/inference.hpp"

namespace iupm {

// Pr(W* = w_star, Z* = z_star) for a sequenced well at per-well rates lambda.
double well_joint_prob(const Eigen::VectorXd& lambda, int w_star,
                       const std::vector<std::uint8_t>& z_star,
                       const ErrorRates& rates);

// Pr(W* = w_star) for an unsequenced well.
double well_marginal_prob(const Eigen::VectorXd& lambda, int w_star,
                          const ErrorRates& rates);

// Sum of per-well log probabilities at per-well rates lambda (assay.u is not
// applied). Throws InvalidAssay naming the first well with probability 0.
double imperfect_log_likelihood(const Eigen::VectorXd& lambda,
                                const WellAssay& assay, const ErrorRates& rates);

Eigen::VectorXd imperfect_gradient(const Eigen::VectorXd& lambda,
                                   const WellAssay& assay, const ErrorRates& rates);

struct ImperfectModel {
  ErrorRates rates;
  std::vector<WellAssay> assays;  // one per dilution level

  std::size_t n() const { return assays.empty() ? 0 : assays.front().n; }
};

// Multi-level versions in per-million rates tau (lambda = u tau per level).
double imperfect_log_likelihood(const Eigen::VectorXd& tau,
                                const ImperfectModel& model);
Eigen::VectorXd imperfect_gradient(const Eigen::VectorXd& tau,
                                   const ImperfectModel& model);

// Throws InvalidAssay on inconsistent levels or rates.
void require_valid(const ImperfectModel& model);

// Box-constrained MLE over tau >= 0. The covariance is the inverse observed
// information (central differences of the analytic gradient) restricted to
// the coordinates off the bound; boundary is set when any tau_i = 0 and
// information_ok is cleared when the information cannot be inverted or
// every coordinate sits on the bound.
FitResult fit_imperfect(const ImperfectModel& model, const FitOptions& opts = {});

}  // namespace iupm
