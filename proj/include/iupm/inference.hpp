#pragma once

// Expected counts, Fisher information, covariance, Wald intervals and the
// maximum-likelihood fit over one or more dilution levels.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"
#include "iupm/optimizer.hpp"
#include "iupm/poisson.hpp"
#include "iupm/special.hpp"

namespace iupm {

// E(m) for M wells at total rate Lambda with sequencing fraction q.
double expected_m(double Lambda, std::int64_t M, double q,
                  RoundingRule rule = RoundingRule::HalfEven);

// E(Y_i) for a DVL with rate lambda_i inside total rate Lambda.
double expected_y(double lambda_i, double Lambda, std::int64_t M, double q,
                  RoundingRule rule = RoundingRule::HalfEven);

// E(Y_i) / (1 - e^{-lambda_i}); depends on the DVL only through Lambda.
double expected_y_factor(double Lambda, std::int64_t M, double q,
                         RoundingRule rule = RoundingRule::HalfEven);

// Expected information of one level in the per-well rates, stored as
// diag(diag) + common * ones.
StructuredMatrix fisher_structured(const Eigen::VectorXd& lambda, std::int64_t M,
                                   double q,
                                   RoundingRule rule = RoundingRule::HalfEven);
Eigen::MatrixXd fisher_information(const Eigen::VectorXd& lambda, std::int64_t M,
                                   double q,
                                   RoundingRule rule = RoundingRule::HalfEven);

// Sum over levels of u^2 * I(u tau). q per level is q_or_derived().
StructuredMatrix fisher_structured_multi(const Eigen::VectorXd& tau,
                                         const MultiDilutionAssay& assay,
                                         RoundingRule rule = RoundingRule::HalfEven);
Eigen::MatrixXd fisher_information_multi(const Eigen::VectorXd& tau,
                                         const MultiDilutionAssay& assay,
                                         RoundingRule rule = RoundingRule::HalfEven);

// Negative Hessian of the multi-level log-likelihood (diagnostic).
Eigen::MatrixXd observed_information_multi(const Eigen::VectorXd& tau,
                                           const MultiDilutionAssay& assay);

// Inverse of a symmetric positive-definite information matrix. Throws
// SingularInformation when the matrix is not positive definite or its
// condition number exceeds max_condition.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& info,
                           double max_condition = 1e12);

struct Interval {
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;  // estimate was 0 or infinite
};

// exp(log T -/+ z se / T).
Interval wald_ci(double iupm, double se, double alpha = 0.05);

// Log-likelihood in per-million rates tau summed over levels, and its
// derivatives with respect to tau.
double multi_log_likelihood(const Eigen::VectorXd& tau,
                            const MultiDilutionAssay& assay);
Eigen::VectorXd multi_gradient(const Eigen::VectorXd& tau,
                               const MultiDilutionAssay& assay);
Eigen::MatrixXd multi_hessian(const Eigen::VectorXd& tau,
                              const MultiDilutionAssay& assay);

struct FitOptions {
  OptOptions opt;
  double alpha = 0.05;
  RoundingRule rounding = RoundingRule::HalfEven;
  ValidationOptions validation;
  // When false, an information matrix that cannot be inverted leaves the
  // covariance empty and se NaN instead of throwing.
  bool require_covariance = true;
  // Newton refinement with the analytic Hessian after the quasi-Newton run.
  bool polish = true;
};

struct FitResult {
  Eigen::VectorXd tau_hat;
  double iupm = 0.0;
  Eigen::MatrixXd covariance;
  double se_iupm = std::numeric_limits<double>::quiet_NaN();
  Interval ci;
  double alpha = 0.05;
  double log_lik = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  ExtremeOutcome extreme = ExtremeOutcome::Regular;
  std::optional<Eigen::VectorXd> bias;
  int clamped = 0;
  bool boundary = false;
  std::vector<std::size_t> active;
  bool information_ok = true;
  std::vector<std::string> dvl_ids;
};

// Standard error of sum(tau) from a covariance matrix: sqrt(1' S 1).
double se_of_total(const Eigen::MatrixXd& cov);

// MLE of the per-DVL rates. n = 0 (or UDSA dropped via without_udsa) fits the
// single-rate model.
FitResult fit_mle(const MultiDilutionAssay& assay, const FitOptions& opts = {});

}  // namespace iupm
