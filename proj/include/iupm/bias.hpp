#pragma once

// Second-order bias correction of the MLE: b = S A vec(S) with S the inverse
// expected information and A_k = -dI/dtau_k - E[d3 l / dtau dtau' dtau_k] / 2.

#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"
#include "iupm/inference.hpp"
#include "iupm/poisson.hpp"

namespace iupm {

// E[d3 l / d lambda_i^3] per i (diag) and the value shared by every other
// index pattern (common).
struct ThirdDerivatives {
  Eigen::VectorXd diag;
  double common = 0.0;
};

ThirdDerivatives third_derivative_expectations(
    const Eigen::VectorXd& lambda, std::int64_t M, double q,
    RoundingRule rule = RoundingRule::HalfEven);

// Sum over levels of u^3 times the single-level values at u tau.
ThirdDerivatives third_derivative_expectations_multi(
    const Eigen::VectorXd& tau, const MultiDilutionAssay& assay,
    RoundingRule rule = RoundingRule::HalfEven);

enum class BiasSign {
  CoxSnell,   // A_k = -dI/dtau_k - E[l'''_k] / 2
  Displayed,  // A_k = +dI/dtau_k - E[l'''_k] / 2 (diagnostic only)
};

struct BiasComponents {
  // dI/dtau_k = diag(dI_diag[k]) + dI_common[k] * ones.
  std::vector<Eigen::VectorXd> dI_diag;
  std::vector<double> dI_common;
  ThirdDerivatives third;
  BiasSign sign = BiasSign::CoxSnell;
  Eigen::VectorXd steps;

  std::size_t n() const { return dI_common.size(); }
  Eigen::MatrixXd dI_block(std::size_t k) const;
  Eigen::MatrixXd a_block(std::size_t k) const;
};

// Central differences of the expected information in tau with
// h_k = max(1e-6, 1e-6 tau_k), shrunk to tau_k / 2 near zero.
BiasComponents a_matrices(const Eigen::VectorXd& tau,
                          const MultiDilutionAssay& assay,
                          RoundingRule rule = RoundingRule::HalfEven,
                          BiasSign sign = BiasSign::CoxSnell);

// Single level at u = 1.
BiasComponents a_matrices(const Eigen::VectorXd& lambda, std::int64_t M,
                          double q, RoundingRule rule = RoundingRule::HalfEven,
                          BiasSign sign = BiasSign::CoxSnell);

Eigen::VectorXd bias_term(const Eigen::MatrixXd& cov,
                          const BiasComponents& comps);

// Applies the correction to a finished MLE fit: tau* = tau - b with negative
// components clamped to 0 (counted in clamped); the interval is recentered on
// the corrected total with the MLE's standard error.
FitResult bias_correct(const FitResult& mle, const MultiDilutionAssay& assay,
                       const FitOptions& opts = {},
                       BiasSign sign = BiasSign::CoxSnell);

FitResult fit_bc_mle(const MultiDilutionAssay& assay,
                     const FitOptions& opts = {});

}  // namespace iupm
