#pragma once

// Poisson observed-data log-likelihood of one dilution level in per-well
// rates lambda (u = 1), with its gradient, Hessian and closed-form special
// cases. Dilution scaling lives in the inference layer.

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"

namespace iupm {

// -inf when some lambda_i = 0 carries Y_i > 0 (or Lambda = 0 with unsequenced
// positives). lambda_i = 0 with Y_i = 0 contributes nothing.
double log_likelihood(const Eigen::VectorXd& lambda, const DilutionLevel& d);

Eigen::VectorXd gradient(const Eigen::VectorXd& lambda, const DilutionLevel& d);

// Hessian as diag(diag) + common * ones.
struct StructuredMatrix {
  Eigen::VectorXd diag;
  double common = 0.0;

  Eigen::MatrixXd dense() const;
};

StructuredMatrix hessian_structured(const Eigen::VectorXd& lambda,
                                    const DilutionLevel& d);
Eigen::MatrixXd hessian(const Eigen::VectorXd& lambda, const DilutionLevel& d);

// log(M / M_N); +inf when M_N = 0.
double closed_form_no_udsa(std::int64_t M, std::int64_t MN);

// -log(1 - Y_i / M); +inf components where Y_i = M.
Eigen::VectorXd closed_form_full_udsa(std::int64_t M,
                                      const std::vector<std::int64_t>& Y);

enum class ExtremeOutcome { Regular, AllNegative, AllPositiveSingleDVL };

std::string_view to_string(ExtremeOutcome e);

ExtremeOutcome classify_extreme(const MultiDilutionAssay& assay);

}  // namespace iupm
