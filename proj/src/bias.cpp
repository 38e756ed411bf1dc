#include "iupm/bias.hpp"

#include <algorithm>
#include <cmath>

#include "iupm/special.hpp"

namespace iupm {

namespace {

MultiDilutionAssay single_level(std::size_t n, std::int64_t M, double q) {
  MultiDilutionAssay a;
  a.n = n;
  DilutionLevel lv;
  lv.u = 1.0;
  lv.M = M;
  lv.Y.assign(n, 0);
  lv.q = q;
  a.levels.push_back(lv);
  return a;
}

}  // namespace

ThirdDerivatives third_derivative_expectations(const Eigen::VectorXd& lambda,
                                               std::int64_t M, double q,
                                               RoundingRule rule) {
  const double Lambda = lambda.sum();
  ThirdDerivatives t;
  if (q == 1.0) {
    t.common = 0.0;
  } else {
    const double unseq =
        static_cast<double>(M) * -std::expm1(-Lambda) - expected_m(Lambda, M, q, rule);
    t.common = unseq == 0.0 ? 0.0 : unseq * exp_third_kernel(Lambda);
  }
  const double S = expected_y_factor(Lambda, M, q, rule);
  // E(Y_i) e^l (e^l + 1) / (e^l - 1)^3 = S (e^l + 1) / (e^l - 1)^2.
  t.diag = lambda.unaryExpr([&](double l) {
    if (S == 0.0) return t.common;
    const double em1 = std::expm1(l);
    return S * (em1 + 2.0) / (em1 * em1) + t.common;
  });
  return t;
}

ThirdDerivatives third_derivative_expectations_multi(
    const Eigen::VectorXd& tau, const MultiDilutionAssay& assay,
    RoundingRule rule) {
  ThirdDerivatives total;
  total.diag = Eigen::VectorXd::Zero(tau.size());
  for (const auto& lv : assay.levels) {
    const auto part =
        third_derivative_expectations(lv.u * tau, lv.M, lv.q_or_derived(), rule);
    const double u3 = lv.u * lv.u * lv.u;
    total.diag += u3 * part.diag;
    total.common += u3 * part.common;
  }
  return total;
}

Eigen::MatrixXd BiasComponents::dI_block(std::size_t k) const {
  const auto m = static_cast<Eigen::Index>(n());
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(m, m, dI_common[k]);
  out.diagonal() += dI_diag[k];
  return out;
}

Eigen::MatrixXd BiasComponents::a_block(std::size_t k) const {
  const double s = sign == BiasSign::CoxSnell ? -1.0 : 1.0;
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd out = s * dI_block(k);
  out.array() -= 0.5 * third.common;
  out(kk, kk) -= 0.5 * (third.diag[kk] - third.common);
  return out;
}

BiasComponents a_matrices(const Eigen::VectorXd& tau,
                          const MultiDilutionAssay& assay, RoundingRule rule,
                          BiasSign sign) {
  BiasComponents c;
  c.sign = sign;
  const auto n = tau.size();
  c.steps.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double h = std::max(1e-6, 1e-6 * tau[k]);
    if (tau[k] - h <= 0.0) h = 0.5 * tau[k];
    c.steps[k] = h;
    Eigen::VectorXd up = tau, dn = tau;
    up[k] += h;
    dn[k] -= h;
    const auto fu = fisher_structured_multi(up, assay, rule);
    const auto fd = fisher_structured_multi(dn, assay, rule);
    c.dI_diag.push_back((fu.diag - fd.diag) / (2.0 * h));
    c.dI_common.push_back((fu.common - fd.common) / (2.0 * h));
  }
  c.third = third_derivative_expectations_multi(tau, assay, rule);
  return c;
}

BiasComponents a_matrices(const Eigen::VectorXd& lambda, std::int64_t M,
                          double q, RoundingRule rule, BiasSign sign) {
  return a_matrices(lambda, single_level(static_cast<std::size_t>(lambda.size()), M, q),
                    rule, sign);
}

Eigen::VectorXd bias_term(const Eigen::MatrixXd& cov, const BiasComponents& c) {
  const auto n = static_cast<Eigen::Index>(c.n());
  const double s = c.sign == BiasSign::CoxSnell ? -1.0 : 1.0;
  const Eigen::RowVectorXd col_sums = cov.colwise().sum();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double shared = s * c.dI_common[ku] - 0.5 * c.third.common;
    for (Eigen::Index r = 0; r < n; ++r) {
      v[r] += s * c.dI_diag[ku][r] * cov(r, k) + shared * col_sums[k];
    }
    v[k] -= 0.5 * (c.third.diag[k] - c.third.common) * cov(k, k);
  }
  return cov * v;
}

FitResult bias_correct(const FitResult& mle, const MultiDilutionAssay& assay,
                       const FitOptions& opts, BiasSign sign) {
  FitResult r = mle;
  const auto n = mle.tau_hat.size();
  if (mle.extreme != ExtremeOutcome::Regular || !mle.information_ok ||
      mle.covariance.size() == 0) {
    r.bias = Eigen::VectorXd::Zero(n);
    return r;
  }
  const MultiDilutionAssay a = assay.n == 0 ? without_udsa(assay) : assay;
  const auto comps = a_matrices(mle.tau_hat, a, opts.rounding, sign);
  const Eigen::VectorXd b = bias_term(mle.covariance, comps);
  r.bias = b;
  r.tau_hat = mle.tau_hat - b;
  r.clamped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r.tau_hat[i] < 0.0) {
      r.tau_hat[i] = 0.0;
      ++r.clamped;
    }
  }
  r.iupm = r.tau_hat.sum();
  r.ci = wald_ci(r.iupm, r.se_iupm, opts.alpha);
  r.log_lik = multi_log_likelihood(r.tau_hat, a);
  return r;
}

FitResult fit_bc_mle(const MultiDilutionAssay& assay, const FitOptions& opts) {
  return bias_correct(fit_mle(assay, opts), assay, opts);
}

}  // namespace iupm
