#include "iupm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iupm/errors.hpp"

namespace iupm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_expectation_args(double Lambda, std::int64_t M, double q) {
  if (!(Lambda >= 0.0) || M < 0 || !(q >= 0.0 && q <= 1.0)) {
    throw std::domain_error("expectation: need Lambda >= 0, M >= 0, q in [0, 1]");
  }
}

}  // namespace

// sum_{k=1}^{M} C(M,k) <q k> p^{k-1} (1-p)^{M-k}, p = 1 - e^{-Lambda}.
double expected_y_factor(double Lambda, std::int64_t M, double q,
                         RoundingRule rule) {
  check_expectation_args(Lambda, M, q);
  if (q == 0.0 || M == 0) return 0.0;
  if (q == 1.0) return static_cast<double>(M);
  const double log_p = log1mexp(Lambda);
  double sum = 0.0;
  for (std::int64_t k = 1; k <= M; ++k) {
    const auto r = nint(q * static_cast<double>(k), rule);
    if (r == 0) continue;
    double lt = log_binom(M, k) - Lambda * static_cast<double>(M - k);
    if (k > 1) lt += static_cast<double>(k - 1) * log_p;
    sum += static_cast<double>(r) * std::exp(lt);
  }
  return sum;
}

double expected_m(double Lambda, std::int64_t M, double q, RoundingRule rule) {
  check_expectation_args(Lambda, M, q);
  if (q == 0.0 || Lambda == 0.0 || M == 0) return 0.0;
  if (q == 1.0) return static_cast<double>(M) * -std::expm1(-Lambda);
  const double log_p = log1mexp(Lambda);
  double sum = 0.0;
  for (std::int64_t j = 1; j <= M; ++j) {  // j positive wells
    const auto r = nint(q * static_cast<double>(j), rule);
    if (r == 0) continue;
    const double lt = log_binom(M, j) + static_cast<double>(j) * log_p -
                      Lambda * static_cast<double>(M - j);
    sum += static_cast<double>(r) * std::exp(lt);
  }
  return sum;
}

double expected_y(double lambda_i, double Lambda, std::int64_t M, double q,
                  RoundingRule rule) {
  check_expectation_args(Lambda, M, q);
  if (!(lambda_i >= 0.0) || lambda_i > Lambda * (1.0 + 1e-12)) {
    throw std::domain_error("expected_y: need 0 <= lambda_i <= Lambda");
  }
  if (lambda_i == 0.0) return 0.0;
  return -std::expm1(-lambda_i) * expected_y_factor(Lambda, M, q, rule);
}

StructuredMatrix fisher_structured(const Eigen::VectorXd& lambda, std::int64_t M,
                                   double q, RoundingRule rule) {
  const double Lambda = lambda.sum();
  check_expectation_args(Lambda, M, q);
  StructuredMatrix info;
  const double S = expected_y_factor(Lambda, M, q, rule);
  // E(Y_i) e^l / (e^l - 1)^2 = S / (e^l - 1).
  info.diag = lambda.unaryExpr([S](double l) { return S == 0.0 ? 0.0 : S / std::expm1(l); });
  if (q == 1.0) {
    info.common = 0.0;
  } else {
    const double unseq =
        static_cast<double>(M) * -std::expm1(-Lambda) - expected_m(Lambda, M, q, rule);
    info.common = unseq == 0.0 ? 0.0 : unseq * exp_over_expm1_sq(Lambda);
  }
  return info;
}

Eigen::MatrixXd fisher_information(const Eigen::VectorXd& lambda, std::int64_t M,
                                   double q, RoundingRule rule) {
  return fisher_structured(lambda, M, q, rule).dense();
}

StructuredMatrix fisher_structured_multi(const Eigen::VectorXd& tau,
                                         const MultiDilutionAssay& assay,
                                         RoundingRule rule) {
  StructuredMatrix total;
  total.diag = Eigen::VectorXd::Zero(tau.size());
  for (const auto& lv : assay.levels) {
    const auto part = fisher_structured(lv.u * tau, lv.M, lv.q_or_derived(), rule);
    const double u2 = lv.u * lv.u;
    total.diag += u2 * part.diag;
    total.common += u2 * part.common;
  }
  return total;
}

Eigen::MatrixXd fisher_information_multi(const Eigen::VectorXd& tau,
                                         const MultiDilutionAssay& assay,
                                         RoundingRule rule) {
  return fisher_structured_multi(tau, assay, rule).dense();
}

Eigen::MatrixXd observed_information_multi(const Eigen::VectorXd& tau,
                                           const MultiDilutionAssay& assay) {
  return -multi_hessian(tau, assay);
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& info, double max_condition) {
  const auto n = info.rows();
  if (info.cols() != n) throw SingularInformation("information matrix is not square");
  if (n == 0) return Eigen::MatrixXd(0, 0);
  if (!info.allFinite()) {
    throw SingularInformation("information matrix has non-finite entries");
  }
  const Eigen::MatrixXd sym = 0.5 * (info + info.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > max_condition) {
    std::ostringstream os;
    os << "information matrix (" << n << "x" << n
       << ") is singular or ill-conditioned: eigenvalues in [" << lo << ", " << hi
       << "]";
    throw SingularInformation(os.str());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

Interval wald_ci(double iupm, double se, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("wald_ci: alpha in (0, 1)");
  if (!(se >= 0.0) && !std::isnan(se)) throw std::domain_error("wald_ci: se must be >= 0");
  Interval ci;
  if (iupm == 0.0 || std::isinf(iupm)) {
    ci.lower = iupm;
    ci.upper = iupm;
    ci.degenerate = true;
    return ci;
  }
  if (!(iupm > 0.0)) throw std::domain_error("wald_ci: iupm must be positive");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double half = z * se / iupm;
  ci.lower = iupm * std::exp(-half);
  ci.upper = iupm * std::exp(half);
  return ci;
}

double multi_log_likelihood(const Eigen::VectorXd& tau,
                            const MultiDilutionAssay& assay) {
  double ll = 0.0;
  for (const auto& lv : assay.levels) ll += log_likelihood(lv.u * tau, lv);
  return ll;
}

Eigen::VectorXd multi_gradient(const Eigen::VectorXd& tau,
                               const MultiDilutionAssay& assay) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(tau.size());
  for (const auto& lv : assay.levels) g += lv.u * gradient(lv.u * tau, lv);
  return g;
}

Eigen::MatrixXd multi_hessian(const Eigen::VectorXd& tau,
                              const MultiDilutionAssay& assay) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(tau.size(), tau.size());
  for (const auto& lv : assay.levels) h += lv.u * lv.u * hessian(lv.u * tau, lv);
  return h;
}

double se_of_total(const Eigen::MatrixXd& cov) {
  if (cov.size() == 0) return kNaN;
  return std::sqrt(std::max(0.0, cov.sum()));
}

namespace {

Eigen::VectorXd initial_rates(const MultiDilutionAssay& a) {
  bool sequenced = false;
  for (const auto& lv : a.levels) sequenced = sequenced || lv.m > 0;
  const auto n = static_cast<Eigen::Index>(a.n);
  Eigen::VectorXd lambda0(n);
  double weight = 0.0, u_sum = 0.0;
  if (!sequenced) {
    // Single-rate start from the pooled positive fraction.
    double pos = 0.0;
    for (const auto& lv : a.levels) {
      pos += static_cast<double>(lv.MP());
      weight += static_cast<double>(lv.M);
      u_sum += lv.u * static_cast<double>(lv.M);
    }
    const double lo = 0.5 / weight;
    const double p = std::clamp(pos / weight, lo, 1.0 - lo);
    lambda0.setConstant(-std::log1p(-p) / static_cast<double>(std::max<Eigen::Index>(n, 1)));
  } else {
    for (const auto& lv : a.levels) {
      const double w = static_cast<double>(lv.MN + lv.m);
      weight += w;
      u_sum += lv.u * w;
    }
    const double lo = 0.5 / weight;
    for (Eigen::Index i = 0; i < n; ++i) {
      double yt = 0.0;
      for (const auto& lv : a.levels) yt += static_cast<double>(lv.Y[i]);
      const double p = std::clamp(yt / weight, lo, 1.0 - lo);
      lambda0[i] = -std::log1p(-p);
    }
  }
  return lambda0 / (u_sum / weight);
}

void finish_inference(FitResult& r, const MultiDilutionAssay& a,
                      const FitOptions& opts) {
  const auto info = fisher_information_multi(r.tau_hat, a, opts.rounding);
  try {
    r.covariance = covariance(info);
    r.se_iupm = se_of_total(r.covariance);
    r.ci = wald_ci(r.iupm, r.se_iupm, opts.alpha);
  } catch (const SingularInformation&) {
    if (opts.require_covariance) throw;
    r.information_ok = false;
    r.covariance.resize(0, 0);
    r.se_iupm = kNaN;
    r.ci = Interval{};
  }
}

}  // namespace

FitResult fit_mle(const MultiDilutionAssay& input, const FitOptions& opts) {
  require_valid(input, opts.validation);
  const MultiDilutionAssay a = input.n == 0 ? without_udsa(input) : input;
  const auto n = static_cast<Eigen::Index>(a.n);

  FitResult r;
  r.alpha = opts.alpha;
  r.dvl_ids = a.dvl_ids;
  r.extreme = classify_extreme(a);
  if (r.extreme == ExtremeOutcome::AllNegative) {
    r.tau_hat = Eigen::VectorXd::Zero(n);
    r.iupm = 0.0;
    r.se_iupm = 0.0;
    r.covariance = Eigen::MatrixXd::Zero(n, n);
    r.ci = wald_ci(0.0, 0.0, opts.alpha);
    r.log_lik = multi_log_likelihood(r.tau_hat, a);
    r.converged = true;
    return r;
  }
  if (r.extreme == ExtremeOutcome::AllPositiveSingleDVL) {
    r.tau_hat = Eigen::VectorXd::Constant(n, kInf);
    r.iupm = kInf;
    r.se_iupm = kInf;
    r.ci = wald_ci(kInf, kInf, opts.alpha);
    r.converged = true;
    return r;
  }

  auto f = [&](const Eigen::VectorXd& theta) {
    return multi_log_likelihood(theta.array().exp().matrix(), a);
  };
  auto g = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd tau = theta.array().exp().matrix();
    return Eigen::VectorXd(tau.cwiseProduct(multi_gradient(tau, a)));
  };
  const Eigen::VectorXd theta0 = initial_rates(a).array().log().matrix();
  const auto opt = maximize(f, g, theta0, opts.opt);
  Eigen::VectorXd tau = opt.x.array().exp().matrix();
  r.iterations = opt.iterations;

  if (opts.polish) {
    double ll = multi_log_likelihood(tau, a);
    Eigen::VectorXd grad = multi_gradient(tau, a);
    for (int k = 0; k < 50; ++k) {
      const double gn = grad.lpNorm<Eigen::Infinity>();
      if (gn == 0.0) break;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-multi_hessian(tau, a));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd step = ldlt.solve(grad);
      if (!step.allFinite()) break;
      bool accepted = false;
      const double noise = 1e-13 * (1.0 + std::fabs(ll));
      for (double t = 1.0; t > 1e-6; t *= 0.5) {
        const Eigen::VectorXd cand = tau + t * step;
        if ((cand.array() <= 0.0).any()) continue;
        const double lc = multi_log_likelihood(cand, a);
        if (!std::isfinite(lc) || lc < ll - noise) continue;
        const Eigen::VectorXd gc = multi_gradient(cand, a);
        if (lc < ll && gc.lpNorm<Eigen::Infinity>() >= gn) continue;
        tau = cand;
        ll = lc;
        grad = gc;
        accepted = true;
        break;
      }
      ++r.iterations;
      if (!accepted) break;
      if ((step.array().abs() <= 1e-15 * tau.array()).all()) break;
    }
  }

  r.tau_hat = tau;
  r.iupm = tau.sum();
  r.log_lik = multi_log_likelihood(tau, a);
  r.grad_norm = tau.cwiseProduct(multi_gradient(tau, a)).lpNorm<Eigen::Infinity>();
  r.converged = opt.converged || r.grad_norm <= opts.opt.grad_tol;
  finish_inference(r, a, opts);
  return r;
}

}  // namespace iupm
