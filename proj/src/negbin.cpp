#include "iupm/negbin.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "iupm/errors.hpp"
#include "iupm/poisson.hpp"
#include "iupm/special.hpp"

namespace iupm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_args(double lambda, double gamma) {
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) {
    throw std::domain_error("negative binomial: need lambda >= 0 and gamma >= 0");
  }
}

// d nu / d gamma = (x / (1 + x) - log1p(x)) / gamma^2 with x = gamma lambda.
double effective_rate_dgamma(double lambda, double gamma) {
  const double x = gamma * lambda;
  if (x < 1e-3) {
    // lambda^2 sum_{k>=2} (-1)^{k+1} (k-1)/k x^{k-2}
    double sum = 0.0, xp = 1.0;
    for (int k = 2; k < 12; ++k) {
      const double term = static_cast<double>(k - 1) / k * xp;
      sum += (k % 2 == 0) ? -term : term;
      xp *= x;
    }
    return lambda * lambda * sum;
  }
  return (x / (1.0 + x) - std::log1p(x)) / (gamma * gamma);
}

Eigen::VectorXd effective_rates(const Eigen::VectorXd& lambda, double gamma) {
  return lambda.unaryExpr([gamma](double l) { return nb_effective_rate(l, gamma); });
}

MultiDilutionAssay working_assay(const MultiDilutionAssay& input,
                                 const FitOptions& opts) {
  require_valid(input, opts.validation);
  if (input.D() < 2) {
    throw NotIdentifiable(
        "negative binomial model is not identifiable from a single dilution level");
  }
  return input.n == 0 ? without_udsa(input) : input;
}

NBFit from_poisson(const FitResult& p) {
  NBFit r;
  r.tau_hat = p.tau_hat;
  r.gamma_hat = 0.0;
  r.iupm = p.iupm;
  r.log_lik = p.log_lik;
  r.converged = p.converged;
  r.iterations = 0;
  r.gamma_at_bound = true;
  r.extreme = p.extreme;
  r.dvl_ids = p.dvl_ids;
  return r;
}

NBFit fit_from(const MultiDilutionAssay& a, const FitResult& poisson,
               const FitOptions& opts) {
  if (poisson.extreme != ExtremeOutcome::Regular) return from_poisson(poisson);

  const auto n = static_cast<Eigen::Index>(a.n);
  auto f = [&](const Eigen::VectorXd& x) {
    return nb_log_likelihood(x.head(n).array().exp().matrix(), x[n], a);
  };
  auto g = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd tau = x.head(n).array().exp().matrix();
    Eigen::VectorXd grad = nb_gradient(tau, x[n], a);
    grad.head(n) = grad.head(n).cwiseProduct(tau);
    return grad;
  };
  Eigen::VectorXd lower = Eigen::VectorXd::Constant(n + 1, -kInf);
  lower[n] = 0.0;

  Eigen::VectorXd x0(n + 1);
  x0.head(n) = poisson.tau_hat.array().log().matrix();

  NBFit best = from_poisson(poisson);
  best.converged = false;
  const double dgamma0 = nb_gradient(poisson.tau_hat, 0.0, a)[n];
  if (poisson.converged && dgamma0 <= 1e-6 * (1.0 + std::fabs(poisson.log_lik))) {
    best.converged = true;
  }

  for (double gamma0 : {0.1, 1.0}) {
    x0[n] = gamma0;
    const auto opt = maximize_box(f, g, x0, lower, opts.opt);
    best.iterations += opt.iterations;
    // At gamma = 0 the polished Poisson fit is the better candidate.
    if (opt.x[n] > 0.0 && opt.f > best.log_lik) {
      best.tau_hat = opt.x.head(n).array().exp().matrix();
      best.gamma_hat = opt.x[n];
      best.log_lik = opt.f;
      best.converged = opt.converged;
      best.gamma_at_bound = best.gamma_hat == 0.0;
    }
    if (opt.x[n] > 0.0) break;  // restart only from the boundary
  }
  if (opts.polish && best.gamma_hat > 0.0) {
    Eigen::VectorXd x(n + 1);
    x.head(n) = best.tau_hat.array().log().matrix();
    x[n] = best.gamma_hat;
    double ll = f(x);
    Eigen::VectorXd grad = g(x);
    for (int it = 0; it < 20; ++it) {
      const double gn = grad.lpNorm<Eigen::Infinity>();
      if (gn == 0.0) break;
      Eigen::MatrixXd h(n + 1, n + 1);
      for (Eigen::Index c = 0; c <= n; ++c) {
        double step = 1e-5 * std::max(1.0, std::fabs(x[c]));
        if (c == n && x[c] - step <= 0.0) step = 0.5 * x[c];
        Eigen::VectorXd up = x, dn = x;
        up[c] += step;
        dn[c] -= step;
        h.col(c) = (g(up) - g(dn)) / (2.0 * step);
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-0.5 * (h + h.transpose()));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd step = ldlt.solve(grad);
      if (!step.allFinite()) break;
      bool accepted = false;
      const double noise = 1e-13 * (1.0 + std::fabs(ll));
      for (double t = 1.0; t > 1e-6; t *= 0.5) {
        const Eigen::VectorXd cand = x + t * step;
        if (!(cand[n] > 0.0)) continue;
        const double lc = f(cand);
        if (!std::isfinite(lc) || lc < ll - noise) continue;
        const Eigen::VectorXd gc = g(cand);
        if (lc < ll && gc.lpNorm<Eigen::Infinity>() >= gn) continue;
        x = cand;
        ll = lc;
        grad = gc;
        accepted = true;
        break;
      }
      ++best.iterations;
      if (!accepted) break;
    }
    best.tau_hat = x.head(n).array().exp().matrix();
    best.gamma_hat = x[n];
    best.log_lik = ll;
    best.converged = best.converged || grad.lpNorm<Eigen::Infinity>() <= opts.opt.grad_tol;
  }
  best.iupm = best.tau_hat.sum();
  return best;
}

}  // namespace

double nb_zero_prob(double lambda, double gamma) {
  return std::exp(-nb_effective_rate(lambda, gamma));
}

double nb_effective_rate(double lambda, double gamma) {
  check_args(lambda, gamma);
  if (gamma == 0.0) return lambda;
  const double x = gamma * lambda;
  if (x == 0.0) return 0.0;
  return lambda * (std::log1p(x) / x);
}

double nb_log_likelihood(const Eigen::VectorXd& tau, double gamma,
                         const MultiDilutionAssay& assay) {
  double ll = 0.0;
  for (const auto& lv : assay.levels) {
    ll += log_likelihood(effective_rates(lv.u * tau, gamma), lv);
  }
  return ll;
}

Eigen::VectorXd nb_gradient(const Eigen::VectorXd& tau, double gamma,
                            const MultiDilutionAssay& assay) {
  const auto n = tau.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n + 1);
  for (const auto& lv : assay.levels) {
    const Eigen::VectorXd lambda = lv.u * tau;
    const Eigen::VectorXd gp = gradient(effective_rates(lambda, gamma), lv);
    for (Eigen::Index i = 0; i < n; ++i) {
      g[i] += gp[i] * lv.u / (1.0 + gamma * lambda[i]);
      g[n] += gp[i] * effective_rate_dgamma(lambda[i], gamma);
    }
  }
  return g;
}

NBFit fit_negbin(const MultiDilutionAssay& assay, const FitOptions& opts) {
  const MultiDilutionAssay a = working_assay(assay, opts);
  FitOptions popts = opts;
  popts.require_covariance = false;
  return fit_from(a, fit_mle(a, popts), opts);
}

NBFit fit_negbin(const MultiDilutionAssay& assay, const FitResult& poisson,
                 const FitOptions& opts) {
  return fit_from(working_assay(assay, opts), poisson, opts);
}

double lrt_p_value(double statistic) {
  if (std::isnan(statistic)) throw std::domain_error("lrt_p_value: NaN statistic");
  if (statistic <= 0.0) return 1.0;
  return 0.5 * chi2_1_upper_tail(statistic);
}

LrtResult lrt_overdispersion(const MultiDilutionAssay& assay, const FitOptions& opts) {
  const MultiDilutionAssay a = working_assay(assay, opts);
  FitOptions popts = opts;
  popts.require_covariance = false;
  LrtResult r;
  r.poisson = fit_mle(a, popts);
  r.negbin = fit_from(a, r.poisson, opts);
  if (r.poisson.extreme != ExtremeOutcome::Regular) {
    r.raw_statistic = 0.0;
  } else {
    r.raw_statistic = 2.0 * (r.negbin.log_lik - r.poisson.log_lik);
  }
  r.statistic =
      (r.raw_statistic < 1e-8 || r.negbin.gamma_hat == 0.0) ? 0.0 : r.raw_statistic;
  r.p_value = lrt_p_value(r.statistic);
  return r;
}

}  // namespace iupm
