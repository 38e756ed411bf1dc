#include "iupm/imperfect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "iupm/errors.hpp"
#include "iupm/optimizer.hpp"

namespace iupm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Pr(observed | true = 1) and Pr(observed | true = 0).
struct Channel {
  double given1;
  double given0;
};

Channel qvoa_channel(int w_star, const ErrorRates& r) {
  return w_star == 1 ? Channel{r.sens_qvoa, 1.0 - r.spec_qvoa}
                     : Channel{1.0 - r.sens_qvoa, r.spec_qvoa};
}

Channel udsa_channel(int z_star, const ErrorRates& r) {
  return z_star == 1 ? Channel{r.sens_udsa, 1.0 - r.spec_udsa}
                     : Channel{1.0 - r.sens_udsa, r.spec_udsa};
}

void check_rates(const Eigen::VectorXd& lambda) {
  if ((lambda.array() < 0.0).any() || !lambda.allFinite()) {
    throw std::domain_error("imperfect model: rates must be finite and >= 0");
  }
}

// Per-lineage terms a_i = Pr(z*_i|1)(1 - e^{-l}), b_i = Pr(z*_i|0) e^{-l}
// folded into D = S - T0 (some true lineage present) and B = T0.
struct Split {
  double D = 0.0;
  double B = 1.0;
};

Split fold(const Split& s, double a, double b) {
  return {s.D * (a + b) + a * s.B, s.B * b};
}

double joint_prob(const Eigen::VectorXd& lambda, int w_star,
                  const std::vector<std::uint8_t>& z_star, const ErrorRates& rates) {
  Split s;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const auto c = udsa_channel(z_star[static_cast<std::size_t>(i)], rates);
    const double e = std::exp(-lambda[i]);
    s = fold(s, c.given1 * -std::expm1(-lambda[i]), c.given0 * e);
  }
  const auto w = qvoa_channel(w_star, rates);
  return w.given1 * s.D + w.given0 * s.B;
}

double marginal_prob(double Lambda, int w_star, const ErrorRates& rates) {
  const auto w = qvoa_channel(w_star, rates);
  return w.given1 * -std::expm1(-Lambda) + w.given0 * std::exp(-Lambda);
}

// Adds d log Pr(well) / d lambda to g; returns log Pr(well).
double well_term(const Eigen::VectorXd& lambda, const WellRecord& well,
                 const ErrorRates& rates, Eigen::VectorXd* g) {
  const auto n = lambda.size();
  const auto w = qvoa_channel(well.w_star, rates);
  if (well.r == 0) {
    const double Lambda = lambda.sum();
    const double p = marginal_prob(Lambda, well.w_star, rates);
    if (g && p > 0.0) {
      g->array() += (w.given1 - w.given0) * std::exp(-Lambda) / p;
    }
    return std::log(p);
  }

  std::vector<double> a(n), b(n), da(n), db(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto c = udsa_channel(well.z_star[static_cast<std::size_t>(i)], rates);
    const double e = std::exp(-lambda[i]);
    a[i] = c.given1 * -std::expm1(-lambda[i]);
    b[i] = c.given0 * e;
    da[i] = c.given1 * e;
    db[i] = -c.given0 * e;
  }
  std::vector<Split> prefix(n + 1), suffix(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) prefix[i + 1] = fold(prefix[i], a[i], b[i]);
  for (Eigen::Index i = n; i > 0; --i) suffix[i - 1] = fold(suffix[i], a[i - 1], b[i - 1]);
  const double p = w.given1 * prefix[n].D + w.given0 * prefix[n].B;
  if (g && p > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Split& lo = prefix[i];
      const Split& hi = suffix[i + 1];
      const double B_other = lo.B * hi.B;
      const double D_other = lo.D * hi.D + lo.D * hi.B + lo.B * hi.D;
      const double P_other = D_other + B_other;
      const double dp = w.given1 * (da[i] * P_other + db[i] * D_other) +
                        w.given0 * db[i] * B_other;
      (*g)[i] += dp / p;
    }
  }
  return std::log(p);
}

// Returns -inf on a zero-probability well; index of that well in *bad.
double level_log_likelihood(const Eigen::VectorXd& lambda, const WellAssay& assay,
                            const ErrorRates& rates, Eigen::VectorXd* g,
                            std::size_t* bad) {
  double ll = 0.0;
  for (std::size_t j = 0; j < assay.wells.size(); ++j) {
    const double t = well_term(lambda, assay.wells[j], rates, g);
    if (!std::isfinite(t)) {
      if (bad) *bad = j;
      return -kInf;
    }
    ll += t;
  }
  return ll;
}

void check_level(const Eigen::VectorXd& lambda, const WellAssay& assay) {
  if (static_cast<std::size_t>(lambda.size()) != assay.n) {
    throw InvalidAssay("rate vector length differs from the number of DVLs");
  }
  check_rates(lambda);
}

double model_log_likelihood(const Eigen::VectorXd& tau, const ImperfectModel& m,
                            Eigen::VectorXd* g) {
  double ll = 0.0;
  for (const auto& wa : m.assays) {
    Eigen::VectorXd gl;
    if (g) gl = Eigen::VectorXd::Zero(tau.size());
    ll += level_log_likelihood(wa.u * tau, wa, m.rates, g ? &gl : nullptr, nullptr);
    if (!std::isfinite(ll)) return -kInf;
    if (g) *g += wa.u * gl;
  }
  return ll;
}

Eigen::VectorXd initial_rates(const ImperfectModel& m) {
  const auto n = static_cast<Eigen::Index>(m.n());
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(n);
  double weight = 0.0, u_sum = 0.0;
  double pos = 0.0, total = 0.0, u_all = 0.0;
  for (const auto& wa : m.assays) {
    for (const auto& w : wa.wells) {
      total += 1.0;
      u_all += wa.u;
      pos += w.w_star;
      if (w.w_star == 1 && w.r == 0) continue;
      weight += 1.0;
      u_sum += wa.u;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (w.r == 1 && w.z_star[static_cast<std::size_t>(i)] == 1) hits[i] += 1.0;
      }
    }
  }
  Eigen::VectorXd lambda0(n);
  if (weight > 0.0 && hits.sum() > 0.0) {
    const double lo = 0.5 / weight;
    for (Eigen::Index i = 0; i < n; ++i) {
      lambda0[i] = -std::log1p(-std::clamp(hits[i] / weight, lo, 1.0 - lo));
    }
    return lambda0 / (u_sum / weight);
  }
  const double lo = 0.5 / total;
  const double p = std::clamp(pos / total, lo, 1.0 - lo);
  lambda0.setConstant(-std::log1p(-p) / static_cast<double>(std::max<Eigen::Index>(n, 1)));
  return lambda0 / (u_all / total);
}

}  // namespace

double well_joint_prob(const Eigen::VectorXd& lambda, int w_star,
                       const std::vector<std::uint8_t>& z_star,
                       const ErrorRates& rates) {
  check_rates(lambda);
  if (z_star.size() != static_cast<std::size_t>(lambda.size())) {
    throw InvalidAssay("z row length differs from the number of DVLs");
  }
  return joint_prob(lambda, w_star, z_star, rates);
}

double well_marginal_prob(const Eigen::VectorXd& lambda, int w_star,
                          const ErrorRates& rates) {
  check_rates(lambda);
  return marginal_prob(lambda.sum(), w_star, rates);
}

double imperfect_log_likelihood(const Eigen::VectorXd& lambda,
                                const WellAssay& assay, const ErrorRates& rates) {
  check_level(lambda, assay);
  std::size_t bad = 0;
  const double ll = level_log_likelihood(lambda, assay, rates, nullptr, &bad);
  if (!std::isfinite(ll)) {
    throw InvalidAssay("well " + std::to_string(bad) +
                       " has probability 0 under the given rates");
  }
  return ll;
}

Eigen::VectorXd imperfect_gradient(const Eigen::VectorXd& lambda,
                                   const WellAssay& assay, const ErrorRates& rates) {
  check_level(lambda, assay);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(lambda.size());
  std::size_t bad = 0;
  if (!std::isfinite(level_log_likelihood(lambda, assay, rates, &g, &bad))) {
    throw InvalidAssay("well " + std::to_string(bad) +
                       " has probability 0 under the given rates");
  }
  return g;
}

double imperfect_log_likelihood(const Eigen::VectorXd& tau,
                                const ImperfectModel& model) {
  for (const auto& wa : model.assays) check_level(wa.u * tau, wa);
  for (std::size_t d = 0; d < model.assays.size(); ++d) {
    const auto& wa = model.assays[d];
    std::size_t bad = 0;
    if (!std::isfinite(level_log_likelihood(wa.u * tau, wa, model.rates, nullptr, &bad))) {
      throw InvalidAssay("level " + std::to_string(d) + " well " + std::to_string(bad) +
                         " has probability 0 under the given rates");
    }
  }
  return model_log_likelihood(tau, model, nullptr);
}

Eigen::VectorXd imperfect_gradient(const Eigen::VectorXd& tau,
                                   const ImperfectModel& model) {
  for (const auto& wa : model.assays) check_level(wa.u * tau, wa);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(tau.size());
  if (!std::isfinite(model_log_likelihood(tau, model, &g))) {
    throw InvalidAssay("a well has probability 0 under the given rates");
  }
  return g;
}

void require_valid(const ImperfectModel& model) {
  if (model.assays.empty()) throw InvalidAssay("no dilution levels");
  const auto rr = validate(model.rates);
  if (!rr.ok()) throw InvalidAssay("invalid error rates: " + rr.to_string());
  for (std::size_t d = 0; d < model.assays.size(); ++d) {
    if (model.assays[d].n != model.n()) {
      throw InvalidAssay("dilution levels disagree on the number of DVLs");
    }
    const auto rep = validate(model.assays[d]);
    if (!rep.ok()) {
      throw InvalidAssay("level " + std::to_string(d) + ": " + rep.to_string());
    }
  }
}

FitResult fit_imperfect(const ImperfectModel& model, const FitOptions& opts) {
  require_valid(model);
  const auto n = static_cast<Eigen::Index>(model.n());
  if (n == 0) throw InvalidAssay("imperfect model needs at least one DVL");

  auto f = [&](const Eigen::VectorXd& tau) {
    return model_log_likelihood(tau, model, nullptr);
  };
  auto g = [&](const Eigen::VectorXd& tau) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(tau.size());
    model_log_likelihood(tau, model, &grad);
    return grad;
  };

  const Eigen::VectorXd tau0 = initial_rates(model);
  imperfect_log_likelihood(tau0, model);  // names a zero-probability well

  const auto opt = maximize_box(f, g, tau0, Eigen::VectorXd::Zero(n), opts.opt);

  FitResult r;
  r.alpha = opts.alpha;
  r.tau_hat = opt.x;
  r.iterations = opt.iterations;
  r.active = opt.active_lower;
  r.boundary = !opt.active_lower.empty();

  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r.tau_hat[i] > 0.0) free.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(free.size());

  auto hessian_free = [&](const Eigen::VectorXd& tau) {
    Eigen::MatrixXd h(k, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Eigen::Index i = free[c];
      double step = 1e-5 * std::max(tau[i], 1e-3);
      if (tau[i] - step <= 0.0) step = 0.5 * tau[i];
      Eigen::VectorXd up = tau, dn = tau;
      up[i] += step;
      dn[i] -= step;
      const Eigen::VectorXd dg = (g(up) - g(dn)) / (2.0 * step);
      for (Eigen::Index rr = 0; rr < k; ++rr) h(rr, c) = dg[free[rr]];
    }
    return Eigen::MatrixXd(0.5 * (h + h.transpose()));
  };
  auto restrict = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(k);
    for (Eigen::Index c = 0; c < k; ++c) out[c] = v[free[c]];
    return out;
  };

  // Newton steps on the interior coordinates.
  if (opts.polish && k > 0) {
    Eigen::VectorXd tau = r.tau_hat;
    double ll = f(tau);
    Eigen::VectorXd grad = restrict(g(tau));
    for (int it = 0; it < 20; ++it) {
      const double gn = grad.lpNorm<Eigen::Infinity>();
      if (gn == 0.0) break;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-hessian_free(tau));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::VectorXd step = ldlt.solve(grad);
      if (!step.allFinite()) break;
      bool accepted = false;
      const double noise = 1e-13 * (1.0 + std::fabs(ll));
      for (double t = 1.0; t > 1e-6; t *= 0.5) {
        Eigen::VectorXd cand = tau;
        for (Eigen::Index c = 0; c < k; ++c) cand[free[c]] += t * step[c];
        if ((restrict(cand).array() <= 0.0).any()) continue;
        const double lc = f(cand);
        if (!std::isfinite(lc) || lc < ll - noise) continue;
        const Eigen::VectorXd gc = restrict(g(cand));
        if (lc < ll && gc.lpNorm<Eigen::Infinity>() >= gn) continue;
        tau = cand;
        ll = lc;
        grad = gc;
        accepted = true;
        break;
      }
      ++r.iterations;
      if (!accepted) break;
      if ((step.array().abs() <= 1e-15 * restrict(tau).array()).all()) break;
    }
    r.tau_hat = tau;
  }

  const Eigen::VectorXd g_hat = g(r.tau_hat);
  double pg = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r.tau_hat[i] > 0.0 || g_hat[i] > 0.0) pg = std::max(pg, std::fabs(g_hat[i]));
  }
  r.iupm = r.tau_hat.sum();
  r.log_lik = f(r.tau_hat);
  r.grad_norm = pg;
  r.converged = opt.converged || pg <= opts.opt.grad_tol;
  r.boundary = r.boundary || static_cast<Eigen::Index>(free.size()) < n;
  r.covariance = Eigen::MatrixXd::Zero(n, n);
  if (free.empty()) {
    r.information_ok = false;
    r.se_iupm = kNaN;
    r.ci = wald_ci(r.iupm, 0.0, opts.alpha);
    return r;
  }

  const Eigen::MatrixXd info = -hessian_free(r.tau_hat);
  try {
    const Eigen::MatrixXd cov = covariance(info);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) r.covariance(free[a], free[b]) = cov(a, b);
    }
    r.se_iupm = se_of_total(cov);
    r.ci = wald_ci(r.iupm, r.se_iupm, opts.alpha);
  } catch (const SingularInformation&) {
    if (opts.require_covariance) throw;
    r.information_ok = false;
    r.se_iupm = kNaN;
    r.ci = Interval{};
  }
  return r;
}

}  // namespace iupm
