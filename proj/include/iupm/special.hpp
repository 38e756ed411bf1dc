#pragma once

// Scalar numeric kernels shared by the likelihood, inference and testing code.

#include <cstdint>

namespace iupm {

enum class RoundingRule {
  HalfEven,      // 2.5 -> 2, 3.5 -> 4 (default, matches R's round())
  HalfAwayZero,  // 2.5 -> 3
};

// Nearest integer of a finite, non-negative x. This is the single place the
// tie rule for m = <q M_P> lives.
std::int64_t nint(double x, RoundingRule rule = RoundingRule::HalfEven);

// log Gamma(x) for x > 0 (Lanczos, g = 7, n = 9).
double log_gamma(double x);

// log C(n, k), 0 <= k <= n.
double log_binom(std::int64_t n, std::int64_t k);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// P(chi^2_k > s).
double chi2_upper_tail(double k, double s);
inline double chi2_1_upper_tail(double s) { return chi2_upper_tail(1.0, s); }

// Standard normal CDF and quantile (Wichura AS241, ~1e-16 relative).
double normal_cdf(double x);
double normal_quantile(double p);

// log(1 - exp(-x)) for x >= 0, accurate for both tiny and large x.
// Returns -inf at x == 0.
double log1mexp(double x);

// e^x / (e^x - 1)^2 and e^x (e^x + 1) / (e^x - 1)^3, written via sinh/cosh of
// x/2 so they neither overflow nor cancel. Both are +inf at x == 0.
double exp_over_expm1_sq(double x);
double exp_third_kernel(double x);

}  // namespace iupm
