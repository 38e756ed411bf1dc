#include "iupm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace iupm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Internally everything is a minimization of F = -f.
struct Problem {
  const Objective& f;
  const GradientFn& g;
  int evals = 0;

  double F(const VectorXd& x) {
    ++evals;
    return -f(x);
  }
  VectorXd G(const VectorXd& x) { return -g(x); }
};

bool finite(const VectorXd& v) { return v.allFinite(); }

struct Trial {
  double a = 0.0;
  double F = kInf;
  VectorXd G;
  double d = 0.0;  // directional derivative G . p
};

struct LineSearch {
  Problem& prob;
  const VectorXd& x;
  const VectorXd& p;
  double F0;
  double d0;
  double c1;
  double c2;

  Trial eval(double a) {
    Trial t;
    t.a = a;
    const VectorXd xt = x + a * p;
    t.F = prob.F(xt);
    if (!std::isfinite(t.F)) {
      t.F = kInf;
      return t;
    }
    t.G = prob.G(xt);
    if (!finite(t.G)) {
      t.F = kInf;
      return t;
    }
    t.d = t.G.dot(p);
    return t;
  }

  bool armijo(const Trial& t) const { return t.F <= F0 + c1 * t.a * d0; }
  bool curvature(const Trial& t) const { return std::fabs(t.d) <= -c2 * d0; }

  // Approximate Wolfe conditions for steps whose objective change is lost in
  // rounding; only used when the objective did not increase.
  bool approx_wolfe(const Trial& t) const {
    const double noise = 1e-12 * (1.0 + std::fabs(F0));
    return t.F <= F0 && t.F >= F0 - noise && t.d >= c2 * d0 &&
           t.d <= (2.0 * c1 - 1.0) * d0;
  }

  std::optional<Trial> zoom(Trial lo, Trial hi) {
    std::optional<Trial> best;
    if (lo.a > 0.0 && lo.F < F0) best = lo;
    for (int it = 0; it < 40; ++it) {
      const double width = hi.a - lo.a;
      double a = 0.5 * (lo.a + hi.a);
      if (std::isfinite(hi.F)) {
        // Safeguarded quadratic interpolation through lo (value, slope) and hi.
        const double denom = 2.0 * (hi.F - lo.F - lo.d * width);
        if (denom > 0.0) {
          const double cand = lo.a - lo.d * width * width / denom;
          const double lo_b = std::min(lo.a, hi.a) + 0.1 * std::fabs(width);
          const double hi_b = std::max(lo.a, hi.a) - 0.1 * std::fabs(width);
          if (cand > lo_b && cand < hi_b) a = cand;
        }
      }
      if (std::fabs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::fabs(lo.a))) break;
      Trial t = eval(a);
      if (!armijo(t) || t.F >= lo.F) {
        if (approx_wolfe(t)) return t;
        hi = t;
      } else {
        if (curvature(t)) return t;
        if (!best || t.F < best->F) best = t;
        if (t.d * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = t;
      }
    }
    return best;
  }

  // Strong Wolfe search on (0, a_max]. Returns nullopt when no step reduced F.
  std::optional<Trial> run(double a_init, double a_max) {
    Trial prev;
    prev.a = 0.0;
    prev.F = F0;
    prev.d = d0;
    double a = std::min(a_init, a_max);
    double cap = a_max;
    for (int it = 0; it < 60; ++it) {
      Trial t = eval(a);
      if (!std::isfinite(t.F)) {
        cap = a;
        a = 0.5 * (prev.a + a);
        if (a - prev.a <= 1e-18) return std::nullopt;
        continue;
      }
      if (!armijo(t) || (it > 0 && t.F >= prev.F)) {
        if (approx_wolfe(t)) return t;
        auto z = zoom(prev, t);
        if (z) return z;
        return prev.a > 0.0 ? std::optional<Trial>(prev) : std::nullopt;
      }
      if (curvature(t)) return t;
      if (t.d >= 0.0) {
        auto z = zoom(t, prev);
        return z ? z : std::optional<Trial>(t);
      }
      if (a >= cap) return t;  // sufficient decrease, still descending, at cap
      prev = t;
      a = std::min(2.0 * a, cap);
    }
    return prev.a > 0.0 ? std::optional<Trial>(prev) : std::nullopt;
  }
};

VectorXd project(const VectorXd& v, const VectorXd& lower) {
  return v.cwiseMax(lower);
}

// Projected gradient (minimization sense) for lower bounds.
VectorXd projected_gradient(const VectorXd& x, const VectorXd& G,
                            const VectorXd& lower) {
  VectorXd pg = G;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] <= lower[i] && G[i] > 0.0) pg[i] = 0.0;
  }
  return pg;
}

void bfgs_update(MatrixXd& H, const VectorXd& s, const VectorXd& y,
                 bool& scaled) {
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm()) || !std::isfinite(sy)) return;
  if (!scaled) {
    H = MatrixXd::Identity(H.rows(), H.cols()) * (sy / y.squaredNorm());
    scaled = true;
  }
  const double rho = 1.0 / sy;
  const VectorXd Hy = H * y;
  const double yHy = y.dot(Hy);
  H += (rho * rho * yHy + rho) * (s * s.transpose()) -
       rho * (Hy * s.transpose() + s * Hy.transpose());
}

OptResult solve(const Objective& f, const GradientFn& g, const VectorXd& x0,
                const VectorXd& lower, const OptOptions& opts) {
  if (opts.max_iter < 1 || !(opts.grad_tol > 0.0) || !(opts.step_tol > 0.0)) {
    throw std::invalid_argument("optimizer: bad options");
  }
  const Eigen::Index n = x0.size();
  if (lower.size() != n) throw std::invalid_argument("optimizer: bound size mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(x0[i] >= lower[i])) throw std::invalid_argument("optimizer: infeasible x0");
  }
  const bool bounded = (lower.array() > -kInf).any();

  Problem prob{f, g};
  VectorXd x = x0;
  double F = prob.F(x);
  VectorXd G = finite(x) ? prob.G(x) : VectorXd();
  if (!std::isfinite(F) || !finite(x) || !finite(G)) {
    throw std::domain_error("optimizer: objective or gradient not finite at x0");
  }

  OptResult res;
  MatrixXd H = MatrixXd::Identity(n, n);
  bool scaled = false;
  bool fresh = true;  // H is the (unscaled) identity

  auto pg_norm = [&]() {
    return n == 0 ? 0.0 : projected_gradient(x, G, lower).lpNorm<Eigen::Infinity>();
  };

  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double gnorm = pg_norm();
    if (gnorm <= opts.grad_tol) break;

    // epsilon-active set: near the bound with the gradient pushing into it.
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    if (bounded) {
      const VectorXd w = x - project(x - G, lower);
      const double eps = std::min(1e-6, w.lpNorm<Eigen::Infinity>());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x[i] - lower[i] <= eps && G[i] > 0.0) active[i] = 1;
      }
    }

    auto direction = [&]() {
      VectorXd p = VectorXd::Zero(n);
      std::vector<Eigen::Index> fr;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (active[i]) p[i] = -G[i];
        else fr.push_back(i);
      }
      for (auto i : fr) {
        double v = 0.0;
        for (auto j : fr) v -= H(i, j) * G[j];
        p[i] = v;
      }
      return p;
    };

    VectorXd p = direction();
    double d0 = G.dot(p);
    if (!(d0 < 0.0) || !finite(p)) {
      H.setIdentity();
      scaled = false;
      fresh = true;
      p = direction();
      d0 = G.dot(p);
      if (!(d0 < 0.0)) break;
    }

    double a_max = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p[i] < 0.0 && lower[i] > -kInf) {
        a_max = std::min(a_max, (x[i] - lower[i]) / -p[i]);
      }
    }
    const double a_init = fresh ? std::min(1.0, 1.0 / p.lpNorm<Eigen::Infinity>()) : 1.0;

    VectorXd x_new;
    double F_new = 0.0;
    VectorXd G_new;
    bool moved = false;
    if (a_max >= a_init) {
      LineSearch ls{prob, x, p, F, d0, opts.c1, opts.c2};
      if (auto t = ls.run(a_init, a_max)) {
        x_new = project(x + t->a * p, lower);
        F_new = t->F;
        G_new = t->G;
        moved = t->F <= F;
      }
    } else {
      // Projected Armijo backtracking along the bent path P(x + a p).
      double a = a_init;
      for (int k = 0; k < 60; ++k, a *= 0.5) {
        VectorXd xt = project(x + a * p, lower);
        const double decrease = G.dot(xt - x);
        if (!(decrease < 0.0)) continue;
        const double Ft = prob.F(xt);
        if (!std::isfinite(Ft) || Ft > F + opts.c1 * decrease) continue;
        VectorXd Gt = prob.G(xt);
        if (!finite(Gt)) continue;
        x_new = std::move(xt);
        F_new = Ft;
        G_new = std::move(Gt);
        moved = true;
        break;
      }
    }

    if (!moved) {
      if (!fresh) {
        H.setIdentity();
        scaled = false;
        fresh = true;
        continue;
      }
      res.message = "line search failed";
      break;
    }

    const VectorXd s = x_new - x;
    const VectorXd y = G_new - G;
    x = std::move(x_new);
    F = F_new;
    G = std::move(G_new);
    bfgs_update(H, s, y, scaled);
    fresh = false;

    const double rel = s.lpNorm<Eigen::Infinity>() / std::max(1.0, x.lpNorm<Eigen::Infinity>());
    if (rel < opts.step_tol) {
      ++it;
      if (pg_norm() > opts.grad_tol) res.message = "step below tolerance";
      break;
    }
  }

  res.x = x;
  res.f = -F;
  res.grad_norm = pg_norm();
  res.iterations = it;
  res.evaluations = prob.evals;
  res.converged = res.grad_norm <= opts.grad_tol;
  if (res.converged) res.message = "converged";
  else if (res.message.empty()) res.message = "iteration limit reached";
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x[i] <= lower[i]) res.active_lower.push_back(static_cast<std::size_t>(i));
  }
  return res;
}

}  // namespace

OptResult maximize(const Objective& f, const GradientFn& g,
                   const Eigen::VectorXd& x0, const OptOptions& opts) {
  return solve(f, g, x0, Eigen::VectorXd::Constant(x0.size(), -kInf), opts);
}

OptResult maximize_box(const Objective& f, const GradientFn& g,
                       const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                       const OptOptions& opts) {
  return solve(f, g, x0, lower, opts);
}

}  // namespace iupm
