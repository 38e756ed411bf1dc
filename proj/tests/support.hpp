#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"
#include "iupm/rng.hpp"
#include "iupm/simulation.hpp"

namespace support {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).lpNorm<Eigen::Infinity>() /
         std::max(1.0, want.lpNorm<Eigen::Infinity>());
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).lpNorm<Eigen::Infinity>() /
         std::max(1.0, want.lpNorm<Eigen::Infinity>());
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g, const Eigen::VectorXd& x) {
  Eigen::MatrixXd J(x.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd a = x, b = x;
    a[k] += h;
    b[k] -= h;
    J.col(k) = (g(a) - g(b)) / (2 * h);
  }
  return J;
}

// Random but always valid assays drawn from the Poisson model.
class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed, 0) {}

  iupm::Rng& rng() { return rng_; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(rng_.below(hi - lo + 1)); }

  Eigen::VectorXd rates(std::size_t n, double lo, double hi) {
    Eigen::VectorXd t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = uniform(lo, hi);
    return t;
  }

  // D levels at u = 1, 2, 4, ... with Poisson data. Retries until the counts
  // are valid and every DVL is seen.
  iupm::MultiDilutionAssay assay(std::size_t n, std::size_t D, std::int64_t M, double q,
                                 const Eigen::VectorXd& tau) {
    for (;;) {
      iupm::MultiDilutionAssay a;
      a.n = n;
      for (std::size_t d = 0; d < D; ++d) {
        iupm::LevelDesign design{std::ldexp(1.0, static_cast<int>(d)) * 0.5, M, q};
        a.levels.push_back(iupm::simulate_level(tau, design, {}, rng_).level);
      }
      bool sequenced = false;
      for (const auto& lv : a.levels) sequenced = sequenced || lv.m > 0;
      if (sequenced && iupm::validate(a).ok()) return a;
    }
  }

  iupm::MultiDilutionAssay assay(std::size_t n, std::size_t D, std::int64_t M, double q) {
    return assay(n, D, M, q, rates(n, 0.05, 0.6));
  }

 private:
  iupm::Rng rng_;
};

}  // namespace support
