#pragma once

// Smooth maximization with user-supplied objective and gradient: BFGS for the
// unconstrained case and a projected quasi-Newton method for lower bounds.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace iupm {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct OptOptions {
  int max_iter = 10000;
  double grad_tol = 1e-8;   // infinity norm of the (projected) gradient
  double step_tol = 1e-10;  // relative parameter change
  double c1 = 1e-4;         // sufficient decrease
  double c2 = 0.9;          // curvature
};

struct OptResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<std::size_t> active_lower;
  std::string message;
};

// Throws std::domain_error when f or g is not finite at x0.
OptResult maximize(const Objective& f, const GradientFn& g,
                   const Eigen::VectorXd& x0, const OptOptions& opts = {});

// lower may hold -infinity entries. Throws std::invalid_argument when x0 is
// infeasible.
OptResult maximize_box(const Objective& f, const GradientFn& g,
                       const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                       const OptOptions& opts = {});

}  // namespace iupm
