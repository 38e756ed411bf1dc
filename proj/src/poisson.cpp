#include "iupm/poisson.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "iupm/errors.hpp"
#include "iupm/special.hpp"

namespace iupm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dims(const Eigen::VectorXd& lambda, const DilutionLevel& d) {
  if (static_cast<std::size_t>(lambda.size()) != d.Y.size()) {
    throw InvalidAssay("rate vector length differs from the number of DVLs");
  }
}

// c * log(1 - e^{-x}) with the 0 * (-inf) = 0 convention.
double weighted_log1mexp(double c, double x) {
  if (c == 0.0) return 0.0;
  return c * log1mexp(x);
}

}  // namespace

double log_likelihood(const Eigen::VectorXd& lambda, const DilutionLevel& d) {
  check_dims(lambda, d);
  const double unseq = static_cast<double>(d.M - d.MN - d.m);
  double ll = 0.0;
  double Lambda = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double l = lambda[i];
    const double y = static_cast<double>(d.Y[i]);
    ll += weighted_log1mexp(y, l) - l * (static_cast<double>(d.MN + d.m) - y);
    Lambda += l;
  }
  if (lambda.size() == 0) {
    return unseq > 0.0 ? -kInf : 0.0;
  }
  return ll + weighted_log1mexp(unseq, Lambda);
}

Eigen::VectorXd gradient(const Eigen::VectorXd& lambda, const DilutionLevel& d) {
  check_dims(lambda, d);
  const double unseq = static_cast<double>(d.M - d.MN - d.m);
  const double Lambda = lambda.sum();
  const double common = unseq == 0.0 ? 0.0 : unseq / std::expm1(Lambda);
  Eigen::VectorXd g(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double y = static_cast<double>(d.Y[i]);
    const double first = y == 0.0 ? 0.0 : y / std::expm1(lambda[i]);
    g[i] = first - (static_cast<double>(d.MN + d.m) - y) + common;
  }
  return g;
}

Eigen::MatrixXd StructuredMatrix::dense() const {
  const auto n = diag.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(n, n, common);
  out.diagonal() += diag;
  return out;
}

StructuredMatrix hessian_structured(const Eigen::VectorXd& lambda,
                                    const DilutionLevel& d) {
  check_dims(lambda, d);
  const double unseq = static_cast<double>(d.M - d.MN - d.m);
  StructuredMatrix h;
  h.common = unseq == 0.0 ? 0.0 : -unseq * exp_over_expm1_sq(lambda.sum());
  h.diag.resize(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double y = static_cast<double>(d.Y[i]);
    h.diag[i] = y == 0.0 ? 0.0 : -y * exp_over_expm1_sq(lambda[i]);
  }
  return h;
}

Eigen::MatrixXd hessian(const Eigen::VectorXd& lambda, const DilutionLevel& d) {
  return hessian_structured(lambda, d).dense();
}

double closed_form_no_udsa(std::int64_t M, std::int64_t MN) {
  if (M < 1 || MN < 0 || MN > M) {
    throw std::domain_error("closed_form_no_udsa: need 0 <= M_N <= M, M >= 1");
  }
  if (MN == 0) return kInf;
  return std::log(static_cast<double>(M) / static_cast<double>(MN));
}

Eigen::VectorXd closed_form_full_udsa(std::int64_t M,
                                      const std::vector<std::int64_t>& Y) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(Y.size()));
  for (std::size_t i = 0; i < Y.size(); ++i) {
    if (Y[i] < 0 || Y[i] > M) {
      throw std::domain_error("closed_form_full_udsa: need 0 <= Y_i <= M");
    }
    out[static_cast<Eigen::Index>(i)] =
        Y[i] == M ? kInf
                  : -std::log1p(-static_cast<double>(Y[i]) / static_cast<double>(M));
  }
  return out;
}

std::string_view to_string(ExtremeOutcome e) {
  switch (e) {
    case ExtremeOutcome::AllNegative: return "all-negative";
    case ExtremeOutcome::AllPositiveSingleDVL: return "all-positive-single-dvl";
    case ExtremeOutcome::Regular: break;
  }
  return "regular";
}

ExtremeOutcome classify_extreme(const MultiDilutionAssay& assay) {
  bool all_neg = !assay.levels.empty();
  bool all_pos = !assay.levels.empty();
  for (const auto& lv : assay.levels) {
    all_neg = all_neg && lv.MN == lv.M;
    all_pos = all_pos && lv.MN == 0;
  }
  if (all_neg) return ExtremeOutcome::AllNegative;
  if (!all_pos) return ExtremeOutcome::Regular;
  // Every well positive. Without lineage data the rate is unbounded; with it,
  // the MLE diverges when one DVL appears in every sequenced well everywhere.
  bool any_seq = false;
  for (const auto& lv : assay.levels) any_seq = any_seq || lv.m > 0;
  if (assay.n == 0 || !any_seq) return ExtremeOutcome::AllPositiveSingleDVL;
  for (std::size_t i = 0; i < assay.n; ++i) {
    bool everywhere = true;
    for (const auto& lv : assay.levels) {
      everywhere = everywhere && i < lv.Y.size() && lv.Y[i] == lv.m;
    }
    if (everywhere) return ExtremeOutcome::AllPositiveSingleDVL;
  }
  return ExtremeOutcome::Regular;
}

}  // namespace iupm
