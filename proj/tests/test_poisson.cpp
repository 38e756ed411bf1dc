#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "iupm/poisson.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace iupm;
using Eigen::VectorXd;

namespace {

DilutionLevel level(std::int64_t M, std::int64_t MN, std::int64_t m, std::vector<std::int64_t> Y) {
  DilutionLevel d;
  d.M = M;
  d.MN = MN;
  d.m = m;
  d.Y = std::move(Y);
  return d;
}

}  // namespace

TEST_CASE("log-likelihood example") {
  const auto d = level(12, 6, 4, {3, 2});
  CHECK(log_likelihood(VectorXd{{0.1, 0.2}}, d) ==
        doctest::Approx(oracle::loglik_example).epsilon(1e-13));
}

TEST_CASE("without sequencing the likelihood is the single-rate one") {
  support::Generator gen(3);
  for (int k = 0; k < 50; ++k) {
    const std::int64_t M = gen.integer(1, 40);
    const std::int64_t MN = gen.integer(0, static_cast<int>(M));
    const double L = gen.uniform(0.01, 3.0);
    const auto d = level(M, MN, 0, {0});
    const double want = MN * -L + (M - MN) * std::log(1 - std::exp(-L));
    CHECK(log_likelihood(VectorXd::Constant(1, L), d) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("zero rates") {
  CHECK(std::isinf(log_likelihood(VectorXd{{0.0, 0.2}}, level(12, 6, 4, {3, 2}))));
  CHECK(std::isfinite(log_likelihood(VectorXd{{0.0, 0.2}}, level(12, 6, 2, {0, 2}))));
  CHECK(log_likelihood(VectorXd{{0.0}}, level(5, 5, 0, {0})) == 0.0);
}

TEST_CASE("likelihood is symmetric under relabeling DVLs") {
  support::Generator gen(5);
  for (int k = 0; k < 30; ++k) {
    const auto a = gen.assay(3, 1, 20, 0.7);
    auto d = a.levels[0];
    const VectorXd lam = gen.rates(3, 0.05, 1.0);
    auto p = d;
    p.Y = {d.Y[2], d.Y[0], d.Y[1]};
    const VectorXd lp{{lam[2], lam[0], lam[1]}};
    CHECK(log_likelihood(lam, d) == doctest::Approx(log_likelihood(lp, p)).epsilon(1e-13));
  }
}

TEST_CASE("gradient and Hessian match finite differences") {
  support::Generator gen(7);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + k % 5;
    const auto d = gen.assay(n, 1, gen.integer(6, 40), gen.uniform(0.2, 1.0)).levels[0];
    const VectorXd lam = gen.rates(n, 0.05, 1.5);
    auto f = [&](const VectorXd& x) { return log_likelihood(x, d); };
    auto g = [&](const VectorXd& x) { return gradient(x, d); };
    CHECK(support::rel_err(gradient(lam, d), support::fd_gradient(f, lam)) < 1e-6);
    CHECK(support::rel_err(hessian(lam, d), support::fd_jacobian(g, lam)) < 1e-5);
  }
}

TEST_CASE("Hessian is negative definite away from the boundary") {
  support::Generator gen(9);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 1 + k % 4;
    const auto d = gen.assay(n, 1, 24, 0.5).levels[0];
    bool all_seen = true;
    for (auto y : d.Y) all_seen = all_seen && y > 0;
    if (!all_seen) continue;
    const VectorXd lam = gen.rates(n, 0.05, 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hessian(lam, d));
    CHECK(es.eigenvalues().maxCoeff() < 0.0);
  }
}

TEST_CASE("closed forms") {
  CHECK(closed_form_no_udsa(12, 6) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(closed_form_no_udsa(12, 0)));
  CHECK(closed_form_no_udsa(12, 12) == 0.0);
  const auto full = closed_form_full_udsa(12, {3, 12, 0});
  CHECK(full[0] == doctest::Approx(-std::log(0.75)));
  CHECK(std::isinf(full[1]));
  CHECK(full[2] == 0.0);
  CHECK_THROWS(closed_form_no_udsa(3, 4));
}

TEST_CASE("extreme outcomes") {
  MultiDilutionAssay a;
  a.n = 1;
  a.levels = {level(6, 6, 0, {0}), level(6, 6, 0, {0})};
  a.levels[1].u = 2;
  CHECK(classify_extreme(a) == ExtremeOutcome::AllNegative);

  a.levels = {level(6, 0, 3, {3}), level(6, 0, 2, {2})};
  a.levels[1].u = 2;
  CHECK(classify_extreme(a) == ExtremeOutcome::AllPositiveSingleDVL);

  a.n = 2;
  a.levels = {level(6, 0, 3, {3, 1}), level(6, 0, 2, {1, 2})};
  a.levels[1].u = 2;
  CHECK(classify_extreme(a) == ExtremeOutcome::Regular);

  CHECK(classify_extreme(without_udsa(a)) == ExtremeOutcome::AllPositiveSingleDVL);
  CHECK(classify_extreme(fixtures::with_udsa(fixtures::subject("C14"))) ==
        ExtremeOutcome::Regular);
  CHECK(to_string(ExtremeOutcome::AllNegative) == "all-negative");
}
