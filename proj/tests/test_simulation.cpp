#include <cmath>
#include <set>

#include "doctest.h"
#include "iupm/errors.hpp"
#include "iupm/rng.hpp"
#include "iupm/simulation.hpp"

using namespace iupm;
using Eigen::VectorXd;

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(1, 0), b(1, 0), c(1, 1), d(2, 0);
  for (int k = 0; k < 10; ++k) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
    CHECK(x != d.next());
  }
}

TEST_CASE("rng variates have the right moments") {
  Rng rng(5, 0);
  const int N = 200000;
  double su = 0, sn = 0, sn2 = 0, sg = 0, sg2 = 0, sb = 0, ss = 0;
  for (int k = 0; k < N; ++k) {
    const double u = rng.uniform();
    CHECK_FALSE((u < 0.0 || u >= 1.0));
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    const double g = rng.gamma(0.25, 4.0);
    sg += g;
    sg2 += g * g;
    sb += rng.bernoulli(0.3);
    ss += rng.gamma(3.5, 2.0);
  }
  CHECK(su / N == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / N) < 0.01);
  CHECK(sn2 / N == doctest::Approx(1.0).epsilon(0.02));
  // Gamma(1/gamma, gamma) at gamma = 4: mean 1, variance 4.
  CHECK(sg / N == doctest::Approx(1.0).epsilon(0.03));
  CHECK(sg2 / N - (sg / N) * (sg / N) == doctest::Approx(4.0).epsilon(0.1));
  CHECK(sb / N == doctest::Approx(0.3).epsilon(0.01));
  CHECK(ss / N == doctest::Approx(7.0).epsilon(0.01));
  CHECK_FALSE(rng.bernoulli(0.0));
  CHECK(rng.bernoulli(1.0));
}

TEST_CASE("below and sampling without replacement") {
  Rng rng(9, 0);
  std::vector<int> counts(7, 0);
  for (int k = 0; k < 70000; ++k) ++counts[rng.below(7)];
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
  for (int k = 0; k < 100; ++k) {
    const auto s = rng.sample_without_replacement(20, 8);
    CHECK(s.size() == 8);
    std::set<std::size_t> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 8);
    CHECK(*uniq.rbegin() < 20);
  }
  CHECK(rng.sample_without_replacement(5, 0).empty());
  CHECK_THROWS(rng.sample_without_replacement(3, 4));
}

TEST_CASE("rate allocation") {
  const auto c = allocate_rates(1.0, 6, Allocation::Constant);
  CHECK(c.size() == 6);
  CHECK(c[0] == doctest::Approx(1.0 / 6));
  const auto nc = allocate_rates(1.0, 6, Allocation::NonConstant);
  CHECK(nc[0] == doctest::Approx(1.0 / 12));
  CHECK(nc[5] == doctest::Approx(3.0 / 12));
  CHECK(nc.sum() == doctest::Approx(1.0));
  CHECK_THROWS(allocate_rates(1.0, 5, Allocation::NonConstant));
}

TEST_CASE("simulated levels are valid and follow the design") {
  Rng rng(3, 0);
  const VectorXd tau = allocate_rates(1.0, 6, Allocation::Constant);
  for (double q : {0.0, 0.5, 1.0}) {
    for (int k = 0; k < 50; ++k) {
      const auto s = simulate_level(tau, {1.0, 12, q}, {}, rng);
      CHECK(validate(s.wells).ok());
      CHECK(s.level.M == 12);
      CHECK(s.level.m == nint(q * static_cast<double>(s.level.MP())));
      CHECK(s.level.q.value() == q);
      ValidationOptions o;
      o.require_detected = false;
      CHECK(validate(MultiDilutionAssay{6, {s.level}, {}}, o).ok());
      CHECK(summarize_wells(s.wells).Y == s.level.Y);
    }
  }
  const auto none = simulate_level(VectorXd::Zero(3), {1.0, 12, 1.0}, {}, rng);
  CHECK(none.level.MN == 12);
}

TEST_CASE("negative wells follow e^{-u T}") {
  Rng rng(4, 0);
  const VectorXd tau = allocate_rates(1.0, 4, Allocation::NonConstant);
  double neg = 0, wells = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto s = simulate_level(tau, {0.5, 20, 0.5}, {}, rng);
    neg += static_cast<double>(s.level.MN);
    wells += 20;
  }
  CHECK(neg / wells == doctest::Approx(std::exp(-0.5)).epsilon(0.02));
}

TEST_CASE("imperfect assays flip read-outs") {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::Imperfect;
  spec.rates = {0.9, 0.8, 1.0, 1.0};
  Rng rng(6, 0);
  double pos = 0, wells = 0;
  for (int k = 0; k < 2000; ++k) {
    const auto s = simulate_level(VectorXd::Zero(2), {1.0, 20, 1.0}, spec, rng);
    pos += static_cast<double>(s.level.MP());
    wells += 20;
  }
  CHECK(pos / wells == doctest::Approx(0.2).epsilon(0.05));
}

namespace {

SimScenario small_scenario() {
  SimScenario s;
  s.name = "small";
  s.n_prime = 4;
  s.levels = {{1.0, 12, 0.5}};
  s.reps = 40;
  s.seed = 17;
  s.estimators = {Estimator::MleWithUdsa, Estimator::BcMleWithUdsa, Estimator::MleWithoutUdsa,
                  Estimator::BcMleWithoutUdsa};
  return s;
}

}  // namespace

TEST_CASE("studies are deterministic across thread counts") {
  const auto s = small_scenario();
  const auto a = run_study(s, {1, true, 10000});
  const auto b = run_study(s, {4, true, 10000});
  CHECK(metrics_to_csv(a) == metrics_to_csv(b));
  CHECK(replicates_to_csv(a) == replicates_to_csv(b));
  auto t = s;
  t.seed = 18;
  CHECK(metrics_to_csv(run_study(t)) != metrics_to_csv(a));
}

TEST_CASE("study metrics") {
  const auto r = run_study(small_scenario());
  REQUIRE(r.metrics.size() == 4);
  const auto& m = r.metrics[0];
  CHECK(m.n_used + m.excluded + m.failed == 40);
  CHECK(m.cp >= 0.0);
  CHECK(m.cp <= 1.0);
  CHECK(m.ese > 0.0);
  CHECK(m.re.has_value());
  CHECK_FALSE(r.metrics[2].re.has_value());
  CHECK(r.replicates.size() == 40);
  CHECK(metrics_to_csv(r).rfind(
            "scenario,estimator,n_used,excluded,failed,nonconverged,resimulated,bias,ase,ese,"
            "cp,re,median,reject_rate\n",
            0) == 0);
}

TEST_CASE("a single replicate has no empirical SE") {
  auto s = small_scenario();
  s.reps = 1;
  const auto r = run_study(s);
  CHECK(std::isnan(r.metrics[0].ese));
  CHECK(metrics_to_csv(r).find(",,") != std::string::npos);
}

TEST_CASE("summaries from hand-made records") {
  SimScenario s;
  s.T = 1.0;
  s.estimators = {Estimator::MleWithUdsa};
  std::vector<ReplicateRecord> recs(4);
  const double est[] = {0.8, 1.2, 1.0, INFINITY};
  for (int k = 0; k < 4; ++k) {
    EstimateRecord e;
    e.estimate = est[k];
    e.se = 0.2;
    e.lower = est[k] - 0.1;
    e.upper = est[k] + 0.1;
    e.converged = true;
    e.excluded = std::isinf(est[k]);
    recs[k].estimates = {e};
  }
  const auto m = summarize(s, recs).front();
  CHECK(m.n_used == 3);
  CHECK(m.excluded == 1);
  CHECK(m.bias == doctest::Approx(0.0));
  CHECK(m.ese == doctest::Approx(0.2));
  CHECK(m.ase == doctest::Approx(0.2));
  CHECK(m.cp == doctest::Approx(1.0 / 3));
  CHECK(m.median == doctest::Approx(1.0));
}

TEST_CASE("scenario json") {
  auto s = small_scenario();
  s.model.kind = ModelSpec::Kind::Imperfect;
  s.model.rates = {0.9, 0.85, 0.8, 0.95};
  s.estimators.push_back(Estimator::ImperfectMle);
  const auto back = parse_scenario_json(scenario_to_json(s));
  CHECK(scenario_to_json(back) == scenario_to_json(s));
  CHECK(back.model.rates.spec_qvoa == 0.85);

  CHECK_THROWS_AS(parse_scenario_json("{"), ParseError);
  CHECK_THROWS_AS(parse_scenario_json(R"({"T": 1})"), ParseError);
  CHECK_THROWS_AS(parse_scenario_json(R"({"T": 1, "n_prime": 2, "levels": [{"M": 6}],
      "estimators": ["nope"]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario_json(R"({"T": 1, "n_prime": 2, "levels": [{"M": 6}],
      "estimators": ["lrt"]})"),
                  std::invalid_argument);
  CHECK(parse_estimator("bc-mle-no-udsa") == Estimator::BcMleWithoutUdsa);
  CHECK(to_string(Estimator::Lrt) == "lrt");
}

TEST_CASE("lrt power study rows") {
  SimScenario s;
  s.n_prime = 3;
  s.levels = {{0.5, 6, 0.5}, {1.0, 12, 0.5}, {2.0, 18, 0.5}};
  s.reps = 20;
  const auto cells = lrt_power_study(s, {0.0, 2.0});
  REQUIRE(cells.size() == 2);
  for (const auto& c : cells) {
    CHECK(c.n_used <= 20);
    CHECK(c.reject_rate >= 0.0);
    CHECK(c.reject_rate <= 1.0);
  }
}
