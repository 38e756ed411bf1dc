#include "doctest.h"
#include "fixtures.hpp"
#include "iupm/assay.hpp"
#include "iupm/errors.hpp"

using namespace iupm;

namespace {

MultiDilutionAssay one_level() {
  MultiDilutionAssay a;
  a.n = 2;
  DilutionLevel lv;
  lv.u = 1.0;
  lv.M = 12;
  lv.MN = 6;
  lv.m = 4;
  lv.Y = {3, 2};
  a.levels.push_back(lv);
  return a;
}

}  // namespace

TEST_CASE("well-formed assay passes") {
  CHECK(validate(one_level()).ok());
  CHECK_NOTHROW(require_valid(one_level()));
}

TEST_CASE("each violation is reported with its code") {
  auto bad = [](auto mutate) {
    auto a = one_level();
    mutate(a);
    return validate(a);
  };
  CHECK(bad([](auto& a) { a.levels.clear(); }).has("empty"));
  CHECK(bad([](auto& a) { a.levels[0].u = 0.0; }).has("u"));
  CHECK(bad([](auto& a) { a.levels[0].M = 0; a.levels[0].MN = 0; }).has("M"));
  CHECK(bad([](auto& a) { a.levels[0].MN = -1; }).has("MN<0"));
  CHECK(bad([](auto& a) { a.levels[0].MN = 13; }).has("MN>M"));
  CHECK(bad([](auto& a) { a.levels[0].m = 7; }).has("m>MP"));
  CHECK(bad([](auto& a) { a.levels[0].q = 1.5; }).has("q"));
  CHECK(bad([](auto& a) { a.levels[0].Y = {1}; }).has("Y-length"));
  CHECK(bad([](auto& a) { a.levels[0].Y = {5, 2}; }).has("Y>m"));
  CHECK(bad([](auto& a) { a.levels[0].Y = {-1, 4}; }).has("Y<0"));
  CHECK(bad([](auto& a) { a.levels[0].Y = {1, 2}; }).has("sumY<m"));
  CHECK(bad([](auto& a) { a.levels.push_back(a.levels[0]); }).has("u-dup"));
  CHECK(bad([](auto& a) { a.dvl_ids = {"a"}; }).has("ids"));
  CHECK(bad([](auto& a) { a.dvl_ids = {"a", "a"}; }).has("ids"));
  CHECK(bad([](auto& a) {
          a.n = 3;
          a.levels[0].Y = {3, 2, 0};
        }).has("undetected"));
  CHECK_THROWS_AS(require_valid(bad([](auto&) {}).ok() ? MultiDilutionAssay{} : one_level()),
                  InvalidAssay);
}

TEST_CASE("relaxed options") {
  auto a = one_level();
  a.levels[0].Y = {1, 0};
  a.n = 2;
  ValidationOptions o;
  o.require_cover = false;
  o.require_detected = false;
  CHECK(validate(a, o).ok());
  CHECK(validate(a).has("undetected"));
}

TEST_CASE("violations carry level and DVL positions") {
  auto a = one_level();
  a.levels[0].Y = {5, 2};
  const auto rep = validate(a);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].level == 0);
  CHECK(rep.violations[0].dvl == 0);
  CHECK(rep.to_string().find("Y>m") != std::string::npos);
}

TEST_CASE("q defaults to m / M_P") {
  DilutionLevel lv;
  lv.M = 12;
  lv.MN = 4;
  lv.m = 2;
  CHECK(lv.q_or_derived() == doctest::Approx(0.25));
  lv.q = 0.5;
  CHECK(lv.q_or_derived() == 0.5);
  lv.q.reset();
  lv.MN = 12;
  lv.m = 0;
  CHECK(lv.q_or_derived() == 0.0);
}

TEST_CASE("well records reduce to sufficient statistics") {
  // Wells: negative, sequenced {1,0}, sequenced {1,1}, unsequenced positive.
  const std::vector<int> W{0, 1, 1, 1};
  const std::vector<std::vector<int>> Z{{}, {1, 0}, {1, 1}, {}};
  const std::vector<int> R{0, 1, 1, 0};
  const auto lv = summarize_wells(1.0, W, Z, R);
  CHECK(lv.M == 4);
  CHECK(lv.MN == 1);
  CHECK(lv.m == 2);
  CHECK(lv.Y == std::vector<std::int64_t>{2, 1});
  CHECK_THROWS_AS(summarize_wells(1.0, W, {{}, {1}, {1, 1}, {}}, R), InvalidAssay);
}

TEST_CASE("well assay validation") {
  WellAssay wa;
  wa.n = 2;
  wa.wells = {{0, 0, {}}, {1, 1, {1, 0}}, {1, 0, {}}};
  CHECK(validate(wa).ok());
  wa.wells[0].r = 1;
  CHECK(validate(wa).has("r-on-negative"));
  wa.wells[0] = {1, 1, {1}};
  CHECK(validate(wa).has("z-missing"));
  wa.wells[0] = {1, 0, {1, 0}};
  CHECK(validate(wa).has("z-unsequenced"));
  wa.wells[0] = {2, 0, {}};
  CHECK(validate(wa).has("w_star"));
}

TEST_CASE("error rate validation") {
  CHECK(validate(ErrorRates{}).ok());
  CHECK(validate(ErrorRates{0.9, 0.9, 0.8, 0.95}).ok());
  CHECK(validate(ErrorRates{1.1, 1, 1, 1}).has("sens_qvoa"));
  CHECK(validate(ErrorRates{0.5, 0.5, 1, 1}).has("qvoa-rates"));
  CHECK(validate(ErrorRates{1, 1, 0.4, 0.3}).has("udsa-rates"));
}

TEST_CASE("views of an assay") {
  const auto a = one_level();
  const auto s = without_udsa(a);
  CHECK(s.n == 1);
  CHECK(s.levels[0].m == 0);
  CHECK(s.levels[0].Y == std::vector<std::int64_t>{0});
  CHECK(s.levels[0].MN == 6);
  CHECK(validate(s).ok());

  auto z = with_zero_dvl(a, "extra");
  CHECK(z.n == 3);
  CHECK(z.levels[0].Y.back() == 0);
  CHECK(drop_undetected(z) == a);
}

TEST_CASE("fixture subjects are valid assays") {
  for (const auto& s : fixtures::subjects()) {
    INFO(s.id);
    CHECK(validate(fixtures::with_udsa(s)).ok());
    CHECK(validate(fixtures::without_udsa(s)).ok());
  }
}
