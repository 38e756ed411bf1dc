#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "iupm/errors.hpp"
#include "iupm/io.hpp"

using namespace iupm;

TEST_CASE("summary json round trip") {
  for (const auto& s : fixtures::subjects()) {
    INFO(s.id);
    auto a = fixtures::with_udsa(s);
    a.levels[0].q = 0.5;
    const auto text = to_summary_json(a);
    CHECK(parse_summary_json(text) == a);
  }
}

TEST_CASE("summary json example") {
  const auto a = parse_summary_json(R"({"n": 2, "dvls": ["a", "b"],
      "levels": [{"u": 1, "M": 12, "MN": 6, "m": 3, "q": 0.5, "Y": [2, 1]}]})");
  CHECK(a.n == 2);
  CHECK(a.dvl_ids == std::vector<std::string>{"a", "b"});
  CHECK(a.levels[0].M == 12);
  CHECK(a.levels[0].q.value() == 0.5);
  CHECK(a.levels[0].Y == std::vector<std::int64_t>{2, 1});
}

TEST_CASE("summary json rejects malformed input") {
  CHECK_THROWS_AS(parse_summary_json("{"), ParseError);
  CHECK_THROWS_AS(parse_summary_json("[]"), ParseError);
  CHECK_THROWS_AS(parse_summary_json(R"({"n": -1, "levels": []})"), ParseError);
  CHECK_THROWS_AS(parse_summary_json(R"({"n": 1, "levels": [{"u": 1, "M": 1.5, "MN": 0,
      "m": 0, "Y": [0]}]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_summary_json(R"({"n": 1, "levels": [{"u": 1, "M": 4, "MN": 2,
      "m": 1, "Y": ["x"]}]})"),
                  ParseError);
  // Parses but breaks the data model.
  CHECK_THROWS_AS(parse_summary_json(R"({"n": 1, "levels": [{"u": 1, "M": 4, "MN": 2,
      "m": 3, "Y": [3]}]})"),
                  InvalidAssay);
}

TEST_CASE("wells csv round trip and levels") {
  const std::string text =
      "well,u,w_star,r,z_a,z_b\n"
      "1,1,0,0,,\n"
      "2,1,1,1,1,0\n"
      "3,1,1,0,,\n"
      "4,0.5,1,1,0,1\n"
      "5,0.5,0,0,,\n";
  const auto data = parse_wells_csv(text);
  CHECK(data.dvl_ids == std::vector<std::string>{"a", "b"});
  REQUIRE(data.levels.size() == 2);
  CHECK(data.levels[0].u == 1.0);
  CHECK(data.levels[0].wells.size() == 3);
  CHECK(data.levels[1].wells[0].z_star == std::vector<std::uint8_t>{0, 1});
  CHECK(to_wells_csv(data) == text);
  const auto lv = summarize_wells(data.levels[0]);
  CHECK(lv.MN == 1);
  CHECK(lv.m == 1);
  CHECK(lv.Y == std::vector<std::int64_t>{1, 0});
}

TEST_CASE("wells csv errors") {
  CHECK_THROWS_AS(parse_wells_csv(""), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("a,b,c\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,a\n1,1,0,0,\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,z_a,z_a\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,z_a\n1,1,1,1,\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,z_a\n1,1,1,0,1\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,z_a\n1,x,1,0,\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,z_a\n1,1,2,0,\n"), ParseError);
  CHECK_THROWS_AS(parse_wells_csv("well,u,w_star,r,z_a\n1,1,0,1,1\n"), InvalidAssay);
}

TEST_CASE("format detection") {
  CHECK(guess_format("x.json", "") == InputFormat::SummaryJson);
  CHECK(guess_format("x.csv", "{") == InputFormat::WellsCsv);
  CHECK(guess_format("-", "  {\"n\": 1}") == InputFormat::SummaryJson);
  CHECK(guess_format("-", "well,u") == InputFormat::WellsCsv);
  CHECK(parse_format_name("json") == InputFormat::SummaryJson);
  CHECK(parse_format_name("wells-csv") == InputFormat::WellsCsv);
  CHECK_FALSE(parse_format_name("xml"));
  CHECK(format_name(InputFormat::WellsCsv) == "wells-csv");
}
