#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "iupm/io.hpp"
#include "iupm/simulation.hpp"
#include "oracles.hpp"

using namespace iupm;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

const char* kScenario = R"({"name": "cli", "T": 1, "n_prime": 3,
  "levels": [{"u": 1, "M": 12, "q": 0.5}], "reps": 25, "seed": 4,
  "estimators": ["mle", "mle-no-udsa", "bc-mle"]})";

const char* kWells =
    "well,u,w_star,r,z_a,z_b\n"
    "1,1,0,0,,\n2,1,1,1,1,0\n3,1,1,1,0,1\n4,1,1,1,1,1\n5,1,0,0,,\n6,1,1,0,,\n"
    "7,0.5,0,0,,\n8,0.5,1,1,1,0\n9,0.5,0,0,,\n10,0.5,0,0,,\n";

}  // namespace

TEST_CASE("fit reads summary json from stdin") {
  const auto text = to_summary_json(fixtures::with_udsa(fixtures::subject("C1")));
  auto r = run({"fit", "-i", "-", "--no-udsa"}, text);
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["command"] == "fit");
  CHECK(j["udsa"] == false);
  CHECK(j["mle"]["iupm"].get<double>() == doctest::Approx(oracle::C1_T).epsilon(1e-8));
  CHECK(j["mle"]["ci"]["lower"].get<double>() == doctest::Approx(oracle::C1_lo).epsilon(1e-6));

  r = run({"fit", "-i", "-", "--bias-correct"}, text);
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).contains("bc_mle"));

  r = run({"fit", "-i", "-", "--output-format", "csv"}, text);
  CHECK(r.out.rfind("estimator,iupm,se,lower,upper,log_lik,converged,extreme\nmle,", 0) == 0);
  r = run({"fit", "-i", "-", "--output-format", "table"}, text);
  CHECK(r.out.find("95% CI") != std::string::npos);
}

TEST_CASE("imperfect fit with perfect rates matches the Poisson fit") {
  const auto p = run({"fit", "-i", "-", "--format", "wells-csv"}, kWells);
  REQUIRE(p.code == 0);
  const auto q = run({"fit", "-i", "-", "--format", "wells-csv", "--imperfect", "--sens-qvoa",
                      "1", "--spec-qvoa", "1", "--sens-udsa", "1", "--spec-udsa", "1"},
                     kWells);
  REQUIRE(q.code == 0);
  CHECK(json::parse(q.out)["mle"]["iupm"].get<double>() ==
        doctest::Approx(json::parse(p.out)["mle"]["iupm"].get<double>()).epsilon(1e-6));
  CHECK(json::parse(q.out)["model"] == "imperfect");
}

TEST_CASE("usage and data errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"fit"}).code == 2);
  CHECK(run({"fit", "-i", "-"}, "{").code == 2);
  CHECK(run({"fit", "-i", "/no/such/file.json"}).code == 2);
  CHECK(run({"fit", "-i", "-", "--imperfect"}, kWells).code == 2);
  CHECK(run({"fit", "-i", "-", "--model", "weird"}, kWells).code == 2);
  const auto bad = run({"fit", "-i", "-"}, R"({"n": 1, "levels": [{"u": 1, "M": 4, "MN": 2,
      "m": 3, "Y": [3]}]})");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("m>MP") != std::string::npos);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("lrt on one level is not identifiable") {
  auto a = fixtures::with_udsa(fixtures::subject("C1"));
  a.levels.resize(1);
  const auto r = run({"lrt", "-i", "-"}, to_summary_json(a));
  CHECK(r.code == 2);
  CHECK(r.err.find("not identifiable") != std::string::npos);

  const auto ok = run({"lrt", "-i", "-", "--no-udsa"},
                      to_summary_json(fixtures::with_udsa(fixtures::subject("C12"))));
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["statistic"].get<double>() >= 0.0);
}

TEST_CASE("simulate output is byte-identical across threads") {
  const auto dir = std::filesystem::temp_directory_path() / "iupm_cli_test";
  std::filesystem::create_directories(dir);
  const auto a = run({"simulate", "-i", "-", "--threads", "1", "--estimates",
                      (dir / "a.csv").string()},
                     kScenario);
  const auto b = run({"simulate", "-i", "-", "--threads", "3", "--estimates",
                      (dir / "b.csv").string()},
                     kScenario);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv").size() > 100);

  const auto c = run({"simulate", "-i", "-", "--seed", "5"}, kScenario);
  CHECK(c.out != a.out);

  const auto one = run({"simulate", "-i", "-", "--reps", "1", "--estimates",
                        (dir / "one.csv").string()},
                       kScenario);
  REQUIRE(one.code == 0);
  std::istringstream rows(slurp(dir / "one.csv"));
  std::string line;
  int count = 0;
  while (std::getline(rows, line)) ++count;
  CHECK(count == 4);  // header plus one row per estimator
  std::filesystem::remove_all(dir);

  const auto js = run({"simulate", "-i", "-", "--output-format", "json", "--reps", "3"},
                      kScenario);
  REQUIRE(js.code == 0);
  CHECK(json::parse(js.out)["metrics"].size() == 3);
}
