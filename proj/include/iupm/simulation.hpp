#pragma once

// Monte Carlo harness: assay generation under the Poisson, negative binomial
// and imperfect-assay models, per-replicate estimation and the summary
// metrics (relative bias, ASE, ESE, coverage, relative efficiency).

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "iupm/assay.hpp"
#include "iupm/inference.hpp"
#include "iupm/rng.hpp"

namespace iupm {

enum class Allocation { Constant, NonConstant };

struct LevelDesign {
  double u = 1.0;
  std::int64_t M = 0;
  double q = 1.0;
};

struct ModelSpec {
  enum class Kind { Poisson, NegBin, Imperfect };
  Kind kind = Kind::Poisson;
  double gamma = 0.0;  // NegBin
  ErrorRates rates;    // Imperfect
};

enum class Estimator {
  MleWithUdsa,
  BcMleWithUdsa,
  MleWithoutUdsa,
  BcMleWithoutUdsa,
  NbMle,
  ImperfectMle,
  PerfectAssumedMle,
  Lrt,
};

std::string_view to_string(Estimator e);
std::optional<Estimator> parse_estimator(std::string_view name);

struct SimScenario {
  std::string name = "scenario";
  double T = 1.0;
  int n_prime = 1;
  Allocation allocation = Allocation::Constant;
  std::vector<LevelDesign> levels;
  ModelSpec model;
  int reps = 1;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  std::vector<Estimator> estimators{Estimator::MleWithUdsa};
};

// Throws std::invalid_argument on an unusable scenario.
void validate(const SimScenario& s);

// Constant: T / n' each. NonConstant: T / (2n') for the first half and
// 3T / (2n') for the second (n' even).
Eigen::VectorXd allocate_rates(double T, int n_prime, Allocation allocation);

struct SimulatedLevel {
  DilutionLevel level;  // observed counts over all n' lineages, q = design q
  WellAssay wells;      // the same wells, one record each
};

SimulatedLevel simulate_level(const Eigen::VectorXd& tau, const LevelDesign& design,
                              const ModelSpec& model, Rng& rng);

struct EstimateRecord {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  double statistic = std::numeric_limits<double>::quiet_NaN();  // Lrt
  double p_value = std::numeric_limits<double>::quiet_NaN();    // Lrt
  bool converged = false;
  bool excluded = false;  // infinite estimate, left out of this estimator's cell
  bool failed = false;    // the fit threw
};

struct ReplicateRecord {
  std::size_t rep = 0;
  int attempts = 1;  // generations needed to avoid an infinite MLE
  std::vector<EstimateRecord> estimates;  // parallel to scenario.estimators
};

struct SimMetrics {
  Estimator estimator = Estimator::MleWithUdsa;
  std::size_t n_used = 0;
  std::size_t excluded = 0;
  std::size_t failed = 0;
  std::size_t nonconverged = 0;
  double bias = std::numeric_limits<double>::quiet_NaN();  // (mean - T) / T
  double ase = std::numeric_limits<double>::quiet_NaN();
  double ese = std::numeric_limits<double>::quiet_NaN();   // needs n_used >= 2
  double cp = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  // ese(without UDSA)^2 / ese(with UDSA)^2, on the with-UDSA row when the
  // matching without-UDSA estimator was also run.
  std::optional<double> re;
  std::optional<double> reject_rate;  // Lrt
};

struct StudyOptions {
  unsigned threads = 1;
  bool keep_replicates = true;
  int max_attempts = 10000;
};

struct StudyResult {
  SimScenario scenario;
  std::vector<SimMetrics> metrics;
  std::vector<ReplicateRecord> replicates;
  std::size_t resimulated = 0;
};

StudyResult run_study(const SimScenario& scenario, const StudyOptions& opts = {});

// Metrics from already computed replicate records.
std::vector<SimMetrics> summarize(const SimScenario& scenario,
                                  const std::vector<ReplicateRecord>& records);

struct PowerCell {
  double gamma = 0.0;
  double reject_rate = 0.0;
  std::size_t n_used = 0;
};

// Rejection rate of the overdispersion test at level scenario.alpha for each
// gamma, data generated from the negative binomial model.
std::vector<PowerCell> lrt_power_study(const SimScenario& base,
                                       const std::vector<double>& gammas,
                                       const StudyOptions& opts = {});

SimScenario parse_scenario_json(std::string_view text);
std::string scenario_to_json(const SimScenario& s);

std::string metrics_to_csv(const StudyResult& r);
std::string replicates_to_csv(const StudyResult& r);

}  // namespace iupm
