#include "iupm/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "iupm/bias.hpp"
#include "iupm/errors.hpp"
#include "iupm/imperfect.hpp"
#include "iupm/negbin.hpp"
#include "iupm/poisson.hpp"
#include "iupm/special.hpp"

namespace iupm {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::pair<Estimator, std::string_view> kEstimatorNames[] = {
    {Estimator::MleWithUdsa, "mle"},
    {Estimator::BcMleWithUdsa, "bc-mle"},
    {Estimator::MleWithoutUdsa, "mle-no-udsa"},
    {Estimator::BcMleWithoutUdsa, "bc-mle-no-udsa"},
    {Estimator::NbMle, "nb-mle"},
    {Estimator::ImperfectMle, "imperfect-mle"},
    {Estimator::PerfectAssumedMle, "perfect-assumed-mle"},
    {Estimator::Lrt, "lrt"},
};

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double mu = mean(v);
  std::vector<double> sq(v.size());
  std::transform(v.begin(), v.end(), sq.begin(),
                 [mu](double x) { return (x - mu) * (x - mu); });
  return std::sqrt(pairwise_sum(sq.data(), sq.size()) / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// Keeps the lineage columns listed in keep.
WellAssay select_dvls(const WellAssay& wa, const std::vector<std::size_t>& keep) {
  WellAssay out;
  out.u = wa.u;
  out.n = keep.size();
  out.wells.reserve(wa.wells.size());
  for (const auto& w : wa.wells) {
    WellRecord r{w.w_star, w.r, {}};
    if (w.r == 1) {
      for (auto i : keep) r.z_star.push_back(w.z_star[i]);
    }
    out.wells.push_back(std::move(r));
  }
  return out;
}

struct Generated {
  MultiDilutionAssay observed;  // undetected lineages removed
  std::vector<WellAssay> wells;  // same lineage columns as observed
  int attempts = 1;
};

Generated generate(const SimScenario& s, const Eigen::VectorXd& tau, Rng& rng,
                   int max_attempts) {
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    MultiDilutionAssay full;
    full.n = static_cast<std::size_t>(s.n_prime);
    std::vector<WellAssay> wells;
    for (const auto& d : s.levels) {
      auto sim = simulate_level(tau, d, s.model, rng);
      full.levels.push_back(std::move(sim.level));
      wells.push_back(std::move(sim.wells));
    }
    Generated g;
    g.observed = drop_undetected(full);
    if (classify_extreme(g.observed) == ExtremeOutcome::AllPositiveSingleDVL) continue;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < full.n; ++i) {
      std::int64_t t = 0;
      for (const auto& lv : full.levels) t += lv.Y[i];
      if (t > 0) keep.push_back(i);
    }
    for (const auto& wa : wells) g.wells.push_back(select_dvls(wa, keep));
    g.attempts = attempt;
    return g;
  }
  throw std::runtime_error("scenario '" + s.name + "': no usable assay after " +
                           std::to_string(max_attempts) + " attempts");
}

EstimateRecord from_fit(const FitResult& f) {
  EstimateRecord e;
  e.estimate = f.iupm;
  e.se = f.se_iupm;
  e.lower = f.ci.lower;
  e.upper = f.ci.upper;
  e.converged = f.converged;
  e.excluded = !std::isfinite(f.iupm);
  return e;
}

ReplicateRecord run_replicate(const SimScenario& s, const Eigen::VectorXd& tau,
                              std::size_t rep, int max_attempts) {
  Rng rng(s.seed, rep);
  const Generated g = generate(s, tau, rng, max_attempts);

  FitOptions fo;
  fo.alpha = s.alpha;
  fo.require_covariance = false;
  if (s.model.kind == ModelSpec::Kind::Imperfect) fo.validation.require_cover = false;

  std::optional<FitResult> with_udsa, without;
  auto mle_with = [&]() -> const FitResult& {
    if (!with_udsa) with_udsa = fit_mle(g.observed, fo);
    return *with_udsa;
  };
  auto mle_without = [&]() -> const FitResult& {
    if (!without) without = fit_mle(without_udsa(g.observed), fo);
    return *without;
  };

  ReplicateRecord out;
  out.rep = rep;
  out.attempts = g.attempts;
  for (auto est : s.estimators) {
    EstimateRecord e;
    try {
      switch (est) {
        case Estimator::MleWithUdsa:
        case Estimator::PerfectAssumedMle:
          e = from_fit(mle_with());
          break;
        case Estimator::BcMleWithUdsa:
          e = from_fit(bias_correct(mle_with(), g.observed, fo));
          break;
        case Estimator::MleWithoutUdsa:
          e = from_fit(mle_without());
          break;
        case Estimator::BcMleWithoutUdsa:
          e = from_fit(bias_correct(mle_without(), without_udsa(g.observed), fo));
          break;
        case Estimator::NbMle: {
          const auto nb = fit_negbin(g.observed, mle_with(), fo);
          e.estimate = nb.iupm;
          e.converged = nb.converged;
          e.excluded = !std::isfinite(nb.iupm);
          break;
        }
        case Estimator::ImperfectMle:
          e = from_fit(fit_imperfect(ImperfectModel{s.model.rates, g.wells}, fo));
          break;
        case Estimator::Lrt: {
          const auto t = lrt_overdispersion(g.observed, fo);
          e.estimate = t.negbin.iupm;
          e.statistic = t.statistic;
          e.p_value = t.p_value;
          e.converged = t.negbin.converged && t.poisson.converged;
          break;
        }
      }
    } catch (const std::exception&) {
      e = EstimateRecord{};
      e.failed = true;
    }
    out.estimates.push_back(e);
  }
  return out;
}

std::string num(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "" : (x > 0 ? "inf" : "-inf");
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(Estimator e) {
  for (const auto& [k, v] : kEstimatorNames) {
    if (k == e) return v;
  }
  return "?";
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  for (const auto& [k, v] : kEstimatorNames) {
    if (v == name) return k;
  }
  return std::nullopt;
}

void validate(const SimScenario& s) {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("scenario '" + s.name + "': " + msg);
  };
  if (!(s.T > 0.0) || !std::isfinite(s.T)) fail("T must be positive");
  if (s.n_prime < 1) fail("n_prime must be at least 1");
  if (s.allocation == Allocation::NonConstant && s.n_prime % 2 != 0) {
    fail("non-constant allocation needs an even n_prime");
  }
  if (s.levels.empty()) fail("no dilution levels");
  for (const auto& d : s.levels) {
    if (!(d.u > 0.0) || !std::isfinite(d.u)) fail("u must be positive");
    if (d.M < 1) fail("M must be at least 1");
    if (!(d.q >= 0.0 && d.q <= 1.0)) fail("q must lie in [0, 1]");
  }
  if (s.reps < 1) fail("reps must be at least 1");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) fail("alpha must lie in (0, 1)");
  if (s.estimators.empty()) fail("no estimators");
  if (s.model.kind == ModelSpec::Kind::NegBin && !(s.model.gamma >= 0.0)) {
    fail("gamma must be >= 0");
  }
  if (s.model.kind == ModelSpec::Kind::Imperfect) {
    const auto rep = iupm::validate(s.model.rates);
    if (!rep.ok()) fail(rep.to_string());
  }
  for (auto e : s.estimators) {
    if (e == Estimator::ImperfectMle && s.model.kind != ModelSpec::Kind::Imperfect) {
      fail("imperfect-mle needs an imperfect model");
    }
    if ((e == Estimator::NbMle || e == Estimator::Lrt) && s.levels.size() < 2) {
      fail(std::string(to_string(e)) + " needs at least two dilution levels");
    }
  }
}

Eigen::VectorXd allocate_rates(double T, int n_prime, Allocation allocation) {
  if (n_prime < 1) throw std::invalid_argument("allocate_rates: n_prime must be >= 1");
  const auto n = static_cast<Eigen::Index>(n_prime);
  if (allocation == Allocation::Constant) return Eigen::VectorXd::Constant(n, T / n_prime);
  if (n_prime % 2 != 0) {
    throw std::invalid_argument("allocate_rates: non-constant allocation needs even n_prime");
  }
  Eigen::VectorXd tau(n);
  tau.head(n / 2).setConstant(T / (2.0 * n_prime));
  tau.tail(n / 2).setConstant(3.0 * T / (2.0 * n_prime));
  return tau;
}

SimulatedLevel simulate_level(const Eigen::VectorXd& tau, const LevelDesign& design,
                              const ModelSpec& model, Rng& rng) {
  const auto n = static_cast<std::size_t>(tau.size());
  const auto M = static_cast<std::size_t>(design.M);
  const bool nb = model.kind == ModelSpec::Kind::NegBin && model.gamma > 0.0;
  const ErrorRates rates =
      model.kind == ModelSpec::Kind::Imperfect ? model.rates : ErrorRates{};

  std::vector<std::vector<std::uint8_t>> Z(M, std::vector<std::uint8_t>(n, 0));
  std::vector<int> w_star(M, 0);
  std::vector<std::size_t> positive;
  for (std::size_t j = 0; j < M; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double lambda = design.u * tau[static_cast<Eigen::Index>(i)];
      double p = -std::expm1(-lambda);
      if (nb && lambda > 0.0) {
        const double g = rng.gamma(1.0 / model.gamma, model.gamma);
        p = -std::expm1(-lambda * g);
      }
      Z[j][i] = rng.bernoulli(p) ? 1 : 0;
      any = any || Z[j][i];
    }
    w_star[j] = rng.bernoulli(any ? rates.sens_qvoa : 1.0 - rates.spec_qvoa) ? 1 : 0;
    if (w_star[j] == 1) positive.push_back(j);
  }

  const auto m = static_cast<std::size_t>(nint(design.q * static_cast<double>(positive.size())));
  std::vector<std::size_t> chosen = rng.sample_without_replacement(positive.size(), m);
  std::sort(chosen.begin(), chosen.end());

  SimulatedLevel out;
  out.wells.u = design.u;
  out.wells.n = n;
  out.wells.wells.resize(M);
  for (std::size_t j = 0; j < M; ++j) out.wells.wells[j].w_star = w_star[j];
  for (auto c : chosen) {
    auto& rec = out.wells.wells[positive[c]];
    rec.r = 1;
    rec.z_star.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool z = Z[positive[c]][i] != 0;
      rec.z_star[i] = rng.bernoulli(z ? rates.sens_udsa : 1.0 - rates.spec_udsa) ? 1 : 0;
    }
  }
  out.level = summarize_wells(out.wells);
  out.level.q = design.q;
  return out;
}

std::vector<SimMetrics> summarize(const SimScenario& s,
                                  const std::vector<ReplicateRecord>& records) {
  std::vector<SimMetrics> out;
  for (std::size_t k = 0; k < s.estimators.size(); ++k) {
    SimMetrics m;
    m.estimator = s.estimators[k];
    std::vector<double> est, se, hits, rejects;
    for (const auto& r : records) {
      const auto& e = r.estimates[k];
      if (e.failed) {
        ++m.failed;
        continue;
      }
      if (!e.converged) ++m.nonconverged;
      if (m.estimator == Estimator::Lrt) {
        if (std::isfinite(e.p_value)) rejects.push_back(e.p_value < s.alpha ? 1.0 : 0.0);
        continue;
      }
      if (e.excluded || !std::isfinite(e.estimate)) {
        ++m.excluded;
        continue;
      }
      est.push_back(e.estimate);
      if (std::isfinite(e.se)) se.push_back(e.se);
      if (std::isfinite(e.lower) && std::isfinite(e.upper)) {
        hits.push_back(e.lower <= s.T && s.T <= e.upper ? 1.0 : 0.0);
      }
    }
    if (m.estimator == Estimator::Lrt) {
      m.n_used = rejects.size();
      if (!rejects.empty()) m.reject_rate = mean(rejects);
    } else {
      m.n_used = est.size();
      m.bias = (mean(est) - s.T) / s.T;
      m.ase = mean(se);
      m.ese = sample_sd(est);
      m.cp = mean(hits);
      m.median = median(est);
    }
    out.push_back(m);
  }
  auto find = [&](Estimator e) -> const SimMetrics* {
    for (const auto& m : out) {
      if (m.estimator == e) return &m;
    }
    return nullptr;
  };
  for (auto& m : out) {
    const SimMetrics* other = nullptr;
    if (m.estimator == Estimator::MleWithUdsa) other = find(Estimator::MleWithoutUdsa);
    if (m.estimator == Estimator::BcMleWithUdsa) other = find(Estimator::BcMleWithoutUdsa);
    if (other && std::isfinite(m.ese) && std::isfinite(other->ese) && m.ese > 0.0) {
      m.re = (other->ese * other->ese) / (m.ese * m.ese);
    }
  }
  return out;
}

StudyResult run_study(const SimScenario& scenario, const StudyOptions& opts) {
  validate(scenario);
  const Eigen::VectorXd tau =
      allocate_rates(scenario.T, scenario.n_prime, scenario.allocation);
  const auto reps = static_cast<std::size_t>(scenario.reps);
  std::vector<ReplicateRecord> records(reps);

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= reps) return;
      try {
        records[i] = run_replicate(scenario, tau, i, opts.max_attempts);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(reps);
        return;
      }
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  StudyResult r;
  r.scenario = scenario;
  for (const auto& rec : records) {
    r.resimulated += static_cast<std::size_t>(rec.attempts - 1);
  }
  r.metrics = summarize(scenario, records);
  if (opts.keep_replicates) r.replicates = std::move(records);
  return r;
}

std::vector<PowerCell> lrt_power_study(const SimScenario& base,
                                       const std::vector<double>& gammas,
                                       const StudyOptions& opts) {
  std::vector<PowerCell> out;
  for (double g : gammas) {
    SimScenario s = base;
    s.model.kind = ModelSpec::Kind::NegBin;
    s.model.gamma = g;
    s.estimators = {Estimator::Lrt};
    StudyOptions o = opts;
    o.keep_replicates = false;
    const auto r = run_study(s, o);
    PowerCell c;
    c.gamma = g;
    c.reject_rate = r.metrics.front().reject_rate.value_or(kNaN);
    c.n_used = r.metrics.front().n_used;
    out.push_back(c);
  }
  return out;
}

SimScenario parse_scenario_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario: expected a JSON object");
  SimScenario s;
  try {
    s.name = j.value("name", s.name);
    s.T = j.at("T").get<double>();
    s.n_prime = j.at("n_prime").get<int>();
    const auto alloc = j.value("allocation", std::string("constant"));
    if (alloc == "constant") {
      s.allocation = Allocation::Constant;
    } else if (alloc == "non-constant") {
      s.allocation = Allocation::NonConstant;
    } else {
      throw ParseError("scenario: unknown allocation '" + alloc + "'");
    }
    for (const auto& lv : j.at("levels")) {
      LevelDesign d;
      d.u = lv.value("u", 1.0);
      d.M = lv.at("M").get<std::int64_t>();
      d.q = lv.value("q", 1.0);
      s.levels.push_back(d);
    }
    if (j.contains("model")) {
      const auto& mj = j.at("model");
      const auto kind = mj.value("kind", std::string("poisson"));
      if (kind == "poisson") {
        s.model.kind = ModelSpec::Kind::Poisson;
      } else if (kind == "negbin") {
        s.model.kind = ModelSpec::Kind::NegBin;
        s.model.gamma = mj.at("gamma").get<double>();
      } else if (kind == "imperfect") {
        s.model.kind = ModelSpec::Kind::Imperfect;
        s.model.rates.sens_qvoa = mj.value("sens_qvoa", 1.0);
        s.model.rates.spec_qvoa = mj.value("spec_qvoa", 1.0);
        s.model.rates.sens_udsa = mj.value("sens_udsa", 1.0);
        s.model.rates.spec_udsa = mj.value("spec_udsa", 1.0);
      } else {
        throw ParseError("scenario: unknown model kind '" + kind + "'");
      }
    }
    s.reps = j.value("reps", s.reps);
    s.seed = j.value("seed", s.seed);
    s.alpha = j.value("alpha", s.alpha);
    if (j.contains("estimators")) {
      s.estimators.clear();
      for (const auto& e : j.at("estimators")) {
        const auto name = e.get<std::string>();
        const auto est = parse_estimator(name);
        if (!est) throw ParseError("scenario: unknown estimator '" + name + "'");
        s.estimators.push_back(*est);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  validate(s);
  return s;
}

std::string scenario_to_json(const SimScenario& s) {
  json j;
  j["name"] = s.name;
  j["T"] = s.T;
  j["n_prime"] = s.n_prime;
  j["allocation"] = s.allocation == Allocation::Constant ? "constant" : "non-constant";
  j["levels"] = json::array();
  for (const auto& d : s.levels) j["levels"].push_back({{"u", d.u}, {"M", d.M}, {"q", d.q}});
  json m;
  switch (s.model.kind) {
    case ModelSpec::Kind::Poisson:
      m["kind"] = "poisson";
      break;
    case ModelSpec::Kind::NegBin:
      m["kind"] = "negbin";
      m["gamma"] = s.model.gamma;
      break;
    case ModelSpec::Kind::Imperfect:
      m["kind"] = "imperfect";
      m["sens_qvoa"] = s.model.rates.sens_qvoa;
      m["spec_qvoa"] = s.model.rates.spec_qvoa;
      m["sens_udsa"] = s.model.rates.sens_udsa;
      m["spec_udsa"] = s.model.rates.spec_udsa;
      break;
  }
  j["model"] = m;
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  j["alpha"] = s.alpha;
  j["estimators"] = json::array();
  for (auto e : s.estimators) j["estimators"].push_back(std::string(to_string(e)));
  return j.dump(2) + "\n";
}

std::string metrics_to_csv(const StudyResult& r) {
  std::ostringstream os;
  os << "scenario,estimator,n_used,excluded,failed,nonconverged,resimulated,"
        "bias,ase,ese,cp,re,median,reject_rate\n";
  for (const auto& m : r.metrics) {
    os << r.scenario.name << ',' << to_string(m.estimator) << ',' << m.n_used << ','
       << m.excluded << ',' << m.failed << ',' << m.nonconverged << ',' << r.resimulated
       << ',' << num(m.bias) << ',' << num(m.ase) << ',' << num(m.ese) << ','
       << num(m.cp) << ',' << num(m.re.value_or(kNaN)) << ',' << num(m.median) << ','
       << num(m.reject_rate.value_or(kNaN)) << '\n';
  }
  return os.str();
}

std::string replicates_to_csv(const StudyResult& r) {
  std::ostringstream os;
  os << "rep,attempts,estimator,estimate,se,lower,upper,statistic,p_value,"
        "converged,excluded,failed\n";
  for (const auto& rec : r.replicates) {
    for (std::size_t k = 0; k < rec.estimates.size(); ++k) {
      const auto& e = rec.estimates[k];
      os << rec.rep << ',' << rec.attempts << ',' << to_string(r.scenario.estimators[k])
         << ',' << num(e.estimate) << ',' << num(e.se) << ',' << num(e.lower) << ','
         << num(e.upper) << ',' << num(e.statistic) << ',' << num(e.p_value) << ','
         << e.converged << ',' << e.excluded << ',' << e.failed << '\n';
    }
  }
  return os.str();
}

}  // namespace iupm
