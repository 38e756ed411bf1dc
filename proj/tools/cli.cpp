#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "iupm/bias.hpp"
#include "iupm/errors.hpp"
#include "iupm/imperfect.hpp"
#include "iupm/inference.hpp"
#include "iupm/io.hpp"
#include "iupm/negbin.hpp"
#include "iupm/simulation.hpp"

namespace iupm::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Config {
  std::string input;
  std::string format;
  std::string model = "poisson";
  bool imperfect = false;
  bool negbin = false;
  bool no_udsa = false;
  bool bias_correct = false;
  std::optional<double> sens_qvoa, spec_qvoa, sens_udsa, spec_udsa;
  double alpha = 0.05;
  std::optional<double> sim_alpha;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  unsigned threads = 1;
  std::string output = "-";
  std::string output_format;
  std::string estimates;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ordered_json number(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

std::string fmt6(double x) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::string read_input(const std::string& path, std::istream& in) {
  if (path.empty()) throw UsageError("--input is required");
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

void write_output(const Config& c, const std::string& text, std::ostream& out) {
  if (c.output.empty() || c.output == "-") {
    out << text;
    return;
  }
  std::ofstream f(c.output, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + c.output + "'");
  f << text;
}

struct Loaded {
  MultiDilutionAssay assay;
  std::optional<WellData> wells;
};

Loaded load(const Config& c, std::istream& in) {
  const std::string bytes = read_input(c.input, in);
  InputFormat fmt;
  if (!c.format.empty()) {
    const auto f = parse_format_name(c.format);
    if (!f) throw UsageError("unknown --format '" + c.format + "'");
    fmt = *f;
  } else {
    fmt = guess_format(c.input, bytes);
  }
  Loaded l;
  auto parsed = parse_assay(bytes, fmt);
  if (auto* a = std::get_if<MultiDilutionAssay>(&parsed)) {
    l.assay = std::move(*a);
  } else {
    l.wells = std::move(std::get<WellData>(parsed));
    l.assay = summarize_wells(l.wells->levels);
    l.assay.dvl_ids = l.wells->dvl_ids;
  }
  return l;
}

ordered_json fit_json(const FitResult& r) {
  ordered_json j;
  j["iupm"] = number(r.iupm);
  j["se"] = number(r.se_iupm);
  j["ci"] = {{"lower", number(r.ci.lower)},
             {"upper", number(r.ci.upper)},
             {"level", 1.0 - r.alpha},
             {"degenerate", r.ci.degenerate}};
  j["log_lik"] = number(r.log_lik);
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["extreme"] = std::string(to_string(r.extreme));
  j["information_ok"] = r.information_ok;
  j["boundary"] = r.boundary;
  ordered_json dvls = ordered_json::array();
  for (Eigen::Index i = 0; i < r.tau_hat.size(); ++i) {
    ordered_json d;
    const auto iu = static_cast<std::size_t>(i);
    d["id"] = iu < r.dvl_ids.size() ? r.dvl_ids[iu] : std::to_string(i + 1);
    d["tau"] = number(r.tau_hat[i]);
    if (r.bias) d["bias"] = number((*r.bias)[i]);
    dvls.push_back(d);
  }
  j["dvls"] = dvls;
  if (r.bias) j["clamped"] = r.clamped;
  return j;
}

std::string fit_table_row(const std::string& name, const FitResult& r) {
  std::ostringstream os;
  os << std::left << std::setw(14) << name << " iupm " << fmt6(r.iupm) << "  se "
     << fmt6(r.se_iupm) << "  " << static_cast<int>(std::lround(100 * (1 - r.alpha)))
     << "% CI (" << fmt6(r.ci.lower) << ", " << fmt6(r.ci.upper) << ")  loglik "
     << fmt6(r.log_lik) << (r.converged ? "" : "  NOT CONVERGED");
  if (r.extreme != ExtremeOutcome::Regular) os << "  [" << to_string(r.extreme) << "]";
  if (r.boundary) os << "  [boundary]";
  if (!r.information_ok) os << "  [singular information]";
  os << '\n';
  return os.str();
}

std::string csv_num(double x) {
  if (std::isnan(x)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string fit_csv_row(const std::string& name, const FitResult& r) {
  std::ostringstream os;
  os << name << ',' << csv_num(r.iupm) << ',' << csv_num(r.se_iupm) << ','
     << csv_num(r.ci.lower) << ',' << csv_num(r.ci.upper) << ',' << csv_num(r.log_lik)
     << ',' << (r.converged ? 1 : 0) << ',' << to_string(r.extreme) << '\n';
  return os.str();
}

const char* kFitCsvHeader = "estimator,iupm,se,lower,upper,log_lik,converged,extreme\n";

ErrorRates rates_from(const Config& c) {
  if (!c.sens_qvoa || !c.spec_qvoa || !c.sens_udsa || !c.spec_udsa) {
    throw UsageError(
        "the imperfect model needs --sens-qvoa, --spec-qvoa, --sens-udsa and --spec-udsa");
  }
  return ErrorRates{*c.sens_qvoa, *c.spec_qvoa, *c.sens_udsa, *c.spec_udsa};
}

std::string resolved_model(const Config& c) {
  if (c.imperfect && c.negbin) throw UsageError("--imperfect and --negbin are exclusive");
  if (c.imperfect) return "imperfect";
  if (c.negbin) return "negbin";
  if (c.model != "poisson" && c.model != "negbin" && c.model != "imperfect") {
    throw UsageError("unknown --model '" + c.model + "'");
  }
  return c.model;
}

std::string out_format(const Config& c, const std::string& fallback) {
  const std::string f = c.output_format.empty() ? fallback : c.output_format;
  if (f != "json" && f != "csv" && f != "table") {
    throw UsageError("unknown --output-format '" + f + "'");
  }
  return f;
}

int cmd_fit(const Config& c, std::istream& in, std::ostream& out) {
  const std::string model = resolved_model(c);
  const std::string ofmt = out_format(c, "json");
  Loaded l = load(c, in);
  FitOptions opts;
  opts.alpha = c.alpha;
  opts.require_covariance = false;

  ordered_json j;
  j["command"] = "fit";
  j["model"] = model;
  j["udsa"] = !c.no_udsa;
  std::string table, csv = kFitCsvHeader;
  bool converged = true;

  if (model == "imperfect") {
    if (!l.wells) throw UsageError("the imperfect model needs wells-csv input");
    if (c.no_udsa) throw UsageError("--no-udsa is not available with --imperfect");
    if (c.bias_correct) throw UsageError("--bias-correct applies to the Poisson model only");
    ImperfectModel m{rates_from(c), l.wells->levels};
    FitResult r = fit_imperfect(m, opts);
    r.dvl_ids = l.wells->dvl_ids;
    j["mle"] = fit_json(r);
    table += fit_table_row("imperfect-mle", r);
    csv += fit_csv_row("imperfect-mle", r);
    converged = r.converged;
  } else if (model == "negbin") {
    if (c.bias_correct) throw UsageError("--bias-correct applies to the Poisson model only");
    MultiDilutionAssay a = c.no_udsa ? without_udsa(l.assay) : l.assay;
    const NBFit r = fit_negbin(a, opts);
    ordered_json nb;
    nb["iupm"] = number(r.iupm);
    nb["gamma"] = number(r.gamma_hat);
    nb["gamma_at_bound"] = r.gamma_at_bound;
    nb["log_lik"] = number(r.log_lik);
    nb["converged"] = r.converged;
    nb["extreme"] = std::string(to_string(r.extreme));
    ordered_json dvls = ordered_json::array();
    for (Eigen::Index i = 0; i < r.tau_hat.size(); ++i) {
      const auto iu = static_cast<std::size_t>(i);
      dvls.push_back({{"id", iu < a.dvl_ids.size() ? a.dvl_ids[iu] : std::to_string(i + 1)},
                      {"tau", number(r.tau_hat[i])}});
    }
    nb["dvls"] = dvls;
    j["nb_mle"] = nb;
    std::ostringstream os;
    os << "nb-mle         iupm " << fmt6(r.iupm) << "  gamma " << fmt6(r.gamma_hat)
       << "  loglik " << fmt6(r.log_lik) << (r.converged ? "" : "  NOT CONVERGED") << '\n';
    table += os.str();
    csv = "estimator,iupm,gamma,log_lik,converged\n";
    csv += "nb-mle," + csv_num(r.iupm) + ',' + csv_num(r.gamma_hat) + ',' +
           csv_num(r.log_lik) + ',' + (r.converged ? "1" : "0") + '\n';
    converged = r.converged;
  } else {
    MultiDilutionAssay a = c.no_udsa ? without_udsa(l.assay) : l.assay;
    const FitResult mle = fit_mle(a, opts);
    j["mle"] = fit_json(mle);
    table += fit_table_row("mle", mle);
    csv += fit_csv_row("mle", mle);
    converged = mle.converged;
    if (c.bias_correct) {
      const FitResult bc = bias_correct(mle, a, opts);
      j["bc_mle"] = fit_json(bc);
      table += fit_table_row("bc-mle", bc);
      csv += fit_csv_row("bc-mle", bc);
    }
  }

  if (ofmt == "json") {
    write_output(c, j.dump(2) + "\n", out);
  } else if (ofmt == "csv") {
    write_output(c, csv, out);
  } else {
    write_output(c, table, out);
  }
  return converged ? kOk : kNotConverged;
}

int cmd_lrt(const Config& c, std::istream& in, std::ostream& out) {
  const std::string ofmt = out_format(c, "json");
  Loaded l = load(c, in);
  FitOptions opts;
  opts.alpha = c.alpha;
  const MultiDilutionAssay a = c.no_udsa ? without_udsa(l.assay) : l.assay;
  const LrtResult r = lrt_overdispersion(a, opts);

  ordered_json j;
  j["command"] = "lrt";
  j["poisson"] = {{"iupm", number(r.poisson.iupm)},
                  {"log_lik", number(r.poisson.log_lik)},
                  {"converged", r.poisson.converged}};
  j["negbin"] = {{"iupm", number(r.negbin.iupm)},
                 {"gamma", number(r.negbin.gamma_hat)},
                 {"log_lik", number(r.negbin.log_lik)},
                 {"converged", r.negbin.converged}};
  j["statistic"] = number(r.statistic);
  j["raw_statistic"] = number(r.raw_statistic);
  j["p_value"] = number(r.p_value);

  if (ofmt == "json") {
    write_output(c, j.dump(2) + "\n", out);
  } else if (ofmt == "csv") {
    write_output(c,
                 "poisson_iupm,nb_iupm,gamma,statistic,p_value\n" + csv_num(r.poisson.iupm) +
                     ',' + csv_num(r.negbin.iupm) + ',' + csv_num(r.negbin.gamma_hat) + ',' +
                     csv_num(r.statistic) + ',' + csv_num(r.p_value) + '\n',
                 out);
  } else {
    std::ostringstream os;
    os << "poisson mle    iupm " << fmt6(r.poisson.iupm) << "  loglik "
       << fmt6(r.poisson.log_lik) << '\n'
       << "nb mle         iupm " << fmt6(r.negbin.iupm) << "  gamma "
       << fmt6(r.negbin.gamma_hat) << "  loglik " << fmt6(r.negbin.log_lik) << '\n'
       << "statistic      " << std::fixed << std::setprecision(3) << r.statistic
       << "  p " << r.p_value << '\n';
    write_output(c, os.str(), out);
  }
  const bool ok = r.poisson.converged && r.negbin.converged;
  return ok ? kOk : kNotConverged;
}

int cmd_simulate(const Config& c, std::istream& in, std::ostream& out) {
  const std::string ofmt = out_format(c, "csv");
  SimScenario s = parse_scenario_json(read_input(c.input, in));
  if (c.seed) s.seed = *c.seed;
  if (c.reps) s.reps = *c.reps;
  if (c.sim_alpha) s.alpha = *c.sim_alpha;
  validate(s);
  StudyOptions so;
  so.threads = std::max(1u, c.threads);
  so.keep_replicates = !c.estimates.empty();
  const StudyResult r = run_study(s, so);

  if (!c.estimates.empty()) {
    std::ofstream f(c.estimates, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + c.estimates + "'");
    f << replicates_to_csv(r);
  }
  if (ofmt == "csv") {
    write_output(c, metrics_to_csv(r), out);
  } else if (ofmt == "json") {
    ordered_json j;
    j["command"] = "simulate";
    j["scenario"] = json::parse(scenario_to_json(s));
    j["resimulated"] = r.resimulated;
    ordered_json rows = ordered_json::array();
    for (const auto& m : r.metrics) {
      rows.push_back({{"estimator", std::string(to_string(m.estimator))},
                      {"n_used", m.n_used},
                      {"excluded", m.excluded},
                      {"failed", m.failed},
                      {"nonconverged", m.nonconverged},
                      {"bias", number(m.bias)},
                      {"ase", number(m.ase)},
                      {"ese", number(m.ese)},
                      {"cp", number(m.cp)},
                      {"re", m.re ? number(*m.re) : ordered_json(nullptr)},
                      {"median", number(m.median)},
                      {"reject_rate",
                       m.reject_rate ? number(*m.reject_rate) : ordered_json(nullptr)}});
    }
    j["metrics"] = rows;
    write_output(c, j.dump(2) + "\n", out);
  } else {
    std::ostringstream os;
    os << s.name << ": " << s.reps << " replicates, " << r.resimulated << " resimulated\n";
    auto cell = [](double x) {
      if (std::isnan(x)) return std::string("NA");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", x);
      return std::string(buf);
    };
    os << std::left << std::setw(20) << "estimator" << std::setw(10) << "bias"
       << std::setw(10) << "ase" << std::setw(10) << "ese" << std::setw(10) << "cp"
       << std::setw(10) << "re" << std::setw(10) << "reject" << std::setw(8) << "used"
       << "failed\n";
    for (const auto& m : r.metrics) {
      os << std::setw(20) << to_string(m.estimator) << std::setw(10) << cell(m.bias)
         << std::setw(10) << cell(m.ase) << std::setw(10) << cell(m.ese) << std::setw(10)
         << cell(m.cp) << std::setw(10) << (m.re ? cell(*m.re) : "NA") << std::setw(10)
         << (m.reject_rate ? cell(*m.reject_rate) : "NA") << std::setw(8) << m.n_used
         << m.failed + m.nonconverged << '\n';
    }
    write_output(c, os.str(), out);
  }
  return kOk;
}

unsigned default_threads() {
  if (const char* env = std::getenv("IUPM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  Config c;
  c.threads = default_threads();
  CLI::App app{"Estimate infectious units per million from dilution assays"};
  app.require_subcommand(1, 1);

  auto add_input = [&](CLI::App* sub) {
    sub->add_option("-i,--input", c.input, "input file, - for stdin")->required();
    sub->add_option("--format", c.format, "summary-json | wells-csv (default: guess)");
    sub->add_option("-o,--output", c.output, "output file, - for stdout");
    sub->add_option("--output-format", c.output_format, "json | csv | table");
    sub->add_option("--alpha", c.alpha, "1 - confidence level")
        ->check(CLI::Range(0.0, 1.0));
  };

  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit");
  add_input(fit);
  fit->add_option("--model", c.model, "poisson | negbin | imperfect");
  fit->add_flag("--imperfect", c.imperfect, "same as --model imperfect");
  fit->add_flag("--negbin", c.negbin, "same as --model negbin");
  fit->add_flag("--no-udsa", c.no_udsa, "ignore sequencing data");
  fit->add_flag("--bias-correct", c.bias_correct, "also report the bias-corrected MLE");
  fit->add_option("--sens-qvoa", c.sens_qvoa)->check(CLI::Range(0.0, 1.0));
  fit->add_option("--spec-qvoa", c.spec_qvoa)->check(CLI::Range(0.0, 1.0));
  fit->add_option("--sens-udsa", c.sens_udsa)->check(CLI::Range(0.0, 1.0));
  fit->add_option("--spec-udsa", c.spec_udsa)->check(CLI::Range(0.0, 1.0));

  auto* lrt = app.add_subcommand("lrt", "likelihood ratio test for overdispersion");
  add_input(lrt);
  lrt->add_flag("--no-udsa", c.no_udsa, "ignore sequencing data");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study from a scenario file");
  sim->add_option("-i,--input,--scenario", c.input, "scenario JSON, - for stdin")
      ->required();
  sim->add_option("-o,--output", c.output, "metrics output, - for stdout");
  sim->add_option("--output-format", c.output_format, "csv | json | table");
  sim->add_option("--alpha", c.sim_alpha, "overrides the scenario alpha")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--seed", c.seed, "overrides the scenario seed");
  sim->add_option("--reps", c.reps, "overrides the scenario replicate count")
      ->check(CLI::PositiveNumber);
  sim->add_option("--threads", c.threads, "worker threads (default $IUPM_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  sim->add_option("--estimates", c.estimates, "per-replicate estimates CSV");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fit->parsed()) return cmd_fit(c, in, out);
    if (lrt->parsed()) return cmd_lrt(c, in, out);
    return cmd_simulate(c, in, out);
  } catch (const NotIdentifiable& e) {
    err << "error: " << e.what() << " (not identifiable given assay data)\n";
    return kUsage;
  } catch (const InvalidAssay& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace iupm::cli
