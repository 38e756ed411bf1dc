#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iupm/assay.hpp"
#include "iupm/bias.hpp"
#include "iupm/errors.hpp"
#include "iupm/imperfect.hpp"
#include "iupm/inference.hpp"
#include "iupm/io.hpp"
#include "iupm/negbin.hpp"
#include "iupm/simulation.hpp"
#include "iupm/special.hpp"

namespace py = pybind11;
using namespace iupm;

namespace {

DilutionLevel make_level(double u, std::int64_t M, std::int64_t MN, std::int64_t m,
                         std::vector<std::int64_t> Y, std::optional<double> q) {
  DilutionLevel d;
  d.u = u;
  d.M = M;
  d.MN = MN;
  d.m = m;
  d.Y = std::move(Y);
  d.q = q;
  return d;
}

MultiDilutionAssay make_assay(std::vector<DilutionLevel> levels,
                              std::vector<std::string> dvl_ids) {
  MultiDilutionAssay a;
  a.levels = std::move(levels);
  a.n = a.levels.empty() ? 0 : a.levels.front().Y.size();
  a.dvl_ids = std::move(dvl_ids);
  return a;
}

FitOptions options(double alpha, bool require_covariance) {
  FitOptions o;
  o.alpha = alpha;
  o.require_covariance = require_covariance;
  return o;
}

}  // namespace

PYBIND11_MODULE(_iupm, m) {
  m.doc() = "IUPM estimation from serial limiting dilution assays";

  py::register_exception<InvalidAssay>(m, "InvalidAssay", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NotIdentifiable>(m, "NotIdentifiable", PyExc_ValueError);
  py::register_exception<SingularInformation>(m, "SingularInformation", PyExc_ArithmeticError);

  py::class_<DilutionLevel>(m, "DilutionLevel")
      .def(py::init(&make_level), py::arg("u"), py::arg("M"), py::arg("MN"),
           py::arg("m") = 0, py::arg("Y") = std::vector<std::int64_t>{},
           py::arg("q") = py::none())
      .def_readwrite("u", &DilutionLevel::u)
      .def_readwrite("M", &DilutionLevel::M)
      .def_readwrite("MN", &DilutionLevel::MN)
      .def_readwrite("m", &DilutionLevel::m)
      .def_readwrite("Y", &DilutionLevel::Y)
      .def_readwrite("q", &DilutionLevel::q)
      .def_property_readonly("MP", &DilutionLevel::MP)
      .def("__repr__", [](const DilutionLevel& d) {
        return "DilutionLevel(u=" + std::to_string(d.u) + ", M=" + std::to_string(d.M) +
               ", MN=" + std::to_string(d.MN) + ", m=" + std::to_string(d.m) + ")";
      });

  py::class_<MultiDilutionAssay>(m, "Assay")
      .def(py::init(&make_assay), py::arg("levels"),
           py::arg("dvl_ids") = std::vector<std::string>{})
      .def_readwrite("n", &MultiDilutionAssay::n)
      .def_readwrite("levels", &MultiDilutionAssay::levels)
      .def_readwrite("dvl_ids", &MultiDilutionAssay::dvl_ids)
      .def("validate", [](const MultiDilutionAssay& a) {
        std::vector<std::string> codes;
        for (const auto& v : validate(a).violations) codes.push_back(v.code);
        return codes;
      });

  py::class_<Interval>(m, "Interval")
      .def_readonly("lower", &Interval::lower)
      .def_readonly("upper", &Interval::upper)
      .def_readonly("degenerate", &Interval::degenerate);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("tau_hat", &FitResult::tau_hat)
      .def_readonly("iupm", &FitResult::iupm)
      .def_readonly("covariance", &FitResult::covariance)
      .def_readonly("se", &FitResult::se_iupm)
      .def_readonly("ci", &FitResult::ci)
      .def_readonly("alpha", &FitResult::alpha)
      .def_readonly("log_lik", &FitResult::log_lik)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("bias", &FitResult::bias)
      .def_readonly("clamped", &FitResult::clamped)
      .def_readonly("boundary", &FitResult::boundary)
      .def_readonly("information_ok", &FitResult::information_ok)
      .def_property_readonly("extreme",
                             [](const FitResult& r) { return std::string(to_string(r.extreme)); });

  py::class_<NBFit>(m, "NBFit")
      .def_readonly("tau_hat", &NBFit::tau_hat)
      .def_readonly("gamma", &NBFit::gamma_hat)
      .def_readonly("iupm", &NBFit::iupm)
      .def_readonly("log_lik", &NBFit::log_lik)
      .def_readonly("converged", &NBFit::converged);

  py::class_<LrtResult>(m, "LrtResult")
      .def_readonly("statistic", &LrtResult::statistic)
      .def_readonly("p_value", &LrtResult::p_value)
      .def_readonly("poisson", &LrtResult::poisson)
      .def_readonly("negbin", &LrtResult::negbin);

  m.def("parse_summary_json",
        [](const std::string& text) { return parse_summary_json(text); }, py::arg("text"));
  m.def("to_summary_json", &to_summary_json, py::arg("assay"));
  m.def("without_udsa", &without_udsa, py::arg("assay"));

  m.def("fit_mle",
        [](const MultiDilutionAssay& a, double alpha, bool require_covariance) {
          return fit_mle(a, options(alpha, require_covariance));
        },
        py::arg("assay"), py::arg("alpha") = 0.05, py::arg("require_covariance") = true);
  m.def("fit_bc_mle",
        [](const MultiDilutionAssay& a, double alpha, bool require_covariance) {
          return fit_bc_mle(a, options(alpha, require_covariance));
        },
        py::arg("assay"), py::arg("alpha") = 0.05, py::arg("require_covariance") = true);
  m.def("fit_negbin", [](const MultiDilutionAssay& a) { return fit_negbin(a); },
        py::arg("assay"));
  m.def("lrt_overdispersion", [](const MultiDilutionAssay& a) { return lrt_overdispersion(a); },
        py::arg("assay"));
  m.def("lrt_p_value", &lrt_p_value, py::arg("statistic"));

  m.def("log_likelihood", &multi_log_likelihood, py::arg("tau"), py::arg("assay"));
  m.def("gradient", &multi_gradient, py::arg("tau"), py::arg("assay"));
  m.def("fisher_information",
        [](const Eigen::VectorXd& tau, const MultiDilutionAssay& a) {
          return fisher_information_multi(tau, a);
        },
        py::arg("tau"), py::arg("assay"));
  m.def("expected_m",
        [](double Lambda, std::int64_t M, double q) { return expected_m(Lambda, M, q); },
        py::arg("Lambda"), py::arg("M"), py::arg("q"));
  m.def("expected_y",
        [](double l, double Lambda, std::int64_t M, double q) {
          return expected_y(l, Lambda, M, q);
        },
        py::arg("lambda_i"), py::arg("Lambda"), py::arg("M"), py::arg("q"));
  m.def("wald_ci",
        [](double iupm, double se, double alpha) {
          const auto ci = wald_ci(iupm, se, alpha);
          return py::make_tuple(ci.lower, ci.upper);
        },
        py::arg("iupm"), py::arg("se"), py::arg("alpha") = 0.05);
  m.def("chi2_1_upper_tail", &chi2_1_upper_tail, py::arg("s"));
  m.def("nint", [](double x) { return nint(x); }, py::arg("x"));

  m.def("well_joint_prob",
        [](const Eigen::VectorXd& lambda, int w, const std::vector<std::uint8_t>& z,
           std::array<double, 4> r) {
          return well_joint_prob(lambda, w, z, ErrorRates{r[0], r[1], r[2], r[3]});
        },
        py::arg("lambda"), py::arg("w_star"), py::arg("z_star"),
        py::arg("rates") = std::array<double, 4>{1, 1, 1, 1});

  m.def("simulate",
        [](const std::string& scenario_json, unsigned threads) {
          const auto r = run_study(parse_scenario_json(scenario_json),
                                   StudyOptions{threads, false, 10000});
          return metrics_to_csv(r);
        },
        py::arg("scenario_json"), py::arg("threads") = 1,
        py::call_guard<py::gil_scoped_release>());
}
