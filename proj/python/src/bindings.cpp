#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "app.hpp"
#include "crlab/bubbles.hpp"
#include "crlab/cayley.hpp"
#include "crlab/deform.hpp"
#include "crlab/error.hpp"
#include "crlab/heis.hpp"
#include "crlab/reduce.hpp"
#include "crlab/webster.hpp"

namespace py = pybind11;
using namespace crlab;

namespace {

app::RunConfig config_from(const std::string& text) {
  if (text.empty()) return app::RunConfig{};
  return nlohmann::json::parse(text).get<app::RunConfig>();
}

py::tuple pack(const app::Report& r) {
  return py::make_tuple(r.exit_code, r.json.dump(), r.tables);
}

}  // namespace

PYBIND11_MODULE(_crlab, m) {
  m.doc() = "Heisenberg group CR structures, bubbles and the reduced Yamabe functional";

  // translators run newest first, so the base class goes first
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<SolverError>(m, "SolverError", base);
  py::register_exception<CalibrationError>(m, "CalibrationError", base);

  py::class_<HPoint>(m, "HPoint")
      .def(py::init<>())
      .def(py::init([](double x, double y, double t) { return HPoint{x, y, t}; }), py::arg("x"), py::arg("y"),
           py::arg("t"))
      .def_readwrite("x", &HPoint::x)
      .def_readwrite("y", &HPoint::y)
      .def_readwrite("t", &HPoint::t)
      .def("__repr__", [](const HPoint& p) {
        return "HPoint(" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " + std::to_string(p.t) + ")";
      });

  m.def("group_mul", &group_mul);
  m.def("group_inv", &group_inv);
  m.def("dilate", &dilate, py::arg("lam"), py::arg("p"));
  m.def("koranyi_norm", &koranyi_norm);

  m.def("c1", [] { return default_bubbles().c1(); });
  m.def(
      "bubble",
      [](const HPoint& center, double lambda, const HPoint& p) {
        return default_bubbles().value(BubbleParams{center, lambda}, p);
      },
      py::arg("center"), py::arg("lam"), py::arg("p"));

  m.def("rossi_phi", &rossi_phi);
  m.def("pushforward_coefficient", &pushforward_coefficient);
  m.def(
      "pushforward_components",
      [](const HPoint& p) {
        const PushforwardCheck c = pushforward_W_check(p);
        return py::make_tuple(c.measured.z, c.measured.zb, c.measured.t);
      },
      "dF(W) at p split into Z, Zb, T components");

  m.def(
      "rossi_curvature",
      [](double s, const HPoint& p) {
        const CurvatureValue c = webster_curvature(rossi_deformation(s), p);
        return py::make_tuple(c.R_exact, c.R_leading);
      },
      py::arg("s"), py::arg("p"));

  m.def(
      "functional_value",
      [](double s, const HPoint& center, double lambda) {
        const BubbleParams b{center, lambda};
        const Deformation d = s == 0.0 ? zero_deformation() : rossi_deformation(s);
        return functional_value(d, default_bubbles().field(b), QuadratureRule().mapped(center, lambda));
      },
      py::arg("s"), py::arg("center"), py::arg("lam"), "J(U_{x,lambda}) for f = s phi on the default rule");

  m.def("default_config", [] { return nlohmann::json(app::RunConfig{}).dump(); });
  m.def("calibrate", [](const std::string& cfg) { return pack(app::cmd_calibrate(config_from(cfg))); },
        py::arg("config") = "");
  m.def(
      "verify",
      [](const std::string& suite, const std::string& cfg) { return pack(app::cmd_verify(config_from(cfg), suite)); },
      py::arg("suite"), py::arg("config") = "");
  m.def("expansion", [](const std::string& cfg) { return pack(app::cmd_expansion(config_from(cfg))); },
        py::arg("config") = "");
  m.def("cayley_check", [](const std::string& cfg, int points) { return pack(app::cmd_cayley_check(config_from(cfg), points)); },
        py::arg("config") = "", py::arg("points") = 100);
  m.def(
      "scan",
      [](const std::string& cfg) {
        const app::RunConfig c = config_from(cfg);
        app::Report r;
        {
          py::gil_scoped_release release;
          r = app::cmd_scan(c);
        }
        return pack(r);
      },
      py::arg("config") = "");
}
