#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "evaflow/error.hpp"
#include "evaflow/events.hpp"
#include "evaflow/flow.hpp"
#include "evaflow/manifest.hpp"
#include "evaflow/metrics.hpp"
#include "evaflow/mocomp.hpp"
#include "evaflow/nn/model.hpp"
#include "evaflow/representation.hpp"
#include "evaflow/simulate.hpp"

namespace py = pybind11;
using namespace evaflow;

namespace {

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v, std::vector<py::ssize_t> shape) {
  py::array_t<T> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <typename T>
std::vector<T> from_array(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

EventWindow make_window(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& t_us,
                        const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                        const py::array_t<double, py::array::c_style | py::array::forcecast>& y,
                        const py::array_t<int, py::array::c_style | py::array::forcecast>& p, std::int64_t t0_us,
                        std::int64_t t1_us, int width, int height) {
  const auto n = static_cast<std::size_t>(t_us.size());
  if (static_cast<std::size_t>(x.size()) != n || static_cast<std::size_t>(y.size()) != n ||
      static_cast<std::size_t>(p.size()) != n)
    throw invalid_argument("t_us, x, y and p must have the same length");
  std::vector<Event> ev(n);
  for (std::size_t i = 0; i < n; ++i)
    ev[i] = {t_us.data()[i], x.data()[i], y.data()[i], static_cast<std::int8_t>(p.data()[i] > 0 ? 1 : -1)};
  return EventWindow(std::move(ev), t0_us, t1_us, SensorGeometry{width, height});
}

py::array_t<float> grid_array(const Grid& g) { return to_array(g.data, {g.bins(), g.height(), g.width()}); }

FlowField make_flow(const py::array_t<double, py::array::c_style | py::array::forcecast>& u,
                    const py::array_t<double, py::array::c_style | py::array::forcecast>& v, double duration_s,
                    const std::optional<py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>>& valid) {
  if (u.ndim() != 2 || v.ndim() != 2 || u.shape(0) != v.shape(0) || u.shape(1) != v.shape(1))
    throw shape_error("u and v must be 2-D arrays of equal shape");
  FlowField f(static_cast<int>(u.shape(0)), static_cast<int>(u.shape(1)), duration_s);
  f.u = from_array(u);
  f.v = from_array(v);
  if (valid) {
    if (static_cast<std::size_t>(valid->size()) != f.size()) throw shape_error("valid mask does not match u/v");
    f.valid = from_array(*valid);
  }
  validate_flow(f);
  return f;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["epe"] = r.epe;
  d["ae_deg"] = r.ae_degrees;
  d["npe1"] = r.npe_1px;
  d["npe3"] = r.npe_3px;
  d["outlier_pct"] = r.outlier_pct;
  d["n_valid"] = r.n_valid;
  return d;
}

}  // namespace

PYBIND11_MODULE(_evaflow, m) {
  m.doc() = "Anytime event-camera optical flow toolkit";

  py::register_exception<Error>(m, "Error");
  // Tried before the generic translator above.
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      switch (e.kind()) {
        case ErrorKind::kInvalidArgument: py::set_error(PyExc_ValueError, e.what()); break;
        case ErrorKind::kIo: py::set_error(PyExc_OSError, e.what()); break;
        case ErrorKind::kNumeric: py::set_error(PyExc_ArithmeticError, e.what()); break;
        default: throw;
      }
    }
  });

  m.def("version", &version);

  py::class_<EventWindow>(m, "EventWindow")
      .def(py::init(&make_window), py::arg("t_us"), py::arg("x"), py::arg("y"), py::arg("p"), py::arg("t0_us"),
           py::arg("t1_us"), py::arg("width"), py::arg("height"))
      .def("__len__", &EventWindow::size)
      .def_property_readonly("t0_us", &EventWindow::t_start_us)
      .def_property_readonly("t1_us", &EventWindow::t_end_us)
      .def_property_readonly("width", [](const EventWindow& w) { return w.geometry().width; })
      .def_property_readonly("height", [](const EventWindow& w) { return w.geometry().height; })
      .def_property_readonly("t_us",
                             [](const EventWindow& w) {
                               std::vector<std::int64_t> v;
                               for (const auto& e : w.events()) v.push_back(e.t_us);
                               return to_array(v, {static_cast<py::ssize_t>(v.size())});
                             })
      .def_property_readonly("x",
                             [](const EventWindow& w) {
                               std::vector<double> v;
                               for (const auto& e : w.events()) v.push_back(e.x);
                               return to_array(v, {static_cast<py::ssize_t>(v.size())});
                             })
      .def_property_readonly("y",
                             [](const EventWindow& w) {
                               std::vector<double> v;
                               for (const auto& e : w.events()) v.push_back(e.y);
                               return to_array(v, {static_cast<py::ssize_t>(v.size())});
                             })
      .def_property_readonly("p", [](const EventWindow& w) {
        std::vector<std::int8_t> v;
        for (const auto& e : w.events()) v.push_back(e.p);
        return to_array(v, {static_cast<py::ssize_t>(v.size())});
      });

  m.def("load_events", py::overload_cast<const std::string&>(&load_events), py::arg("path"));
  m.def(
      "save_events", [](const EventWindow& w, const std::string& path) { save_events(w, path, EventFormat::kBinary); },
      py::arg("window"), py::arg("path"));

  m.def(
      "build_uvg",
      [](const EventWindow& w, int bins, std::optional<double> tau_s) {
        BinSpec spec = make_bin_spec(w, bins);
        if (tau_s) spec.tau_s = *tau_s;
        return grid_array(build_unified_voxel_grid(w, spec));
      },
      py::arg("window"), py::arg("bins"), py::arg("tau_s") = py::none(),
      "Unified voxel grid as a (B, H, W) float32 array.");
  m.def(
      "build_voxel_grid", [](const EventWindow& w, int bins) { return grid_array(build_voxel_grid(w, bins)); },
      py::arg("window"), py::arg("bins"));
  m.def(
      "stream_uvg",
      [](const EventWindow& w, int bins) {
        const BinSpec spec = make_bin_spec(w, bins);
        UvgStreamer s(spec);
        py::list out;
        std::size_t seen = 0;
        auto take = [&](std::vector<EmittedBin> emitted) {
          for (auto& b : emitted)
            out.append(py::make_tuple(b.index, seen, to_array(b.image, {spec.geometry.height, spec.geometry.width})));
        };
        for (const Event& e : w.events()) {
          take(s.push(e));
          ++seen;
        }
        take(s.finish());
        return out;
      },
      py::arg("window"), py::arg("bins"),
      "List of (bin index, events consumed before emission, H x W image).");

  py::class_<FlowField>(m, "FlowField")
      .def(py::init(&make_flow), py::arg("u"), py::arg("v"), py::arg("duration_s"), py::arg("valid") = py::none())
      .def_readonly("duration_s", &FlowField::duration_s)
      .def_readonly("height", &FlowField::height)
      .def_readonly("width", &FlowField::width)
      .def_property_readonly("u", [](const FlowField& f) { return to_array(f.u, {f.height, f.width}); })
      .def_property_readonly("v", [](const FlowField& f) { return to_array(f.v, {f.height, f.width}); })
      .def_property_readonly("valid", [](const FlowField& f) { return to_array(f.valid, {f.height, f.width}); });
  m.def("load_flow", &load_flow, py::arg("path"));
  m.def("save_flow", &save_flow, py::arg("flow"), py::arg("path"), py::arg("with_mask") = true);

  m.def("fwl", &fwl, py::arg("window"), py::arg("flow"), py::arg("t_ref_s"));
  m.def("rfwl", &rfwl, py::arg("window"), py::arg("flow"), py::arg("t_ref_s"));
  m.def(
      "motion_compensate",
      [](const EventWindow& w, const FlowField& f, double t_ref_s) {
        const MCFrame fr = motion_compensate(w, f, t_ref_s);
        return py::make_tuple(to_array(fr.counts, {fr.height, fr.width}), fr.n_in, fr.n_total);
      },
      py::arg("window"), py::arg("flow"), py::arg("t_ref_s"), "(counts, n_in, n_total)");

  m.def(
      "evaluate",
      [](const FlowField& pred, const FlowField& gt, bool planar_ae, bool absolute_outliers) {
        return report_dict(evaluate(pred, gt,
                                    planar_ae ? AngularConvention::kPlanar2d : AngularConvention::kHomogeneous3d,
                                    absolute_outliers ? OutlierConvention::kAbsoluteOnly
                                                      : OutlierConvention::kAbsoluteAndRelative));
      },
      py::arg("pred"), py::arg("gt"), py::arg("planar_ae") = false, py::arg("absolute_outliers") = false);
  m.def("epe", &epe, py::arg("pred"), py::arg("gt"));

  m.def(
      "simulate",
      [](const std::string& motion, double a, double b, double c, double duration_s, int width, int height, int points,
         std::uint64_t seed) {
        const SensorGeometry g{width, height};
        MotionModel mm;
        if (motion == "const") mm = MotionModel::constant_velocity(a, b);
        else if (motion == "arc") mm = MotionModel::circular_arc(a, b, c);
        else throw invalid_argument("motion must be 'const' or 'arc'");
        const EventWindow w = generate_events(make_random_pattern(g, points, 2.0, seed), mm, duration_s);
        return py::make_tuple(w, ground_truth_flow(mm, 0.0, duration_s, g));
      },
      py::arg("motion"), py::arg("a"), py::arg("b"), py::arg("c") = 0.0, py::arg("duration_s") = 0.1,
      py::arg("width") = 64, py::arg("height") = 64, py::arg("points") = 150, py::arg("seed") = 0,
      "const: a, b = vx, vy (px/s). arc: a, b = center, c = omega (rad/s). Returns (window, gt_flow).");

  m.def(
      "infer",
      [](const EventWindow& w, const std::string& params_path, const std::map<std::string, std::string>& config) {
        const nn::ModelConfig model = nn::config_from_map(config);
        const auto params = nn::load_params(params_path);
        const Grid grid = build_unified_voxel_grid(w, make_bin_spec(w, model.bins));
        return nn::model_forward(grid, model, params).flows;
      },
      py::arg("window"), py::arg("params_path"), py::arg("config"),
      "Time-dense flows V_{0,j}, j = 1..B-1.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"evaflow"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit code, stdout, stderr).");
}
