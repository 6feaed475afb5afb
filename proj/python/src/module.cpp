#include <sstream>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dwos/adjoint.hpp"
#include "dwos/errors.hpp"
#include "dwos/kernels.hpp"
#include "dwos/optimize.hpp"
#include "dwos/runner.hpp"
#include "dwos/solvers.hpp"

namespace py = pybind11;
using namespace dwos;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Array& a) {
  if (a.ndim() != 2 || (a.shape(1) != 2 && a.shape(1) != 3)) {
    throw py::value_error("points must have shape (n, 2) or (n, 3)");
  }
  auto r = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    out[i] = {r(i, 0), r(i, 1), a.shape(1) == 3 ? r(i, 2) : 0.0};
  }
  return out;
}

Array to_array(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Array out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Field texture_field(const Array& values, std::tuple<double, double, double, double> extent) {
  if (values.ndim() != 2) throw py::value_error("texture values must be a 2D array indexed [j, i]");
  const auto ny = static_cast<std::size_t>(values.shape(0));
  const auto nx = static_cast<std::size_t>(values.shape(1));
  std::vector<double> v(values.data(), values.data() + nx * ny);
  const auto [xmin, ymin, xmax, ymax] = extent;
  return Field::texture(GridTexture(nx, ny, Extent{xmin, ymin, xmax, ymax}, std::move(v)));
}

py::object gradient_to_py(const FieldGradient& g, const Field& f) {
  if (f.is_constant()) return py::float_(g.scalar);
  return to_array(g.texels.values(), g.texels.ny(), g.texels.nx());
}

}  // namespace

PYBIND11_MODULE(_dwos, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<PdeKind>(m, "PdeKind")
      .value("Poisson", PdeKind::Poisson)
      .value("ScreenedPoisson", PdeKind::ScreenedPoisson)
      .value("Elliptic", PdeKind::Elliptic);

  py::class_<Domain>(m, "Domain")
      .def_property_readonly("dimension", &Domain::dimension)
      .def_property_readonly("diameter", &Domain::diameter)
      .def("contains", [](const Domain& d, double x, double y, double z) { return d.contains({x, y, z}); },
           py::arg("x"), py::arg("y"), py::arg("z") = 0.0)
      .def("distance_to_boundary",
           [](const Domain& d, double x, double y, double z) { return d.distance_to_boundary({x, y, z}); },
           py::arg("x"), py::arg("y"), py::arg("z") = 0.0);
  m.def("unit_disk", &unit_disk);
  m.def("unit_square", &unit_square);
  m.def("disk_with_obstacles", &disk_with_obstacles);

  py::class_<Field>(m, "Field")
      .def_static("constant", &Field::constant)
      .def_static("texture", &texture_field, py::arg("values"), py::arg("extent") = std::make_tuple(-1.0, -1.0, 1.0, 1.0))
      .def_property_readonly("is_constant", &Field::is_constant)
      .def("__call__", [](const Field& f, double x, double y) { return f.eval({x, y, 0.0}); });

  py::class_<PDEProblem>(m, "PDEProblem")
      .def(py::init<>())
      .def_readwrite("kind", &PDEProblem::kind)
      .def_readwrite("domain", &PDEProblem::domain)
      .def_readwrite("source", &PDEProblem::source)
      .def_readwrite("sigma", &PDEProblem::sigma)
      .def_readwrite("alpha", &PDEProblem::alpha)
      .def_readwrite("sigma_bar", &PDEProblem::sigma_bar)
      .def_readwrite("max_steps", &PDEProblem::max_steps)
      .def_readwrite("radial_tolerance", &PDEProblem::radial_tolerance)
      .def_property(
          "epsilon", [](const PDEProblem& p) { return p.eps.epsilon; },
          [](PDEProblem& p, double e) { p.eps.epsilon = e; })
      .def("set_boundary", [](PDEProblem& p, double g) { p.boundary = BoundaryCondition::constant(g); },
           py::arg("value"), "Constant Dirichlet data on the whole boundary.")
      .def("validate", &PDEProblem::validate);

  m.def("default_sigma_bar", [](const PDEProblem& p) { return default_sigma_bar(p); });

  m.def("green_norm", [](int dim, double radius, double sigma) { return BallKernel(dim, {}, radius, sigma).green_norm(); },
        py::arg("dim"), py::arg("radius"), py::arg("sigma"));
  m.def("poisson_kernel",
        [](int dim, double radius, double sigma) { return BallKernel(dim, {}, radius, sigma).poisson_kernel(); },
        py::arg("dim"), py::arg("radius"), py::arg("sigma"));

  m.def("measurement_grid",
        [](const Domain& d, std::size_t nx, std::size_t ny, double margin) {
          const std::vector<Vec3> pts = measurement_grid(d, nx, ny, margin);
          Array out({pts.size(), std::size_t{2}});
          auto w = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < pts.size(); ++i) {
            w(i, 0) = pts[i].x;
            w(i, 1) = pts[i].y;
          }
          return out;
        },
        py::arg("domain"), py::arg("nx"), py::arg("ny"), py::arg("margin"));

  m.def(
      "estimate_solution",
      [](const PDEProblem& p, const Array& points, std::size_t walks, std::uint64_t seed, std::size_t threads) {
        const std::vector<Vec3> pts = to_points(points);
        std::vector<Estimate> est;
        {
          py::gil_scoped_release release;
          p.validate();
          est = estimate_solution(p, pts, walks, seed, threads);
        }
        Array mean(est.size()), se(est.size());
        for (std::size_t i = 0; i < est.size(); ++i) {
          mean.mutable_at(i) = est[i].mean;
          se.mutable_at(i) = est[i].standard_error();
        }
        return py::make_tuple(mean, se);
      },
      py::arg("problem"), py::arg("points"), py::arg("walks"), py::arg("seed") = 1, py::arg("threads") = 1,
      "Returns (mean, standard_error) arrays, one entry per point.");

  m.def(
      "loss_gradient",
      [](const PDEProblem& p, const Array& points, const Array& reference, std::size_t walks, std::uint64_t seed,
         std::size_t threads) {
        LossSpec loss;
        loss.points = to_points(points);
        loss.reference.assign(reference.data(), reference.data() + reference.size());
        LossGradient lg;
        {
          py::gil_scoped_release release;
          p.validate();
          lg = loss_gradient(p, loss, walks, seed, threads);
        }
        py::dict grads;
        grads["source"] = gradient_to_py(lg.gradients.source, p.source);
        grads["sigma"] = gradient_to_py(lg.gradients.sigma, p.sigma);
        grads["alpha"] = gradient_to_py(lg.gradients.alpha, p.alpha);
        return py::make_tuple(lg.loss, grads);
      },
      py::arg("problem"), py::arg("points"), py::arg("reference"), py::arg("walks"), py::arg("seed") = 1,
      py::arg("threads") = 1, "Returns (loss, {field: gradient}) for the mean-squared image loss.");

  m.def(
      "run_config",
      [](const std::filesystem::path& config, std::optional<std::uint64_t> seed, std::optional<std::size_t> threads,
         std::optional<std::filesystem::path> out) {
        RunOverrides o{seed, threads, out};
        std::ostringstream log;
        int code;
        {
          py::gil_scoped_release release;
          code = run(config, o, log);
        }
        return py::make_tuple(code, log.str());
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("threads") = py::none(), py::arg("out") = py::none(),
      "Runs a JSON config like the command line tool; returns (exit_code, log).");
}
