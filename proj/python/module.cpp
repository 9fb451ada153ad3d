#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nsch/bench.hpp"
#include "nsch/stability.hpp"

namespace py = pybind11;
using namespace nsch;

namespace {

py::array_t<double> to_numpy(const Array2D& a) {
    py::array_t<double> out({a.ny, a.nx});
    std::copy(a.a.begin(), a.a.end(), out.mutable_data());
    return out;
}

Array2D from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D array");
    Array2D a(int(arr.shape(1)), int(arr.shape(0)));
    std::copy(arr.data(), arr.data() + arr.size(), a.a.begin());
    return a;
}

CouplingMode mode_from_string(const std::string& s) {
    if (s == "explicit") return CouplingMode::Explicit;
    if (s == "s1") return CouplingMode::S1;
    if (s == "s2") return CouplingMode::S2;
    if (s == "implicit") return CouplingMode::Implicit;
    throw std::invalid_argument("unknown coupling mode '" + s + "'");
}

py::dict traj_to_dict(const Trajectory& tr) {
    py::list rows;
    for (const auto& r : tr.rows) {
        py::dict d;
        d["t"] = r.t;
        d["tau"] = r.tau;
        d["iterations"] = r.iterations;
        d["centroid_x"] = r.centroid_x;
        d["centroid_y"] = r.centroid_y;
        d["ub_x"] = r.ub_x;
        d["ub_y"] = r.ub_y;
        d["dc_max"] = r.dc_max;
        d["mass"] = r.mass;
        rows.append(d);
    }
    py::dict out;
    out["rows"] = rows;
    out["t_end"] = tr.t_end;
    out["reached_stationary"] = tr.reached_stationary;
    return out;
}

}  // namespace

PYBIND11_MODULE(_nsch, m) {
    m.doc() = "diffuse-interface two-phase flow laboratory";

    py::class_<GridSpec>(m, "GridSpec")
        .def(py::init(&GridSpec::make), py::arg("nx"), py::arg("ny"), py::arg("x_min"),
             py::arg("x_max"), py::arg("y_min"), py::arg("y_max"))
        .def_static("unit", &GridSpec::unit, py::arg("n"))
        .def_readonly("nx", &GridSpec::nx)
        .def_readonly("ny", &GridSpec::ny)
        .def_readonly("h", &GridSpec::h)
        .def("area", &GridSpec::area);

    py::class_<FieldSet>(m, "FieldSet")
        .def(py::init<const GridSpec&>(), py::arg("grid"))
        .def_property(
            "c", [](const FieldSet& f) { return to_numpy(f.c); },
            [](FieldSet& f, py::array_t<double> v) { f.c = from_numpy(v); })
        .def_property(
            "u", [](const FieldSet& f) { return to_numpy(f.u); },
            [](FieldSet& f, py::array_t<double> v) { f.u = from_numpy(v); })
        .def_property(
            "v", [](const FieldSet& f) { return to_numpy(f.v); },
            [](FieldSet& f, py::array_t<double> v) { f.v = from_numpy(v); })
        .def_property_readonly("p", [](const FieldSet& f) { return to_numpy(f.p); })
        .def_property_readonly("mu", [](const FieldSet& f) { return to_numpy(f.mu); })
        .def("finite", &FieldSet::finite);

    m.def("cfl_law_prediction",
          [](double sigma, double gamma, double eps, double rho) {
              StabilityCase cs;
              cs.sigma = sigma;
              cs.gamma = gamma;
              cs.eps = eps;
              cs.rho = rho;
              return cfl_law_prediction(cs);
          },
          py::arg("sigma"), py::arg("gamma"), py::arg("eps"), py::arg("rho") = 1.0,
          "predicted maximum stable time step of the explicit coupling");

    m.def("perturbed_interface",
          [](int n, double eps, std::uint64_t seed) {
              return make_perturbed_interface(GridSpec::unit(n), eps, seed);
          },
          py::arg("n"), py::arg("eps"), py::arg("seed") = 20260101,
          "flat tanh interface with seeded cell-wise noise on the unit square");

    m.def("probe_single_step",
          [](double sigma, double gamma, double eps, double h, double rho, const std::string& mode,
             double tau, std::uint64_t seed) {
              StabilityCase cs;
              cs.sigma = sigma;
              cs.gamma = gamma;
              cs.eps = eps;
              cs.h = h;
              cs.rho = rho;
              cs.mode = mode_from_string(mode);
              cs.seed = seed;
              ProbeOutcome out = probe_single_step(cs, tau);
              py::dict d;
              d["tau"] = out.tau;
              d["converged"] = out.converged;
              d["iterations"] = out.iterations;
              d["solver_breakdown"] = out.solver_breakdown;
              return d;
          },
          py::arg("sigma"), py::arg("gamma"), py::arg("eps"), py::arg("h"), py::arg("rho") = 1.0,
          py::arg("mode") = "explicit", py::arg("tau") = 1e-4, py::arg("seed") = 20260101,
          "single flat-interface step at the given time step size");

    m.def("find_max_timestep",
          [](double sigma, double gamma, double eps, double h, double rho,
             const std::string& mode, std::uint64_t seed) {
              StabilityCase cs;
              cs.sigma = sigma;
              cs.gamma = gamma;
              cs.eps = eps;
              cs.h = h;
              cs.rho = rho;
              cs.mode = mode_from_string(mode);
              cs.seed = seed;
              StabilityRecord r = find_max_timestep(cs);
              py::dict d;
              d["tau_max"] = r.tau_max;
              d["capped"] = r.capped;
              d["probes"] = int(r.probes.size());
              d["error"] = r.error;
              return d;
          },
          py::arg("sigma"), py::arg("gamma"), py::arg("eps"), py::arg("h"), py::arg("rho") = 1.0,
          py::arg("mode") = "explicit", py::arg("seed") = 20260101,
          "escalating search for the largest stable time step");

    m.def("fit_exponents",
          [](const std::vector<std::map<std::string, double>>& cases) {
              std::vector<StabilityRecord> recs;
              for (const auto& c : cases) {
                  StabilityRecord r;
                  r.cs.sigma = c.at("sigma");
                  r.cs.gamma = c.at("gamma");
                  r.cs.eps = c.at("eps");
                  r.cs.rho = c.at("rho");
                  r.h_actual = c.at("h");
                  r.cs.h = r.h_actual;
                  r.tau_max = c.at("tau_max");
                  recs.push_back(r);
              }
              FitResult fit = fit_exponents(recs);
              py::dict d;
              d["prefactor"] = fit.alpha[0];
              d["alpha_h"] = fit.alpha[1];
              d["alpha_eps"] = fit.alpha[2];
              d["alpha_sigma"] = fit.alpha[3];
              d["alpha_gamma"] = fit.alpha[4];
              d["alpha_rho"] = fit.alpha[5];
              d["residual_rms"] = fit.residual_rms;
              d["n_cases"] = fit.n_cases;
              return d;
          },
          py::arg("cases"),
          "log-space power-law fit; each case is a dict with sigma, gamma, eps, rho, h, tau_max");

    m.def("roc_table", &roc_table, py::arg("positions"), py::arg("taus"),
          py::arg("reference_position"), "observed convergence rates against a reference value");

    m.def("run_spinodal",
          [](int n, double eps, double mobility, double tau, int steps, std::uint64_t seed) {
              return run_spinodal(n, eps, mobility, tau, steps, seed);
          },
          py::arg("n") = 32, py::arg("eps") = 0.05, py::arg("mobility") = 1.0,
          py::arg("tau") = 1e-4, py::arg("steps") = 50, py::arg("seed") = 20260101,
          "Cahn-Hilliard-only spinodal run; returns the Ginzburg-Landau energy trace");

    m.def("run_rising_bubble",
          [](double tau, double theta, const std::string& mode, double t_end) {
              BubbleConfig bc;
              bc.scheme.tau = tau;
              bc.scheme.theta = theta;
              bc.scheme.coupling = mode_from_string(mode);
              bc.t_end = t_end;
              BenchmarkResult res = run_rising_bubble(bc);
              py::dict d;
              d["trajectory"] = traj_to_dict(res.traj);
              d["final_centroid_x"] = res.final_centroid_x;
              d["final_centroid_y"] = res.final_centroid_y;
              d["total_iterations"] = res.total_iterations;
              d["converged"] = res.converged;
              d["mass_drift"] = res.mass_drift;
              return d;
          },
          py::arg("tau") = 0.01, py::arg("theta") = 0.5, py::arg("mode") = "explicit",
          py::arg("t_end") = 0.2, "desk-profile rising-bubble benchmark");

    py::register_exception<SolverFailure>(m, "SolverFailure");
    py::register_exception<NoConvergence>(m, "NoConvergence");
    py::register_exception<RankDeficient>(m, "RankDeficient");
    py::register_exception<ProbeNeverConverged>(m, "ProbeNeverConverged");
}
