#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctwa/run.hpp"

namespace py = pybind11;
using namespace ctwa;

namespace {

py::dict density_dict(const DensityRecord& rec) {
    py::dict d;
    d["t"] = rec.t;
    d["rho"] = rec.rho;
    return d;
}

py::dict output_dict(const RunOutput& out) {
    py::dict d;
    d["method"] = to_string(out.config.method);
    d["t"] = out.t;
    d["rho"] = out.mean;
    d["se"] = out.se;
    d["avg_sign"] = out.avg_sign;
    d["ess"] = out.ess;
    d["warnings"] = out.warnings;
    d["mean_log_weight"] = out.mean_log_weight;
    d["wall_time"] = out.wall_time;
    if (out.heom) d["heom_depth"] = out.heom->depth;
    return d;
}

std::vector<ExponentialKernel> kernels_of(const SystemModel& m) {
    std::vector<ExponentialKernel> out;
    for (const auto& b : m.baths) out.push_back(decompose(b));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Truncated Wigner exciton transport with quantum-correction noise";
    m.attr("__version__") = software_version();

    auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    (void)config_error;

    py::enum_<BathFamily>(m, "BathFamily")
        .value("Drude", BathFamily::Drude)
        .value("Underdamped", BathFamily::Underdamped);
    py::enum_<Branch>(m, "Branch").value("Trig", Branch::Trig).value("Hyp", Branch::Hyp);
    py::enum_<Method>(m, "Method")
        .value("Twa", Method::Twa)
        .value("Ctwa", Method::Ctwa)
        .value("Exact", Method::Exact);

    py::class_<SpectralDensity>(m, "SpectralDensity")
        .def_static("underdamped", &SpectralDensity::underdamped, py::arg("a2p"), py::arg("gamma"), py::arg("omega"),
                    py::arg("temperature"), py::arg("branch") = Branch::Trig)
        .def_static("drude", &SpectralDensity::drude, py::arg("a1p"), py::arg("gamma"), py::arg("temperature"))
        .def_readwrite("family", &SpectralDensity::family)
        .def_readwrite("branch", &SpectralDensity::branch)
        .def_readwrite("coupling", &SpectralDensity::coupling)
        .def_readwrite("gamma", &SpectralDensity::gamma)
        .def_readwrite("omega", &SpectralDensity::omega)
        .def_readwrite("temperature", &SpectralDensity::temperature)
        .def("reorganization_energy", [](const SpectralDensity& b) { return reorganization_energy(b); });

    py::class_<SystemModel>(m, "SystemModel")
        .def(py::init([](const CMatrix& h, const std::vector<SpectralDensity>& baths) {
                 SystemModel s{h, baths};
                 s.validate();
                 return s;
             }),
             py::arg("h"), py::arg("baths"))
        .def_readwrite("h", &SystemModel::h)
        .def_readwrite("baths", &SystemModel::baths)
        .def_property_readonly("n_sites", &SystemModel::n_sites);

    m.def("donor_acceptor", &build_donor_acceptor, py::arg("delta"), py::arg("h12"), py::arg("bath"));
    m.def("preset_names", [] {
        std::vector<std::string> names;
        for (const auto& p : benchmark_presets()) names.push_back(p.name);
        return names;
    });
    m.def("preset_model", [](const std::string& name) { return find_preset(name).model(); }, py::arg("name"));

    py::class_<KernelTerm>(m, "KernelTerm")
        .def_readonly("rate", &KernelTerm::lambda)
        .def_readonly("alpha_f", &KernelTerm::alpha_f)
        .def_readonly("alpha_d", &KernelTerm::alpha_d)
        .def_readonly("matsubara", &KernelTerm::matsubara);
    py::class_<ExponentialKernel>(m, "ExponentialKernel")
        .def_readonly("terms", &ExponentialKernel::terms)
        .def("noise", [](const ExponentialKernel& k, double t) { return eval_noise(k, t); })
        .def("dissipation", [](const ExponentialKernel& k, double t) { return eval_dissipation(k, t); });
    m.def("decompose", &decompose, py::arg("bath"), py::arg("high_temperature") = true, py::arg("matsubara") = 0);

    py::class_<AuxBathMap>(m, "AuxBathMap")
        .def_readonly("A", &AuxBathMap::A)
        .def_readonly("v", &AuxBathMap::v)
        .def_readonly("eps", &AuxBathMap::eps)
        .def_readonly("b", &AuxBathMap::b)
        .def_readonly("b_tilde", &AuxBathMap::b_tilde)
        .def_readonly("sigma", &AuxBathMap::sigma)
        .def_readonly("kappa", &AuxBathMap::kappa);
    m.def("build_map", &build_map, py::arg("kernel"), py::arg("bath"));

    m.def("localized_wigner_norm", &localized_wigner_norm);
    m.def("f_rx", &f_rx, py::arg("r"), py::arg("x"));

    m.def("closed_system",
          [](const SystemModel& s, const CMatrix& rho0, const std::vector<double>& t) {
              return density_dict(closed_system(s, rho0, t));
          },
          py::arg("model"), py::arg("rho0"), py::arg("t"));
    m.def("pure_dephasing",
          [](const SystemModel& s, const CMatrix& rho0, const std::vector<double>& t) {
              return density_dict(pure_dephasing(s, kernels_of(s), rho0, t));
          },
          py::arg("model"), py::arg("rho0"), py::arg("t"));
    m.def("heom",
          [](const SystemModel& s, const CMatrix& rho0, const std::vector<double>& t, double dt, int depth) {
              const auto res = depth > 0 ? heom_propagate(s, kernels_of(s), depth, dt, t, rho0)
                                         : heom_converged(s, kernels_of(s), dt, t, rho0);
              py::dict d = density_dict(res.record);
              d["depth"] = res.depth;
              d["n_ados"] = res.n_ados;
              return d;
          },
          py::arg("model"), py::arg("rho0"), py::arg("t"), py::arg("dt") = 0.01, py::arg("depth") = 0,
          "Fixed depth if depth > 0, otherwise deepened until converged.");
    m.def("site_state", &site_state, py::arg("n_sites"), py::arg("site"));
    m.def("plus_state", &plus_state, py::arg("n_sites"));

    m.def("ensemble",
          [](Method method, const SystemModel& s, const std::vector<double>& t, long n_traj, double dt,
             std::uint64_t seed, int workers, int initial_site) {
              if (method == Method::Exact) throw ConfigError("use run() with method = exact");
              std::vector<AuxBathMap> maps;
              for (const auto& b : s.baths) maps.push_back(build_map(decompose(b), b));
              EnsembleOptions o;
              o.n_traj = n_traj;
              o.dt = dt;
              o.t_grid = t;
              o.seed = seed;
              o.workers = workers;
              o.initial_site = initial_site;
              EnsembleResult r;
              {
                  py::gil_scoped_release release;
                  r = run_ensemble(method, s, maps, o);
              }
              std::vector<CMatrix> mean;
              std::vector<Matrix> se;
              std::vector<double> sign;
              for (const auto& p : r.points) {
                  mean.push_back(p.mean);
                  se.push_back(p.se);
                  sign.push_back(p.avg_sign);
              }
              py::dict d;
              d["t"] = t;
              d["rho"] = mean;
              d["se"] = se;
              d["avg_sign"] = sign;
              return d;
          },
          py::arg("method"), py::arg("model"), py::arg("t"), py::arg("n_traj") = 1000, py::arg("dt") = 1e-3,
          py::arg("seed") = 0, py::arg("workers") = 1, py::arg("initial_site") = 0);

    m.def("run_config",
          [](const std::string& text) {
              const RunConfig cfg = parse_config(text);
              RunOutput out;
              {
                  py::gil_scoped_release release;
                  out = run(cfg);
              }
              py::dict d = output_dict(out);
              d["csv"] = format_csv(out);
              d["metadata"] = format_metadata(out);
              return d;
          },
          py::arg("text"), "Parses a configuration text and runs it; same format as the ctwa CLI.");
    m.def("config_digest", [](const std::string& text) { return config_digest(parse_config(text)); },
          py::arg("text"));
}
