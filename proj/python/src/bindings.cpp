#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "arnqs/appendix.hpp"
#include "arnqs/ensemble.hpp"
#include "arnqs/error.hpp"
#include "arnqs/model.hpp"
#include "arnqs/observables.hpp"
#include "arnqs/run.hpp"
#include "arnqs/sampling.hpp"
#include "arnqs/vmc.hpp"

namespace py = pybind11;
using namespace arnqs;

namespace {

ModelSpec spec_of(const std::string& text) { return spec_from_json(nlohmann::json::parse(text)); }

py::dict stats_dict(const Stats& s)
{
    py::dict d;
    d["mean"] = s.mean;
    d["std"] = s.std;
    d["stderr"] = s.std_error;
    d["n"] = s.n;
    return d;
}

py::dict report_dict(const EntanglementReport& r)
{
    py::dict d;
    d["s2"] = r.s2;
    d["s2_stderr"] = r.s2_stderr;
    d["purity"] = r.purity;
    d["purity_stderr"] = r.purity_stderr;
    d["purity_imag"] = r.purity_imag;
    return d;
}

Hamiltonian hamiltonian(const std::string& kind, double J, double h, int sites)
{
    Hamiltonian ham{parse_hamiltonian_kind(kind), J, h, sites};
    validate(ham);
    return ham;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Random autoregressive neural quantum states";
    m.attr("__version__") = std::string(library_version());

    // translators run newest first, so the derived type goes last
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<ParameterSet>(m, "ParameterSet")
        .def_property_readonly("size", &ParameterSet::total_count)
        .def_property_readonly("names",
                               [](const ParameterSet& p) {
                                   std::vector<std::string> names;
                                   for (const auto& t : p.tensors()) names.push_back(t.name);
                                   return names;
                               })
        .def("values",
             [](const ParameterSet& p) {
                 const auto v = p.values();
                 return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
             })
        .def("set_values",
             [](ParameterSet& p, const Eigen::VectorXd& v) {
                 if (static_cast<std::size_t>(v.size()) != p.total_count())
                     throw ConfigError("set_values: length does not match the parameter count");
                 std::copy(v.data(), v.data() + v.size(), p.values().begin());
             })
        .def("__eq__", [](const ParameterSet& a, const ParameterSet& b) { return a == b; });

    m.def("canonical_spec", [](const std::string& text) { return spec_to_json(spec_of(text)).dump(); },
          "Validated spec JSON with every default filled in.");
    m.def("spec_hash", [](const std::string& text) { return spec_hash(spec_of(text)); });

    m.def("init_gaussian",
          [](const std::string& spec, double sigma, std::uint64_t seed) {
              RngStream rng(seed);
              return init_gaussian(spec_of(spec), sigma, rng);
          },
          py::arg("spec"), py::arg("sigma"), py::arg("seed"));
    m.def("init_xavier_glorot",
          [](const std::string& spec, std::uint64_t seed) {
              RngStream rng(seed);
              return init_xavier_glorot(spec_of(spec), rng);
          },
          py::arg("spec"), py::arg("seed"));

    m.def("state_vector",
          [](const std::string& spec, const ParameterSet& p) { return exact_state_vector(spec_of(spec), p).amplitudes; },
          "All 2^L amplitudes; configuration index has site 0 as its most significant bit.");
    m.def("conditionals",
          [](const std::string& spec, const ParameterSet& p, const std::vector<std::uint8_t>& spins) {
              const auto out = site_outputs(spec_of(spec), p, spins);
              return py::make_tuple(out.conditionals, out.phases);
          });
    m.def("sample",
          [](const std::string& spec, const ParameterSet& p, std::size_t n, std::uint64_t seed) {
              RngStream rng(seed);
              const auto batch = sample(spec_of(spec), p, n, rng);
              return py::make_tuple(Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>(batch.configs),
                                    batch.log_modulus_sq, batch.phases);
          },
          py::arg("spec"), py::arg("params"), py::arg("n_samples"), py::arg("seed"));

    m.def("renyi2_exact",
          [](const std::string& text, const ParameterSet& p) {
              const auto spec = spec_of(text);
              const auto sv = exact_state_vector(spec, p);
              return renyi2_exact(reduced_density_matrix(sv.amplitudes, Partition::half(sites(spec))));
          },
          "Half-chain S_2 by exact enumeration.");
    m.def("renyi2_swap",
          [](const std::string& text, const ParameterSet& p, std::size_t n, std::uint64_t seed, std::size_t batches) {
              const auto spec = spec_of(text);
              RngStream rng(seed);
              return report_dict(renyi2_swap(spec, p, Partition::half(sites(spec)), n, rng, batches));
          },
          py::arg("spec"), py::arg("params"), py::arg("n_samples"), py::arg("seed"), py::arg("n_batches") = 50);
    m.def("entanglement_spectrum",
          [](const std::string& text, const ParameterSet& p, double cutoff) {
              const auto spec = spec_of(text);
              const auto sv = exact_state_vector(spec, p);
              return entanglement_spectrum(reduced_density_matrix(sv.amplitudes, Partition::half(sites(spec))), cutoff);
          },
          py::arg("spec"), py::arg("params"), py::arg("cutoff") = 1e-10);
    m.def("gap_ratios", [](const std::vector<double>& spectrum) {
        const auto g = gap_ratios(spectrum);
        return py::make_tuple(g.r, g.r_min, g.skipped);
    });
    m.def("reference_mean_r_min", [](const std::string& kind) {
        const auto same = [](char a, char b) { return std::tolower(a) == std::tolower(b); };
        for (auto k : {RmtKind::Goe, RmtKind::Gue, RmtKind::Gse, RmtKind::Poisson, RmtKind::SemiPoisson})
            if (std::ranges::equal(to_string(k), kind, same)) return reference_mean_r_min(k);
        throw ConfigError("unknown ensemble " + kind + " (expected GOE, GUE, GSE, Poisson or semi-Poisson)");
    });

    m.def("entropy_grid",
          [](const std::string& spec, const std::vector<int>& arch_axis, const std::vector<double>& sigma_axis,
             std::size_t n_init, std::uint64_t seed, const std::string& estimator, std::size_t n_samples,
             std::size_t workers) {
              const Estimator est{parse_estimator_kind(estimator), n_samples, 50};
              const auto res = run_entropy_grid(spec_of(spec), SweepGrid{arch_axis, sigma_axis, n_init, seed}, est,
                                                workers);
              py::list cells;
              for (const auto& c : res.cells) {
                  py::dict d = stats_dict(c.stats);
                  d["arch_value"] = c.arch_value;
                  d["sigma"] = c.sigma;
                  d["values"] = c.values;
                  d["kept"] = c.kept;
                  cells.append(d);
              }
              return cells;
          },
          py::arg("spec"), py::arg("arch_axis"), py::arg("sigma_axis"), py::arg("n_init"), py::arg("seed"),
          py::arg("estimator") = "exact", py::arg("n_samples") = 100000, py::arg("workers") = 1,
          "Normalized half-chain S_2 statistics per (arch, sigma) cell, arch-major.");

    m.def("exact_ground_energy",
          [](const std::string& kind, double J, double h, int sites) {
              return exact_ground_energy(hamiltonian(kind, J, h, sites));
          },
          py::arg("kind"), py::arg("J") = 1.0, py::arg("h") = 1.0, py::arg("sites"));
    m.def("exact_energy",
          [](const std::string& spec, const ParameterSet& p, const std::string& kind, double J, double h) {
              const auto s = spec_of(spec);
              return exact_energy(s, p, hamiltonian(kind, J, h, sites(s)));
          },
          py::arg("spec"), py::arg("params"), py::arg("kind"), py::arg("J") = 1.0, py::arg("h") = 1.0);
    m.def("exact_energy_gradient",
          [](const std::string& spec, const ParameterSet& p, const std::string& kind, double J, double h) {
              const auto s = spec_of(spec);
              const auto eg = exact_energy_and_gradient(s, p, hamiltonian(kind, J, h, sites(s)));
              return py::make_tuple(eg.energy, eg.var_per_spin, eg.grad);
          },
          py::arg("spec"), py::arg("params"), py::arg("kind"), py::arg("J") = 1.0, py::arg("h") = 1.0);
    m.def("vmc_optimize",
          [](const std::string& spec, const ParameterSet& p, const std::string& kind, double J, double h, double eta,
             std::size_t n_samples, std::size_t max_iters, std::uint64_t seed, std::optional<double> e_ref) {
              const auto s = spec_of(spec);
              const auto ham = hamiltonian(kind, J, h, sites(s));
              VmcConfig cfg;
              cfg.eta = eta;
              cfg.n_samples = n_samples;
              cfg.max_iters = max_iters;
              cfg.seed = seed;
              const auto res = vmc_optimize(s, p, ham, cfg, e_ref ? *e_ref : exact_ground_energy(ham));
              py::dict d;
              d["tau_conv"] = res.tau_conv;
              d["energy"] = res.energy_trace;
              d["var_per_spin"] = res.variance_trace;
              d["eps_rel"] = res.eps_rel_trace;
              d["params"] = res.final_params;
              return d;
          },
          py::arg("spec"), py::arg("params"), py::arg("kind"), py::arg("J") = 1.0, py::arg("h") = 1.0,
          py::arg("eta") = 5e-3, py::arg("n_samples") = 500, py::arg("max_iters") = 5000, py::arg("seed") = 0,
          py::arg("e_ref") = py::none());

    m.def("logit_normal_pdf", [](double y, double mu, double sigma) { return logit_normal_pdf(y, {mu, sigma}); },
          py::arg("y"), py::arg("mu") = 0.0, py::arg("sigma") = 1.0);
    m.def("logit_normal_cdf", [](double y, double mu, double sigma) { return logit_normal_cdf(y, {mu, sigma}); },
          py::arg("y"), py::arg("mu") = 0.0, py::arg("sigma") = 1.0);
    m.def("mass_outside_eps", &mass_outside_eps, py::arg("sigma"), py::arg("eps"));
    m.def("appendix_b_report",
          [](std::uint64_t seed, std::size_t workers) { return appendix_b_report(seed, workers).to_json().dump(); },
          py::arg("seed") = 0, py::arg("workers") = 1);

    m.def("parse_config", [](const std::string& text) { return config_to_json(parse_config(text)).dump(); },
          "Validates a run configuration and returns its canonical JSON.");
    m.def("execute",
          [](const std::string& text, std::size_t workers) {
              const auto cfg = parse_config(text);
              std::ostringstream log;
              const auto out = execute(cfg, workers, log);
              std::vector<std::string> files;
              for (const auto& f : out.files) files.push_back(f.string());
              return py::make_tuple(out.exit_code(), out.summary, files);
          },
          py::arg("config"), py::arg("workers") = 1);
}
