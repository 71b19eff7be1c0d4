#include "arnqs/run.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <ostream>
#include <utility>

#include <fmt/format.h>

#include "arnqs/appendix.hpp"
#include "arnqs/error.hpp"
#include "json_util.hpp"

namespace arnqs {

namespace {

using detail::get_field;
using detail::get_or;
using detail::reject_unknown;
using nlohmann::json;

constexpr std::array<std::pair<Subcommand, std::string_view>, 6> kSubcommands{{
    {Subcommand::PhaseDiagram, "phase-diagram"},
    {Subcommand::Scaling, "scaling"},
    {Subcommand::LevelStats, "level-stats"},
    {Subcommand::Correlations, "correlations"},
    {Subcommand::VmcSweep, "vmc-sweep"},
    {Subcommand::Check, "check"},
}};

constexpr int kExactCap = 22;
constexpr int kExactGroundCap = 16;

bool uses_arch_axis(Subcommand s) { return s == Subcommand::PhaseDiagram || s == Subcommand::VmcSweep; }
bool uses_estimator(Subcommand s) { return s == Subcommand::PhaseDiagram || s == Subcommand::Scaling; }

template <class T>
std::vector<T> get_list(const json& j, std::string_view key, std::string_view where)
{
    const std::string k(key);
    if (!j.contains(k)) throw ConfigError(fmt::format("{}.{}: missing", where, key));
    const auto& v = j.at(k);
    if (!v.is_array()) throw ConfigError(fmt::format("{}.{}: expected an array", where, key));
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!detail::holds<T>(v[i])) throw ConfigError(fmt::format("{}.{}[{}]: wrong type", where, key, i));
        out.push_back(v[i].get<T>());
    }
    return out;
}

const json& section(const json& j, std::string_view key, std::string_view where)
{
    const auto& v = j.at(std::string(key));
    if (!v.is_object()) throw ConfigError(fmt::format("{}.{}: expected an object", where, key));
    return v;
}

template <class Parse>
auto parse_enum(const json& j, std::string_view key, std::string_view where, Parse parse)
{
    const auto text = get_field<std::string>(j, key, where);
    try {
        return parse(text);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
    }
}

Estimator estimator_from_json(const json& j)
{
    reject_unknown(j, {"kind", "n_samples", "n_batches"}, "estimator");
    Estimator e;
    if (j.contains("kind")) e.kind = parse_enum(j, "kind", "estimator", parse_estimator_kind);
    e.n_samples = get_or<std::size_t>(j, "n_samples", e.n_samples, "estimator");
    e.n_batches = get_or<std::size_t>(j, "n_batches", e.n_batches, "estimator");
    return e;
}

VmcSweepSettings vmc_from_json(const json& j)
{
    constexpr std::string_view w = "vmc";
    reject_unknown(j,
                   {"hamiltonian", "eta", "n_samples", "eps_rel_target", "var_per_spin_target", "max_iters", "window",
                    "adam", "init", "e_ref"},
                   w);
    VmcSweepSettings s;
    if (!j.contains("hamiltonian")) throw ConfigError("vmc.hamiltonian: missing");
    const auto& h = section(j, "hamiltonian", w);
    reject_unknown(h, {"kind", "J", "h"}, "vmc.hamiltonian");
    s.hamiltonian.kind = parse_enum(h, "kind", "vmc.hamiltonian", parse_hamiltonian_kind);
    s.hamiltonian.J = get_or<double>(h, "J", s.hamiltonian.J, "vmc.hamiltonian");
    s.hamiltonian.h = get_or<double>(h, "h", s.hamiltonian.h, "vmc.hamiltonian");

    auto& v = s.vmc;
    v.eta = get_or<double>(j, "eta", v.eta, w);
    v.n_samples = get_or<std::size_t>(j, "n_samples", v.n_samples, w);
    v.eps_rel_target = get_or<double>(j, "eps_rel_target", v.eps_rel_target, w);
    v.var_per_spin_target = get_or<double>(j, "var_per_spin_target", v.var_per_spin_target, w);
    v.max_iters = get_or<std::size_t>(j, "max_iters", v.max_iters, w);
    v.window = get_or<std::size_t>(j, "window", v.window, w);
    if (j.contains("adam")) {
        const auto& a = section(j, "adam", w);
        reject_unknown(a, {"beta1", "beta2", "eps"}, "vmc.adam");
        v.adam.beta1 = get_or<double>(a, "beta1", v.adam.beta1, "vmc.adam");
        v.adam.beta2 = get_or<double>(a, "beta2", v.adam.beta2, "vmc.adam");
        v.adam.eps = get_or<double>(a, "eps", v.adam.eps, "vmc.adam");
    }
    if (j.contains("init")) {
        s.inits.clear();
        const auto names = get_list<std::string>(j, "init", w);
        for (std::size_t i = 0; i < names.size(); ++i) {
            try {
                s.inits.push_back(parse_init_scheme(names[i]));
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("vmc.init[{}]: {}", i, e.what()));
            }
        }
    }
    if (j.contains("e_ref")) s.e_ref = get_field<double>(j, "e_ref", w);
    return s;
}

void check_sigmas(const std::vector<double>& sigmas)
{
    if (sigmas.empty()) throw ConfigError("grid.sigma_axis: empty");
    for (std::size_t i = 0; i < sigmas.size(); ++i)
        if (!(sigmas[i] >= 0.0) || !std::isfinite(sigmas[i]))
            throw ConfigError(fmt::format("grid.sigma_axis[{}]: must be finite and >= 0", i));
}

std::filesystem::path write_text(const std::filesystem::path& dir, const std::string& name, const std::string& text)
{
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error(fmt::format("cannot open {} for writing", (dir / name).string()));
    os << text;
    if (!os) throw Error(fmt::format("write to {} failed", (dir / name).string()));
    return name;
}

struct Recorder {
    const std::filesystem::path& dir;
    RunOutcome& out;
    std::ostream& log;

    std::filesystem::path path(const std::string& name)
    {
        out.files.emplace_back(name);
        log << "writing " << (dir / name).string() << '\n';
        return dir / name;
    }
    void check(bool ok, std::string what)
    {
        if (!ok) out.failed_checks.push_back(std::move(what));
    }
    void line(const std::string& s)
    {
        out.summary += s;
        out.summary += '\n';
    }
};

void run_phase_diagram(const RunConfig& cfg, std::size_t workers, Recorder& rec)
{
    const auto res = run_entropy_grid(cfg.spec, cfg.grid(), cfg.estimator, workers);
    write_grid_csv(rec.path("grid.csv"), res);
    write_grid_replicas_csv(rec.path("grid_replicas.csv"), res);
    const bool exact = cfg.estimator.kind == EstimatorKind::Exact;
    for (std::size_t a = 0; a < cfg.arch_axis.size(); ++a) {
        const auto peak = peak_sigma_index(res, a);
        rec.line(peak ? fmt::format("arch {}: peak sigma {} with mean {:.6g}", cfg.arch_axis[a], cfg.sigma_axis[*peak],
                                    res.cell(a, *peak).stats.mean)
                      : fmt::format("arch {}: no kept cells", cfg.arch_axis[a]));
        for (std::size_t s = 0; s < cfg.sigma_axis.size(); ++s) {
            const auto& c = res.cell(a, s);
            rec.check(c.kept, fmt::format("cell (arch {}, sigma {}) dropped: {} of {} replicas failed", c.arch_value,
                                          c.sigma, c.failures.size(), cfg.n_init));
            if (exact && c.sigma == 0.0 && c.kept)
                rec.check(c.stats.mean == 0.0,
                          fmt::format("sigma = 0 cell at arch {} has entropy {}", c.arch_value, c.stats.mean));
            if (exact)
                for (double v : c.values)
                    rec.check(std::isnan(v) || (v >= 0.0 && v <= 1.0 + 1e-9),
                              fmt::format("normalized entropy {} outside [0, 1] at arch {}, sigma {}", v, c.arch_value,
                                          c.sigma));
        }
    }
}

void run_scaling(const RunConfig& cfg, std::size_t workers, Recorder& rec)
{
    const auto rows = run_scaling_study(cfg.spec, cfg.sigma_axis, cfg.sizes, cfg.n_init, cfg.estimator,
                                        cfg.base_seed, workers);
    write_scaling_csv(rec.path("scaling.csv"), rows);
    write_scaling_fits_csv(rec.path("scaling_fits.csv"), rows);
    for (const auto& row : rows) {
        if (row.fit)
            rec.line(fmt::format("sigma {}: a = {:.4g}, nu = {:.4g}, b = {:.4g}, c = {:.4g}", row.sigma, row.fit->a,
                                 row.fit->nu, row.fit->b, row.fit->c));
        else
            rec.line(fmt::format("sigma {}: fit skipped ({})", row.sigma, row.skip_reason));
        if (cfg.estimator.kind == EstimatorKind::Exact)
            for (const auto& p : row.points)
                rec.check(std::isnan(p.stats.mean) || (p.stats.mean >= 0.0 &&
                                                       p.stats.mean <= (p.sites / 2) * std::log(2.0) + 1e-9),
                          fmt::format("S_2 {} out of range at sigma {}, L {}", p.stats.mean, row.sigma, p.sites));
    }
}

void run_level(const RunConfig& cfg, std::size_t workers, Recorder& rec)
{
    const auto rows = run_level_stats(cfg.spec, cfg.sigma_axis, cfg.n_init, cfg.cutoff, cfg.base_seed, workers);
    write_level_stats_csv(rec.path("level_stats.csv"), rows);
    write_level_histograms_csv(rec.path("level_histograms.csv"), rows);
    for (const auto& row : rows) {
        rec.line(fmt::format("sigma {}: {} spectra, {} ratios, mean r_min {:.4f} (GUE 0.6027, Poisson 0.3863)",
                             row.sigma, row.spectra, row.r.size(), row.mean_r_min));
        rec.check(row.spectra > 0, fmt::format("sigma {}: no usable spectra", row.sigma));
        for (const auto* h : {&row.hist_r, &row.hist_r_min}) {
            if (h->in_range == 0) continue;
            double total = 0.0;
            for (std::size_t b = 0; b < h->density.size(); ++b) total += h->density[b] * (h->edges[b + 1] - h->edges[b]);
            rec.check(std::abs(total - 1.0) < 1e-9, fmt::format("sigma {}: histogram mass {}", row.sigma, total));
        }
    }
}

void run_corr(const RunConfig& cfg, std::size_t workers, Recorder& rec)
{
    const auto rows = run_correlations(cfg.spec, cfg.sigma_axis, cfg.n_init, cfg.n_samples, cfg.base_seed, workers);
    write_correlations_csv(rec.path("correlations.csv"), rows);
    for (const auto& row : rows) {
        const auto& c = row.curve;
        rec.line(c.distances.empty()
                     ? fmt::format("sigma {}: no distances", row.sigma)
                     : fmt::format("sigma {}: mean ln|C| {:.4g} at distance 1, {:.4g} at distance {}", row.sigma,
                                   c.mean_log_abs_corr.front(), c.mean_log_abs_corr.back(), c.distances.back()));
    }
}

void run_vmc(const RunConfig& cfg, std::size_t workers, Recorder& rec)
{
    Hamiltonian ham = cfg.vmc.hamiltonian;
    ham.sites = sites(cfg.spec);
    std::optional<VmcSweepResult> gaussian, xg;
    for (auto init : cfg.vmc.inits) {
        auto res = run_vmc_sweep(cfg.spec, ham, cfg.grid(), cfg.vmc.vmc, init, cfg.vmc.e_ref, workers);
        write_vmc_sweep_csv(rec.path(fmt::format("vmc_sweep_{}.csv", to_string(init))), res);
        rec.line(fmt::format("{}: reference energy {:.10g}", to_string(init), res.e_ref));
        for (const auto& c : res.cells)
            rec.line(fmt::format("  arch {} sigma {}: {}/{} converged, mean tau {:.6g}{}", c.arch_value, c.sigma,
                                 c.converged, c.tau.size(), c.tau_stats.mean, c.flagged ? " (flagged)" : ""));
        if (init == InitScheme::Gaussian) {
            rec.line(res.argmin_fit ? fmt::format("  argmin fit: sigma_min = {:.4g} d^-{:.4g} + {:.4g}",
                                                  res.argmin_fit->amplitude, res.argmin_fit->exponent,
                                                  res.argmin_fit->offset)
                                    : fmt::format("  argmin fit skipped ({})", res.argmin_fit_skip_reason));
            gaussian = std::move(res);
        } else {
            xg = std::move(res);
        }
    }
    if (gaussian && xg) write_best_in_class_csv(rec.path("best_in_class.csv"), best_in_class(*gaussian, *xg));
}

void run_check(const RunConfig& cfg, std::size_t workers, Recorder& rec)
{
    const auto report = appendix_b_report(cfg.base_seed, workers);
    rec.path("appendix_b.json");
    write_text(rec.dir, "appendix_b.json", report.to_json().dump(2) + "\n");
    for (const auto& c : report.checks) {
        rec.line(fmt::format("{:<40} {:<6} {:.6g} (requires {})", c.name, c.passed ? "PASS" : "FAIL", c.value,
                             c.requirement));
        rec.check(c.passed, fmt::format("{} = {:.6g}, requires {}", c.name, c.value, c.requirement));
    }
}

} // namespace

std::string_view to_string(Subcommand s) noexcept
{
    for (const auto& [k, name] : kSubcommands)
        if (k == s) return name;
    return "?";
}

Subcommand parse_subcommand(std::string_view name)
{
    for (const auto& [k, n] : kSubcommands)
        if (n == name) return k;
    throw ConfigError(fmt::format("unknown subcommand '{}'", name));
}

SweepGrid RunConfig::grid() const { return SweepGrid{arch_axis, sigma_axis, n_init, base_seed}; }

RunConfig config_from_json(const json& j)
{
    if (!j.is_object()) throw ConfigError("config: expected an object");
    RunConfig cfg;
    cfg.subcommand = parse_enum(j, "subcommand", "config", parse_subcommand);
    const Subcommand sc = cfg.subcommand;

    std::set<std::string> allowed{"subcommand", "output_dir", "base_seed"};
    if (sc == Subcommand::Check) {
        allowed.insert("check");
    } else {
        allowed.insert({"spec", "grid"});
        if (uses_estimator(sc)) allowed.insert("estimator");
        if (sc == Subcommand::Scaling) allowed.insert("sizes");
        if (sc == Subcommand::LevelStats) allowed.insert("cutoff");
        if (sc == Subcommand::Correlations) allowed.insert("n_samples");
        if (sc == Subcommand::VmcSweep) allowed.insert("vmc");
    }
    static const std::set<std::string> known{"subcommand", "output_dir", "base_seed", "check", "spec", "grid",
                                             "estimator", "sizes", "cutoff", "n_samples", "vmc"};
    for (const auto& item : j.items()) {
        if (allowed.contains(item.key())) continue;
        if (known.contains(item.key()))
            throw ConfigError(fmt::format("config.{}: not used by {}", item.key(), to_string(sc)));
        throw ConfigError(fmt::format("config.{}: unknown key", item.key()));
    }

    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir.string(), "config");
    cfg.base_seed = get_or<std::uint64_t>(j, "base_seed", cfg.base_seed, "config");

    if (sc == Subcommand::Check) {
        cfg.check = get_or<std::string>(j, "check", cfg.check, "config");
        validate(cfg);
        return cfg;
    }

    if (!j.contains("spec")) throw ConfigError("config.spec: missing");
    cfg.spec = spec_from_json(j.at("spec"), "spec");
    if (!j.contains("grid")) throw ConfigError("config.grid: missing");
    const auto& g = section(j, "grid", "config");
    if (uses_arch_axis(sc)) {
        reject_unknown(g, {"arch_axis", "sigma_axis", "n_init"}, "grid");
        cfg.arch_axis = get_list<int>(g, "arch_axis", "grid");
    } else {
        reject_unknown(g, {"sigma_axis", "n_init"}, "grid");
    }
    cfg.sigma_axis = get_list<double>(g, "sigma_axis", "grid");
    cfg.n_init = get_or<std::size_t>(g, "n_init", cfg.n_init, "grid");

    if (uses_estimator(sc) && j.contains("estimator")) cfg.estimator = estimator_from_json(section(j, "estimator", "config"));
    if (sc == Subcommand::Scaling) cfg.sizes = get_list<int>(j, "sizes", "config");
    if (sc == Subcommand::LevelStats) cfg.cutoff = get_or<double>(j, "cutoff", cfg.cutoff, "config");
    if (sc == Subcommand::Correlations) cfg.n_samples = get_or<std::size_t>(j, "n_samples", cfg.n_samples, "config");
    if (sc == Subcommand::VmcSweep) {
        if (!j.contains("vmc")) throw ConfigError("config.vmc: missing");
        cfg.vmc = vmc_from_json(section(j, "vmc", "config"));
        cfg.vmc.hamiltonian.sites = sites(cfg.spec);
    }
    validate(cfg);
    return cfg;
}

RunConfig parse_config(std::string_view text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config: malformed JSON ({})", e.what()));
    }
    return config_from_json(j);
}

json config_to_json(const RunConfig& cfg)
{
    const Subcommand sc = cfg.subcommand;
    json j{{"subcommand", to_string(sc)}, {"output_dir", cfg.output_dir.string()}, {"base_seed", cfg.base_seed}};
    if (sc == Subcommand::Check) {
        j["check"] = cfg.check;
        return j;
    }
    j["spec"] = spec_to_json(cfg.spec);
    json g{{"sigma_axis", cfg.sigma_axis}, {"n_init", cfg.n_init}};
    if (uses_arch_axis(sc)) g["arch_axis"] = cfg.arch_axis;
    j["grid"] = g;
    if (uses_estimator(sc))
        j["estimator"] = {{"kind", to_string(cfg.estimator.kind)},
                          {"n_samples", cfg.estimator.n_samples},
                          {"n_batches", cfg.estimator.n_batches}};
    if (sc == Subcommand::Scaling) j["sizes"] = cfg.sizes;
    if (sc == Subcommand::LevelStats) j["cutoff"] = cfg.cutoff;
    if (sc == Subcommand::Correlations) j["n_samples"] = cfg.n_samples;
    if (sc == Subcommand::VmcSweep) {
        const auto& v = cfg.vmc;
        json inits = json::array();
        for (auto i : v.inits) inits.push_back(to_string(i));
        j["vmc"] = {{"hamiltonian", {{"kind", to_string(v.hamiltonian.kind)}, {"J", v.hamiltonian.J}, {"h", v.hamiltonian.h}}},
                    {"eta", v.vmc.eta},
                    {"n_samples", v.vmc.n_samples},
                    {"eps_rel_target", v.vmc.eps_rel_target},
                    {"var_per_spin_target", v.vmc.var_per_spin_target},
                    {"max_iters", v.vmc.max_iters},
                    {"window", v.vmc.window},
                    {"adam", {{"beta1", v.vmc.adam.beta1}, {"beta2", v.vmc.adam.beta2}, {"eps", v.vmc.adam.eps}}},
                    {"init", inits}};
        if (v.e_ref) j["vmc"]["e_ref"] = *v.e_ref;
    }
    return j;
}

void validate(const RunConfig& cfg)
{
    const Subcommand sc = cfg.subcommand;
    if (cfg.output_dir.empty()) throw ConfigError("config.output_dir: empty");
    if (sc == Subcommand::Check) {
        if (cfg.check != "appendix-b")
            throw ConfigError(fmt::format("config.check: unknown check '{}' (expected appendix-b)", cfg.check));
        return;
    }
    try {
        validate(cfg.spec);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("spec: {}", e.what()));
    }
    check_sigmas(cfg.sigma_axis);
    if (cfg.n_init < 1) throw ConfigError("grid.n_init: must be >= 1");
    const int L = sites(cfg.spec);

    if (uses_arch_axis(sc)) {
        if (cfg.arch_axis.empty()) throw ConfigError("grid.arch_axis: empty");
        for (std::size_t i = 0; i < cfg.arch_axis.size(); ++i) {
            try {
                if (cfg.arch_axis[i] < 1) throw ConfigError("must be >= 1");
                validate(with_arch(cfg.spec, cfg.arch_axis[i]));
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("grid.arch_axis[{}]: {}", i, e.what()));
            }
        }
    }
    if (uses_estimator(sc)) {
        const auto& e = cfg.estimator;
        if (e.kind == EstimatorKind::Swap) {
            if (e.n_batches < 2) throw ConfigError("estimator.n_batches: must be >= 2");
            if (e.n_samples < e.n_batches) throw ConfigError("estimator.n_samples: must be >= n_batches");
            if (!is_normalizing(cfg.spec)) throw ConfigError("estimator.kind: swap needs a normalizing output g");
        }
        if (e.kind == EstimatorKind::Exact && sc == Subcommand::PhaseDiagram && L > kExactCap)
            throw ConfigError(fmt::format("estimator.kind: exact needs sites <= {}", kExactCap));
    }
    if (sc == Subcommand::PhaseDiagram && L < 2) throw ConfigError("spec.sites: need at least 2 sites");
    if (sc == Subcommand::Scaling) {
        if (cfg.sizes.empty()) throw ConfigError("config.sizes: empty");
        for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
            if (cfg.sizes[i] < 2) throw ConfigError(fmt::format("config.sizes[{}]: must be >= 2", i));
            if (i > 0 && cfg.sizes[i] <= cfg.sizes[i - 1])
                throw ConfigError(fmt::format("config.sizes[{}]: sizes must be strictly ascending", i));
        }
        if (cfg.estimator.kind == EstimatorKind::Exact && cfg.sizes.back() > kExactCap)
            throw ConfigError(fmt::format("config.sizes: exact estimator needs sizes <= {}", kExactCap));
    }
    if (sc == Subcommand::LevelStats) {
        if (L < 2 || L > kExactCap) throw ConfigError(fmt::format("spec.sites: level statistics need 2 <= sites <= {}", kExactCap));
        if (!(cfg.cutoff > 0.0 && cfg.cutoff < 1.0)) throw ConfigError("config.cutoff: must lie in (0, 1)");
    }
    if (sc == Subcommand::Correlations) {
        if (cfg.n_samples < 1000) throw ConfigError("config.n_samples: must be >= 1000");
        if (!is_normalizing(cfg.spec)) throw ConfigError("spec.g: correlations need a normalizing output g");
        if (L < 2) throw ConfigError("spec.sites: need at least 2 sites");
    }
    if (sc == Subcommand::VmcSweep) {
        const auto& v = cfg.vmc;
        try {
            validate(v.vmc);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("vmc: {}", e.what()));
        }
        try {
            validate(v.hamiltonian);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("vmc.hamiltonian: {}", e.what()));
        }
        if (v.hamiltonian.sites != L) throw ConfigError("vmc.hamiltonian: sites must match spec.sites");
        if (v.inits.empty()) throw ConfigError("vmc.init: empty");
        for (std::size_t i = 1; i < v.inits.size(); ++i)
            for (std::size_t k = 0; k < i; ++k)
                if (v.inits[i] == v.inits[k]) throw ConfigError(fmt::format("vmc.init[{}]: duplicate", i));
        if (v.e_ref && !std::isfinite(*v.e_ref)) throw ConfigError("vmc.e_ref: must be finite");
        if (!v.e_ref && L > kExactGroundCap)
            throw ConfigError(fmt::format("vmc.e_ref: required above {} sites", kExactGroundCap));
        if (!is_normalizing(cfg.spec)) throw ConfigError("spec.g: VMC sampling needs a normalizing output g");
    }
}

RunOutcome execute(const RunConfig& cfg, std::size_t workers, std::ostream& log)
{
    validate(cfg);
    const auto& dir = cfg.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

    RunOutcome out;
    Recorder rec{dir, out, log};
    rec.line(fmt::format("arnqs {} {}", library_version(), to_string(cfg.subcommand)));
    if (cfg.subcommand != Subcommand::Check)
        rec.line(fmt::format("spec {} (hash {:016x})", spec_to_json(cfg.spec).dump(), spec_hash(cfg.spec)));
    rec.line(fmt::format("base seed {}", cfg.base_seed));
    log << "running " << to_string(cfg.subcommand) << " with " << workers << " workers\n";

    switch (cfg.subcommand) {
    case Subcommand::PhaseDiagram: run_phase_diagram(cfg, workers, rec); break;
    case Subcommand::Scaling: run_scaling(cfg, workers, rec); break;
    case Subcommand::LevelStats: run_level(cfg, workers, rec); break;
    case Subcommand::Correlations: run_corr(cfg, workers, rec); break;
    case Subcommand::VmcSweep: run_vmc(cfg, workers, rec); break;
    case Subcommand::Check: run_check(cfg, workers, rec); break;
    }

    rec.line(out.failed_checks.empty() ? "internal checks: all passed"
                                       : fmt::format("internal checks: {} failed", out.failed_checks.size()));
    for (const auto& f : out.failed_checks) rec.line("  FAIL " + f);

    json files = json::array();
    for (const auto& f : out.files) files.push_back(f.string());
    files.push_back("summary.txt");
    const json manifest{
        {"config", config_to_json(cfg)},
        {"version", library_version()},
        {"layout_version", kOutputLayoutVersion},
        {"seeds", {{"base_seed", cfg.base_seed}, {"replica_seed", "base_seed xor replica_index"}}},
        {"files", files},
    };
    out.files.emplace_back("summary.txt");
    write_text(dir, "summary.txt", out.summary);
    out.files.emplace_back("manifest.json");
    write_text(dir, "manifest.json", manifest.dump(2) + "\n");
    return out;
}

std::string csv_schema_help()
{
    return "Output files (every real printed with 17 significant digits, nan for missing):\n"
           "  phase-diagram  grid.csv           arch_value,sigma,mean,std,stderr,n\n"
           "                 grid_replicas.csv  arch_value,sigma,replica,seed,value,error\n"
           "  scaling        scaling.csv        sigma,sites,mean,std,stderr,n,mean_rel_purity_error,excluded,reason\n"
           "                 scaling_fits.csv   sigma,a,nu,b,c,residual_norm,converged,skip_reason\n"
           "  level-stats    level_stats.csv    sigma,spectra,ratios,mean_r,median_r,mean_r_min,median_r_min,\n"
           "                                    replica_stderr_r_min,skipped_gaps,failures,goe_mean_r_min,\n"
           "                                    gue_mean_r_min,poisson_mean_r_min\n"
           "                 level_histograms.csv sigma,quantity,bin_lo,bin_hi,density,goe,gue,gse,poisson,semi_poisson\n"
           "  correlations   correlations.csv   sigma,distance,mean_log_abs_corr,stderr\n"
           "  vmc-sweep      vmc_sweep_<init>.csv init,arch_value,sigma,n,converged,mean_tau,std_tau,stderr_tau,\n"
           "                                    failures,flagged\n"
           "                 best_in_class.csv  arch_value,best_sigma,gaussian_mean_tau,gaussian_stderr,xg_mean_tau,\n"
           "                                    xg_stderr\n"
           "  check          appendix_b.json    {all_passed, checks: [{name, value, requirement, passed}]}\n"
           "Every run also writes manifest.json (config, seeds, version) and summary.txt.\n"
           "S_2 in grid.csv is normalized by floor(L/2) ln 2; scaling.csv holds raw S_2.\n";
}

} // namespace arnqs
