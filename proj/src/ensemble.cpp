#include "arnqs/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "arnqs/parallel.hpp"

#ifndef ARNQS_VERSION
#define ARNQS_VERSION "0.0.0"
#endif

namespace arnqs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t required_successes(std::size_t n_init)
{
    return static_cast<std::size_t>(std::ceil(kMinReplicaSuccess * static_cast<double>(n_init) - 1e-9));
}

std::vector<double> successes(const std::vector<double>& values)
{
    std::vector<double> out;
    for (double v : values)
        if (!std::isnan(v)) out.push_back(v);
    return out;
}

double median(std::vector<double> v)
{
    if (v.empty()) return kNaN;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2) return upper;
    return 0.5 * (upper + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

void check_axis(const std::vector<double>& sigmas)
{
    if (sigmas.empty()) throw ConfigError("sigma axis is empty");
    for (double s : sigmas)
        if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError(fmt::format("sigma {} must be finite and >= 0", s));
}

std::ofstream open_csv(const std::filesystem::path& path, std::string_view header)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    os << header << '\n';
    return os;
}

std::string csv_text(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

} // namespace

std::string format_real(double x)
{
    if (std::isnan(x)) return "nan";
    return fmt::format("{:.17g}", x);
}

std::string_view library_version() noexcept { return ARNQS_VERSION; }

void validate(const SweepGrid& grid)
{
    if (grid.arch_axis.empty()) throw ConfigError("grid.arch_axis is empty");
    for (int a : grid.arch_axis)
        if (a < 1) throw ConfigError(fmt::format("grid.arch_axis value {} must be >= 1", a));
    check_axis(grid.sigma_axis);
    if (grid.n_init < 1) throw ConfigError("grid.n_init must be >= 1");
}

std::string_view to_string(EstimatorKind kind) noexcept { return kind == EstimatorKind::Swap ? "swap" : "exact"; }

EstimatorKind parse_estimator_kind(std::string_view name)
{
    if (name == "swap") return EstimatorKind::Swap;
    if (name == "exact") return EstimatorKind::Exact;
    throw ConfigError(fmt::format("unknown estimator '{}' (expected swap or exact)", name));
}

std::string_view to_string(InitScheme scheme) noexcept
{
    return scheme == InitScheme::Gaussian ? "gaussian" : "xavier_glorot";
}

InitScheme parse_init_scheme(std::string_view name)
{
    if (name == "gaussian") return InitScheme::Gaussian;
    if (name == "xavier_glorot") return InitScheme::XavierGlorot;
    throw ConfigError(fmt::format("unknown init scheme '{}' (expected gaussian or xavier_glorot)", name));
}

Stats aggregate(std::span<const double> values)
{
    Stats s;
    s.n = values.size();
    if (values.empty()) {
        s.mean = s.std = s.std_error = kNaN;
        return s;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n));
    s.std_error = s.std / std::sqrt(static_cast<double>(s.n));
    return s;
}

const GridCell& GridResult::cell(std::size_t arch_index, std::size_t sigma_index) const
{
    if (arch_index >= grid.arch_axis.size() || sigma_index >= grid.sigma_axis.size())
        throw Error("grid cell index out of range");
    return cells[arch_index * grid.sigma_axis.size() + sigma_index];
}

EntanglementReport replica_entropy(const ModelSpec& spec, const ParameterSet& params, const Estimator& est,
                                   RngStream& rng)
{
    const int L = sites(spec);
    const auto part = Partition::half(L);
    if (est.kind == EstimatorKind::Swap) return renyi2_swap(spec, params, part, est.n_samples, rng, est.n_batches);
    const auto state = exact_state_vector(spec, params);
    EntanglementReport rep;
    rep.method = EntropyMethod::Exact;
    const auto rho = reduced_density_matrix(state.amplitudes, part);
    rep.purity = rho.cwiseAbs2().sum();
    rep.s2 = renyi2_exact(rho);
    return rep;
}

GridResult run_entropy_grid(const ModelSpec& template_spec, const SweepGrid& grid, const Estimator& est,
                            std::size_t workers)
{
    validate(template_spec);
    validate(grid);
    const int L = sites(template_spec);
    const double max_entropy = static_cast<double>(L / 2) * std::log(2.0);
    const std::size_t n_arch = grid.arch_axis.size(), n_sigma = grid.sigma_axis.size();
    const std::size_t per_cell = grid.n_init;

    struct Outcome {
        double value = kNaN;
        std::string error;
    };
    const auto outcomes = parallel_map(n_arch * n_sigma * per_cell, workers, [&](std::size_t task) {
        const std::size_t cell = task / per_cell, r = task % per_cell;
        const auto spec = with_arch(template_spec, grid.arch_axis[cell / n_sigma]);
        Outcome out;
        try {
            RngStream rng(replica_seed(grid.base_seed, r));
            const auto params = init_gaussian(spec, grid.sigma_axis[cell % n_sigma], rng);
            const auto rep = replica_entropy(spec, params, est, rng);
            out.value = max_entropy > 0.0 ? rep.s2 / max_entropy : 0.0;
        } catch (const Error& e) {
            out.error = e.what();
        }
        return out;
    });

    GridResult res{template_spec, grid, est, {}};
    res.cells.resize(n_arch * n_sigma);
    for (std::size_t c = 0; c < res.cells.size(); ++c) {
        auto& cell = res.cells[c];
        cell.arch_value = grid.arch_axis[c / n_sigma];
        cell.sigma = grid.sigma_axis[c % n_sigma];
        for (std::size_t r = 0; r < per_cell; ++r) {
            const auto& o = outcomes[c * per_cell + r];
            cell.values.push_back(o.value);
            if (!o.error.empty()) cell.failures.push_back({r, o.error});
        }
        const auto ok = successes(cell.values);
        cell.stats = aggregate(ok);
        cell.kept = ok.size() >= required_successes(per_cell);
    }
    return res;
}

std::optional<std::size_t> peak_sigma_index(const GridResult& result, std::size_t arch_index)
{
    std::optional<std::size_t> best;
    for (std::size_t s = 0; s < result.grid.sigma_axis.size(); ++s) {
        const auto& c = result.cell(arch_index, s);
        if (!c.kept) continue;
        if (!best || c.stats.mean > result.cell(arch_index, *best).stats.mean) best = s;
    }
    return best;
}

std::vector<ScalingRow> run_scaling_study(const ModelSpec& template_spec, const std::vector<double>& sigmas,
                                          const std::vector<int>& sizes, std::size_t n_init,
                                          const Estimator& est, std::uint64_t base_seed, std::size_t workers)
{
    validate(template_spec);
    check_axis(sigmas);
    if (sizes.empty()) throw ConfigError("scaling study needs at least one system size");
    if (!std::is_sorted(sizes.begin(), sizes.end()) ||
        std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end() || sizes.front() < 2)
        throw ConfigError("system sizes must be strictly ascending and >= 2");
    if (n_init < 1) throw ConfigError("n_init must be >= 1");
    for (int L : sizes) validate(with_sites(template_spec, L));

    struct Outcome {
        std::vector<double> s2, rel_err;
        std::vector<std::string> error;
    };
    const bool shared = is_rnn(template_spec);
    const auto outcomes = parallel_map(sigmas.size() * n_init, workers, [&](std::size_t task) {
        const double sigma = sigmas[task / n_init];
        const std::size_t r = task % n_init;
        Outcome out;
        RngStream rng(replica_seed(base_seed, r));
        ParameterSet params;
        if (shared) params = init_gaussian(with_sites(template_spec, sizes.front()), sigma, rng);
        for (int L : sizes) {
            const auto spec = with_sites(template_spec, L);
            double s2 = kNaN, rel = kNaN;
            std::string err;
            try {
                if (!shared) {
                    rng = RngStream(replica_seed(base_seed, r));
                    params = init_gaussian(spec, sigma, rng);
                }
                const auto rep = replica_entropy(spec, params, est, rng);
                s2 = rep.s2;
                rel = rep.purity > 0.0 ? rep.purity_stderr / rep.purity : 0.0;
            } catch (const Error& e) {
                err = e.what();
            }
            out.s2.push_back(s2);
            out.rel_err.push_back(rel);
            out.error.push_back(std::move(err));
        }
        return out;
    });

    std::vector<ScalingRow> rows;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        ScalingRow row;
        row.sigma = sigmas[si];
        std::vector<double> xs, ys, es;
        for (std::size_t li = 0; li < sizes.size(); ++li) {
            ScalingPoint pt;
            pt.sites = sizes[li];
            std::vector<double> rels;
            for (std::size_t r = 0; r < n_init; ++r) {
                const auto& o = outcomes[si * n_init + r];
                pt.values.push_back(o.s2[li]);
                if (!std::isnan(o.s2[li])) rels.push_back(o.rel_err[li]);
            }
            const auto ok = successes(pt.values);
            pt.stats = aggregate(ok);
            pt.mean_relative_purity_error =
                rels.empty() ? kNaN : std::accumulate(rels.begin(), rels.end(), 0.0) / static_cast<double>(rels.size());
            if (ok.size() < required_successes(n_init)) {
                pt.excluded = true;
                pt.reason = fmt::format("{} of {} replicas failed", n_init - ok.size(), n_init);
            } else if (pt.mean_relative_purity_error > kMaxRelativePurityError) {
                pt.excluded = true;
                pt.reason = "sampling error dominates";
            } else {
                xs.push_back(pt.sites);
                ys.push_back(pt.stats.mean);
                es.push_back(std::max(pt.stats.std_error, 1e-9));
            }
            row.points.push_back(std::move(pt));
        }
        if (xs.size() < 5) {
            row.skip_reason = fmt::format("only {} usable points (need 5)", xs.size());
        } else {
            try {
                row.fit = fit_entropy_scaling(xs, ys, es);
            } catch (const Error& e) {
                row.skip_reason = e.what();
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<LevelStatsRow> run_level_stats(const ModelSpec& template_spec, const std::vector<double>& sigmas,
                                           std::size_t n_init, double cutoff, std::uint64_t base_seed,
                                           std::size_t workers)
{
    validate(template_spec);
    check_axis(sigmas);
    if (n_init < 1) throw ConfigError("n_init must be >= 1");
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw ConfigError("spectrum cutoff must lie in (0, 1)");

    struct Outcome {
        GapRatios ratios;
        std::string error;
    };
    const auto outcomes = parallel_map(sigmas.size() * n_init, workers, [&](std::size_t task) {
        Outcome out;
        try {
            RngStream rng(replica_seed(base_seed, task % n_init));
            const auto params = init_gaussian(template_spec, sigmas[task / n_init], rng);
            const auto state = exact_state_vector(template_spec, params);
            const auto rho = reduced_density_matrix(state.amplitudes, Partition::half(sites(template_spec)));
            out.ratios = gap_ratios(entanglement_spectrum(rho, cutoff));
        } catch (const Error& e) {
            out.error = e.what();
        }
        return out;
    });

    std::vector<LevelStatsRow> rows;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        LevelStatsRow row;
        row.sigma = sigmas[si];
        std::vector<double> replica_means;
        for (std::size_t r = 0; r < n_init; ++r) {
            const auto& o = outcomes[si * n_init + r];
            if (!o.error.empty()) {
                row.failures.push_back({r, o.error});
                continue;
            }
            ++row.spectra;
            row.skipped_gaps += o.ratios.skipped;
            row.r.insert(row.r.end(), o.ratios.r.begin(), o.ratios.r.end());
            row.r_min.insert(row.r_min.end(), o.ratios.r_min.begin(), o.ratios.r_min.end());
            if (!o.ratios.r_min.empty())
                replica_means.push_back(std::accumulate(o.ratios.r_min.begin(), o.ratios.r_min.end(), 0.0) /
                                        static_cast<double>(o.ratios.r_min.size()));
        }
        row.mean_r = aggregate(row.r).mean;
        row.median_r = median(row.r);
        row.mean_r_min = aggregate(row.r_min).mean;
        row.median_r_min = median(row.r_min);
        row.replica_mean_r_min = aggregate(replica_means);
        row.hist_r = density_histogram(row.r, 0.0, 6.0, 60);
        row.hist_r_min = density_histogram(row.r_min, 0.0, 1.0, 40);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CorrelationRow> run_correlations(const ModelSpec& template_spec, const std::vector<double>& sigmas,
                                             std::size_t n_init, std::size_t n_samples, std::uint64_t base_seed,
                                             std::size_t workers)
{
    validate(template_spec);
    check_axis(sigmas);
    if (n_init < 1) throw ConfigError("n_init must be >= 1");
    if (n_samples < 1000) throw ConfigError("connected correlations need at least 1000 samples");
    if (sites(template_spec) < 2) throw ConfigError("correlations need at least 2 sites");
    const auto mats = parallel_map(sigmas.size() * n_init, workers, [&](std::size_t task) {
        RngStream rng(replica_seed(base_seed, task % n_init));
        const auto params = init_gaussian(template_spec, sigmas[task / n_init], rng);
        return connected_correlation_matrix(sample(template_spec, params, n_samples, rng));
    });
    std::vector<CorrelationRow> rows;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        const std::vector<CorrelationMatrix> group(mats.begin() + static_cast<std::ptrdiff_t>(si * n_init),
                                                   mats.begin() + static_cast<std::ptrdiff_t>((si + 1) * n_init));
        rows.push_back({sigmas[si], correlation_curve(group)});
    }
    return rows;
}

VmcSweepResult run_vmc_sweep(const ModelSpec& template_spec, const Hamiltonian& ham, const SweepGrid& grid,
                             const VmcConfig& cfg, InitScheme init, std::optional<double> e_ref,
                             std::size_t workers)
{
    validate(template_spec);
    validate(grid);
    validate(cfg);
    validate(ham);
    if (sites(template_spec) != ham.sites) throw ConfigError("model and Hamiltonian disagree on the number of sites");

    VmcSweepResult res;
    res.init = init;
    res.arch_axis = grid.arch_axis;
    res.sigma_axis = init == InitScheme::Gaussian ? grid.sigma_axis : std::vector<double>{0.0};
    if (e_ref) {
        res.e_ref = *e_ref;
    } else {
        try {
            res.e_ref = exact_ground_energy(ham);
        } catch (const Error& e) {
            throw ConfigError(fmt::format("{}; set a reference energy in the config", e.what()));
        }
    }
    const std::size_t n_sigma = res.sigma_axis.size(), n = grid.n_init;

    struct Outcome {
        std::optional<std::size_t> tau;
        std::string error;
    };
    const auto outcomes = parallel_map(grid.arch_axis.size() * n_sigma * n, workers, [&](std::size_t task) {
        const std::size_t cell = task / n, r = task % n;
        const auto spec = with_arch(template_spec, grid.arch_axis[cell / n_sigma]);
        Outcome out;
        try {
            RngStream rng(replica_seed(grid.base_seed, r));
            const auto params = init == InitScheme::Gaussian ? init_gaussian(spec, res.sigma_axis[cell % n_sigma], rng)
                                                             : init_xavier_glorot(spec, rng);
            VmcConfig run = cfg;
            run.seed = rng.next_u64();
            run.trace_path.reset();
            out.tau = vmc_optimize(spec, params, ham, run, res.e_ref).tau_conv;
        } catch (const Error& e) {
            out.error = e.what();
        }
        return out;
    });

    res.cells.resize(grid.arch_axis.size() * n_sigma);
    for (std::size_t c = 0; c < res.cells.size(); ++c) {
        auto& cell = res.cells[c];
        cell.arch_value = grid.arch_axis[c / n_sigma];
        cell.sigma = res.sigma_axis[c % n_sigma];
        std::vector<double> taus;
        for (std::size_t r = 0; r < n; ++r) {
            const auto& o = outcomes[c * n + r];
            cell.tau.push_back(o.tau);
            if (!o.error.empty()) cell.failures.push_back({r, o.error});
            if (o.tau) taus.push_back(static_cast<double>(*o.tau));
        }
        cell.converged = taus.size();
        cell.tau_stats = aggregate(taus);
        cell.flagged = 2 * cell.converged < n;
    }

    if (init == InitScheme::Gaussian) {
        std::vector<double> xs, ys;
        for (std::size_t a = 0; a < grid.arch_axis.size(); ++a) {
            std::optional<std::size_t> best;
            for (std::size_t s = 0; s < n_sigma; ++s) {
                const auto& c = res.cells[a * n_sigma + s];
                if (c.flagged || c.converged == 0) continue;
                if (!best || c.tau_stats.mean < res.cells[a * n_sigma + *best].tau_stats.mean) best = s;
            }
            res.argmin_sigma.push_back(best ? std::optional<double>(res.sigma_axis[*best]) : std::nullopt);
            if (best) {
                xs.push_back(grid.arch_axis[a]);
                ys.push_back(res.sigma_axis[*best]);
            }
        }
        if (xs.size() < 4) {
            res.argmin_fit_skip_reason = fmt::format("only {} arch values with a minimum (need 4)", xs.size());
        } else {
            try {
                res.argmin_fit = fit_power_law(xs, ys);
            } catch (const Error& e) {
                res.argmin_fit_skip_reason = e.what();
            }
        }
    }
    return res;
}

std::vector<BestInClassRow> best_in_class(const VmcSweepResult& gaussian, const VmcSweepResult& xavier_glorot)
{
    if (gaussian.init != InitScheme::Gaussian || xavier_glorot.init != InitScheme::XavierGlorot)
        throw Error("best_in_class expects a Gaussian sweep and a Xavier-Glorot sweep");
    std::vector<BestInClassRow> rows;
    const std::size_t n_sigma = gaussian.sigma_axis.size();
    for (std::size_t a = 0; a < gaussian.arch_axis.size(); ++a) {
        if (!gaussian.argmin_sigma[a]) continue;
        const auto it = std::find(xavier_glorot.arch_axis.begin(), xavier_glorot.arch_axis.end(), gaussian.arch_axis[a]);
        if (it == xavier_glorot.arch_axis.end()) continue;
        BestInClassRow row;
        row.arch_value = gaussian.arch_axis[a];
        row.best_sigma = *gaussian.argmin_sigma[a];
        for (std::size_t s = 0; s < n_sigma; ++s)
            if (gaussian.sigma_axis[s] == row.best_sigma) row.gaussian = gaussian.cells[a * n_sigma + s].tau_stats;
        row.xavier_glorot = xavier_glorot.cells[static_cast<std::size_t>(it - xavier_glorot.arch_axis.begin())].tau_stats;
        rows.push_back(row);
    }
    return rows;
}

void write_grid_csv(const std::filesystem::path& path, const GridResult& result)
{
    auto os = open_csv(path, "arch_value,sigma,mean,std,stderr,n");
    for (const auto& c : result.cells)
        os << fmt::format("{},{},{},{},{},{}\n", c.arch_value, format_real(c.sigma),
                          format_real(c.kept ? c.stats.mean : kNaN), format_real(c.kept ? c.stats.std : kNaN),
                          format_real(c.kept ? c.stats.std_error : kNaN), c.stats.n);
}

void write_grid_replicas_csv(const std::filesystem::path& path, const GridResult& result)
{
    auto os = open_csv(path, "arch_value,sigma,replica,seed,value,error");
    for (const auto& c : result.cells) {
        for (std::size_t r = 0; r < c.values.size(); ++r) {
            std::string err;
            for (const auto& f : c.failures)
                if (f.replica == r) err = csv_text(f.message);
            os << fmt::format("{},{},{},{},{},{}\n", c.arch_value, format_real(c.sigma), r,
                              replica_seed(result.grid.base_seed, r), format_real(c.values[r]), err);
        }
    }
}

void write_scaling_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows)
{
    auto os = open_csv(path, "sigma,sites,mean,std,stderr,n,mean_rel_purity_error,excluded,reason");
    for (const auto& row : rows)
        for (const auto& p : row.points)
            os << fmt::format("{},{},{},{},{},{},{},{},{}\n", format_real(row.sigma), p.sites,
                              format_real(p.stats.mean), format_real(p.stats.std), format_real(p.stats.std_error),
                              p.stats.n, format_real(p.mean_relative_purity_error), p.excluded ? 1 : 0,
                              csv_text(p.reason));
}

void write_scaling_fits_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows)
{
    auto os = open_csv(path, "sigma,a,nu,b,c,residual_norm,converged,skip_reason");
    for (const auto& row : rows) {
        if (row.fit) {
            const auto& f = *row.fit;
            os << fmt::format("{},{},{},{},{},{},{},\n", format_real(row.sigma), format_real(f.a), format_real(f.nu),
                              format_real(f.b), format_real(f.c), format_real(f.residual_norm), f.converged ? 1 : 0);
        } else {
            os << fmt::format("{},nan,nan,nan,nan,nan,0,{}\n", format_real(row.sigma), csv_text(row.skip_reason));
        }
    }
}

void write_level_stats_csv(const std::filesystem::path& path, const std::vector<LevelStatsRow>& rows)
{
    auto os = open_csv(path, "sigma,spectra,ratios,mean_r,median_r,mean_r_min,median_r_min,replica_stderr_r_min,"
                             "skipped_gaps,failures,goe_mean_r_min,gue_mean_r_min,poisson_mean_r_min");
    const double goe = reference_mean_r_min(RmtKind::Goe), gue = reference_mean_r_min(RmtKind::Gue),
                 poisson = reference_mean_r_min(RmtKind::Poisson);
    for (const auto& r : rows)
        os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", format_real(r.sigma), r.spectra, r.r.size(),
                          format_real(r.mean_r), format_real(r.median_r), format_real(r.mean_r_min),
                          format_real(r.median_r_min), format_real(r.replica_mean_r_min.std_error), r.skipped_gaps,
                          r.failures.size(), format_real(goe), format_real(gue), format_real(poisson));
}

void write_level_histograms_csv(const std::filesystem::path& path, const std::vector<LevelStatsRow>& rows)
{
    auto os = open_csv(path, "sigma,quantity,bin_lo,bin_hi,density,goe,gue,gse,poisson,semi_poisson");
    const RmtKind kinds[] = {RmtKind::Goe, RmtKind::Gue, RmtKind::Gse, RmtKind::Poisson, RmtKind::SemiPoisson};
    for (const auto& row : rows) {
        for (const auto* quantity : {"r", "r_min"}) {
            const bool folded = std::string_view(quantity) == "r_min";
            const auto& h = folded ? row.hist_r_min : row.hist_r;
            for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
                const double mid = 0.5 * (h.edges[b] + h.edges[b + 1]);
                std::string refs;
                // min(r, 1/r) has density 2 P(r) on [0, 1]
                for (auto k : kinds) refs += "," + format_real((folded ? 2.0 : 1.0) * reference_density(k, mid));
                os << fmt::format("{},{},{},{},{}{}\n", format_real(row.sigma), quantity, format_real(h.edges[b]),
                                  format_real(h.edges[b + 1]), format_real(h.density[b]), refs);
            }
        }
    }
}

void write_correlations_csv(const std::filesystem::path& path, const std::vector<CorrelationRow>& rows)
{
    auto os = open_csv(path, "sigma,distance,mean_log_abs_corr,stderr");
    for (const auto& row : rows)
        for (std::size_t d = 0; d < row.curve.distances.size(); ++d)
            os << fmt::format("{},{},{},{}\n", format_real(row.sigma), row.curve.distances[d],
                              format_real(row.curve.mean_log_abs_corr[d]), format_real(row.curve.std_error[d]));
}

void write_vmc_sweep_csv(const std::filesystem::path& path, const VmcSweepResult& result)
{
    auto os = open_csv(path, "init,arch_value,sigma,n,converged,mean_tau,std_tau,stderr_tau,failures,flagged");
    for (const auto& c : result.cells)
        os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", to_string(result.init), c.arch_value,
                          format_real(c.sigma), c.tau.size(), c.converged, format_real(c.tau_stats.mean),
                          format_real(c.tau_stats.std), format_real(c.tau_stats.std_error), c.failures.size(),
                          c.flagged ? 1 : 0);
}

void write_best_in_class_csv(const std::filesystem::path& path, const std::vector<BestInClassRow>& rows)
{
    auto os = open_csv(path, "arch_value,best_sigma,gaussian_mean_tau,gaussian_stderr,xg_mean_tau,xg_stderr");
    for (const auto& r : rows)
        os << fmt::format("{},{},{},{},{},{}\n", r.arch_value, format_real(r.best_sigma), format_real(r.gaussian.mean),
                          format_real(r.gaussian.std_error), format_real(r.xavier_glorot.mean),
                          format_real(r.xavier_glorot.std_error));
}

nlohmann::json grid_manifest(const GridResult& result)
{
    nlohmann::json j;
    j["spec"] = spec_to_json(result.template_spec);
    j["spec_hash"] = fmt::format("{:016x}", spec_hash(result.template_spec));
    j["grid"] = {{"arch_axis", result.grid.arch_axis},
                 {"sigma_axis", result.grid.sigma_axis},
                 {"n_init", result.grid.n_init},
                 {"base_seed", result.grid.base_seed},
                 {"replica_seed", "base_seed XOR replica_index"}};
    j["estimator"] = {{"kind", to_string(result.estimator.kind)},
                      {"n_samples", result.estimator.n_samples},
                      {"n_batches", result.estimator.n_batches}};
    j["version"] = library_version();
    return j;
}

} // namespace arnqs
