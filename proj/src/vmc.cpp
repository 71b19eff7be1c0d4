#include "arnqs/vmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "arnqs/sampling.hpp"

namespace arnqs {

namespace {

constexpr int kExactCap = 16;
constexpr int kDenseCap = 10;

// Calls f(y, H(x, y)) for every nonzero element of column x, diagonal first.
template <class F>
void for_each_element(const Hamiltonian& ham, std::uint64_t x, F&& f)
{
    const int L = ham.sites;
    auto bit = [&](int i) { return static_cast<int>((x >> (L - 1 - i)) & 1u); };
    auto mask = [&](int i) { return std::uint64_t{1} << (L - 1 - i); };
    double diag = 0.0;
    if (ham.kind == HamiltonianKind::TfimOpen) {
        for (int i = 0; i + 1 < L; ++i) diag -= ham.J * (bit(i) == bit(i + 1) ? 1.0 : -1.0);
        f(x, diag);
        if (ham.h != 0.0)
            for (int i = 0; i < L; ++i) f(x ^ mask(i), -ham.h);
    } else {
        for (int i = 0; i + 1 < L; ++i) diag -= 0.25 * ham.J * (bit(i) == bit(i + 1) ? 1.0 : -1.0);
        f(x, diag);
        if (ham.J != 0.0)
            for (int i = 0; i + 1 < L; ++i)
                if (bit(i) != bit(i + 1)) f(x ^ mask(i) ^ mask(i + 1), -0.5 * ham.J);
    }
}

template <class Vec>
Vec apply_generic(const Hamiltonian& ham, const Vec& v)
{
    Vec out = Vec::Zero(v.size());
    const auto dim = static_cast<std::uint64_t>(v.size());
    for (std::uint64_t x = 0; x < dim; ++x) {
        const auto vx = v[static_cast<Eigen::Index>(x)];
        for_each_element(ham, x, [&](std::uint64_t y, double value) {
            out[static_cast<Eigen::Index>(y)] += value * vx;
        });
    }
    return out;
}

void check_sites(const ModelSpec& spec, const Hamiltonian& ham)
{
    validate(ham);
    if (sites(spec) != ham.sites)
        throw ConfigError(fmt::format("model has {} sites but the Hamiltonian has {}", sites(spec), ham.sites));
}

void check_cap(int L)
{
    if (L > kExactCap)
        throw Error(fmt::format("exact treatment capped at L = {} (got {}); supply an external reference energy",
                                kExactCap, L));
}

Configs all_configs(int L)
{
    const std::uint64_t dim = std::uint64_t{1} << L;
    Configs c(static_cast<Eigen::Index>(dim), L);
    for (std::uint64_t x = 0; x < dim; ++x)
        index_to_spins(x, std::span<std::uint8_t>(c.row(static_cast<Eigen::Index>(x)).data(),
                                                  static_cast<std::size_t>(L)));
    return c;
}

double lanczos_lowest(const Hamiltonian& ham)
{
    const Eigen::Index dim = Eigen::Index{1} << ham.sites;
    const Eigen::Index max_steps = std::min<Eigen::Index>(dim, 300);
    RngStream rng(0x4c414e43u);
    Eigen::VectorXd q(dim);
    for (Eigen::Index i = 0; i < dim; ++i) q[i] = rng.gaussian();
    q.normalize();
    std::vector<Eigen::VectorXd> basis{q};
    std::vector<double> alpha, beta;
    double previous = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < max_steps; ++k) {
        Eigen::VectorXd w = apply_generic(ham, basis.back());
        alpha.push_back(basis.back().dot(w));
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) w -= b.dot(w) * b;
        const double nb = w.norm();
        const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
        Eigen::VectorXd off = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1))
                                    : Eigen::VectorXd(0);
        tri.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
        const double lowest = tri.eigenvalues()[0];
        if (nb < 1e-12 || std::abs(lowest - previous) < 1e-13 * std::max(1.0, std::abs(lowest))) return lowest;
        previous = lowest;
        beta.push_back(nb);
        basis.push_back(w / nb);
    }
    return previous;
}

} // namespace

std::string to_string(HamiltonianKind kind)
{
    return kind == HamiltonianKind::TfimOpen ? "tfim" : "heisenberg";
}

HamiltonianKind parse_hamiltonian_kind(std::string_view name)
{
    if (name == "tfim") return HamiltonianKind::TfimOpen;
    if (name == "heisenberg") return HamiltonianKind::HeisenbergOpen;
    throw ConfigError(fmt::format("unknown Hamiltonian '{}' (expected tfim or heisenberg)", name));
}

void validate(const Hamiltonian& ham)
{
    if (ham.sites < 1 || ham.sites > 62) throw ConfigError(fmt::format("Hamiltonian sites {} out of range", ham.sites));
    if (!std::isfinite(ham.J) || !std::isfinite(ham.h)) throw ConfigError("Hamiltonian couplings must be finite");
}

Eigen::VectorXcd apply_hamiltonian(const Hamiltonian& ham, const Eigen::VectorXcd& v)
{
    validate(ham);
    check_cap(ham.sites);
    if (v.size() != (Eigen::Index{1} << ham.sites))
        throw Error(fmt::format("vector length {} is not 2^{}", v.size(), ham.sites));
    return apply_generic(ham, v);
}

double exact_ground_energy(const Hamiltonian& ham)
{
    validate(ham);
    check_cap(ham.sites);
    if (ham.sites > kDenseCap) return lanczos_lowest(ham);
    const Eigen::Index dim = Eigen::Index{1} << ham.sites;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index x = 0; x < dim; ++x)
        for_each_element(ham, static_cast<std::uint64_t>(x),
                         [&](std::uint64_t y, double value) { h(static_cast<Eigen::Index>(y), x) += value; });
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
}

Eigen::VectorXcd local_energies(const ModelSpec& spec, const ParameterSet& params, const Configs& configs,
                                const LogAmplitudes& amps, const Hamiltonian& ham)
{
    check_sites(spec, ham);
    const Eigen::Index n = configs.rows();
    const int L = ham.sites;
    if (configs.cols() != L || amps.log_modulus_sq.size() != n)
        throw Error("configs and log amplitudes disagree in shape");

    Eigen::VectorXcd eloc = Eigen::VectorXcd::Zero(n);
    std::vector<std::pair<Eigen::Index, double>> owners; // (row, matrix element) per connected config
    std::vector<std::vector<std::uint8_t>> connected;
    std::vector<std::uint8_t> spins(static_cast<std::size_t>(L));
    for (Eigen::Index r = 0; r < n; ++r) {
        if (!std::isfinite(amps.log_modulus_sq[r]))
            throw Error(fmt::format("Psi vanishes on sample {}; local energy undefined", r));
        std::copy_n(configs.row(r).data(), L, spins.begin());
        const auto x = spins_to_index(spins);
        for_each_element(ham, x, [&](std::uint64_t y, double value) {
            if (y == x) {
                eloc[r] += value;
                return;
            }
            std::vector<std::uint8_t> s(static_cast<std::size_t>(L));
            index_to_spins(y, s);
            connected.push_back(std::move(s));
            owners.emplace_back(r, value);
        });
    }
    if (connected.empty()) return eloc;
    Configs flipped(static_cast<Eigen::Index>(connected.size()), L);
    for (std::size_t k = 0; k < connected.size(); ++k)
        std::copy(connected[k].begin(), connected[k].end(), flipped.row(static_cast<Eigen::Index>(k)).data());
    const auto fa = log_amplitudes(spec, params, flipped);
    for (std::size_t k = 0; k < owners.size(); ++k) {
        const auto [r, value] = owners[k];
        const auto kk = static_cast<Eigen::Index>(k);
        const double log_ratio = 0.5 * (fa.log_modulus_sq[kk] - amps.log_modulus_sq[r]);
        const double dphi = fa.phase[kk] - amps.phase[r];
        eloc[r] += value * std::polar(std::exp(log_ratio), dphi);
    }
    return eloc;
}

std::complex<double> local_energy(const ModelSpec& spec, const ParameterSet& params,
                                  std::span<const std::uint8_t> spins, const Hamiltonian& ham)
{
    Configs c(1, static_cast<Eigen::Index>(spins.size()));
    std::copy(spins.begin(), spins.end(), c.row(0).data());
    return local_energies(spec, params, c, log_amplitudes(spec, params, c), ham)[0];
}

EnergyGradient energy_and_gradient(const ModelSpec& spec, const ParameterSet& params, const Hamiltonian& ham,
                                   std::size_t n_samples, RngStream& rng)
{
    if (n_samples < 2) throw ConfigError("energy estimation needs at least 2 samples");
    check_sites(spec, ham);
    const auto batch = sample(spec, params, n_samples, rng);
    const LogAmplitudes amps{batch.log_modulus_sq, batch.phases};
    const Eigen::VectorXcd eloc = local_energies(spec, params, batch.configs, amps, ham);
    const auto n = static_cast<double>(n_samples);

    EnergyGradient out;
    const std::complex<double> mean_c = eloc.mean();
    out.energy = mean_c.real();
    out.var_per_spin = (eloc.array() - mean_c).abs2().sum() / n / ham.sites;
    const double var_re = (eloc.real().array() - out.energy).square().sum() / (n - 1.0);
    out.energy_std_error = std::sqrt(var_re / n);

    std::vector<double> a(n_samples), b(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const auto d = eloc[static_cast<Eigen::Index>(s)] - out.energy;
        a[s] = 2.0 * d.real() / n;
        b[s] = 2.0 * d.imag() / n;
    }
    out.grad = log_amplitude_gradient(spec, params, batch.configs, a, b);
    return out;
}

namespace {

Eigen::VectorXcd normalized_state(const ModelSpec& spec, const ParameterSet& params)
{
    const auto amps = enumerate_log_amplitudes(spec, params);
    const double top = amps.log_modulus_sq.maxCoeff();
    Eigen::VectorXcd psi(amps.log_modulus_sq.size());
    for (Eigen::Index i = 0; i < psi.size(); ++i)
        psi[i] = std::polar(std::exp(0.5 * (amps.log_modulus_sq[i] - top)), amps.phase[i]);
    return psi / psi.norm();
}

} // namespace

double exact_energy(const ModelSpec& spec, const ParameterSet& params, const Hamiltonian& ham)
{
    check_sites(spec, ham);
    check_cap(ham.sites);
    const auto psi = normalized_state(spec, params);
    return psi.dot(apply_generic(ham, psi)).real();
}

EnergyGradient exact_energy_and_gradient(const ModelSpec& spec, const ParameterSet& params,
                                         const Hamiltonian& ham)
{
    check_sites(spec, ham);
    check_cap(ham.sites);
    const auto psi = normalized_state(spec, params);
    const Eigen::VectorXcd hpsi = apply_generic(ham, psi);
    EnergyGradient out;
    out.energy = psi.dot(hpsi).real();
    out.var_per_spin = std::max(0.0, hpsi.squaredNorm() - out.energy * out.energy) / ham.sites;

    const auto dim = static_cast<std::size_t>(psi.size());
    std::vector<double> a(dim), b(dim);
    for (std::size_t x = 0; x < dim; ++x) {
        const auto i = static_cast<Eigen::Index>(x);
        const auto w = std::conj(psi[i]) * hpsi[i] - std::norm(psi[i]) * out.energy;
        a[x] = 2.0 * w.real();
        b[x] = 2.0 * w.imag();
    }
    out.grad = log_amplitude_gradient(spec, params, all_configs(ham.sites), a, b);
    return out;
}

std::pair<ParameterSet, AdamState> adam_step(const ParameterSet& params, std::span<const double> grad,
                                             const AdamState& state, double eta, const AdamConfig& adam)
{
    const std::size_t n = params.total_count();
    if (grad.size() != n) throw Error(fmt::format("gradient has {} entries, parameters {}", grad.size(), n));
    AdamState next = state;
    if (next.m.empty()) next.m.assign(n, 0.0);
    if (next.v.empty()) next.v.assign(n, 0.0);
    if (next.m.size() != n || next.v.size() != n) throw Error("Adam state does not match the parameters");
    next.t += 1;
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(next.t));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(next.t));
    ParameterSet out = params;
    auto p = out.values();
    for (std::size_t i = 0; i < n; ++i) {
        next.m[i] = adam.beta1 * next.m[i] + (1.0 - adam.beta1) * grad[i];
        next.v[i] = adam.beta2 * next.v[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
        const double mhat = next.m[i] / c1;
        const double vhat = next.v[i] / c2;
        p[i] -= eta * mhat / (std::sqrt(vhat) + adam.eps);
    }
    return {std::move(out), std::move(next)};
}

void validate(const VmcConfig& cfg)
{
    if (!(cfg.eta > 0.0)) throw ConfigError("vmc.eta must be positive");
    if (cfg.n_samples < 2) throw ConfigError("vmc.n_samples must be at least 2");
    if (!(cfg.eps_rel_target > 0.0) || !(cfg.var_per_spin_target > 0.0))
        throw ConfigError("vmc convergence targets must be positive");
    if (cfg.window < 1) throw ConfigError("vmc.window must be at least 1");
    if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0 && cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0) ||
        !(cfg.adam.eps > 0.0))
        throw ConfigError("Adam betas must lie in [0, 1) and eps must be positive");
}

VmcDiverged::VmcDiverged(std::size_t it, std::vector<double> energies)
    : Error([&] {
          const std::size_t shown = std::min<std::size_t>(energies.size(), 8);
          std::string prefix;
          for (std::size_t i = 0; i < shown; ++i) prefix += fmt::format("{}{:.6g}", i ? ", " : "", energies[i]);
          return fmt::format("VMC energy diverged at iteration {}; trace prefix [{}{}]", it, prefix,
                             energies.size() > shown ? ", ..." : "");
      }()),
      iteration(it), energy_trace(std::move(energies))
{
}

VmcResult vmc_optimize(const ModelSpec& spec, const ParameterSet& init_params, const Hamiltonian& ham,
                       const VmcConfig& cfg, double e_ref)
{
    validate(cfg);
    check_sites(spec, ham);
    if (!(e_ref != 0.0) || !std::isfinite(e_ref)) throw ConfigError("reference energy must be finite and nonzero");

    std::ofstream trace;
    if (cfg.trace_path) {
        trace.open(*cfg.trace_path);
        if (!trace) throw Error(fmt::format("cannot write '{}'", cfg.trace_path->string()));
        trace << "iteration,E_mean,var_per_spin,eps_rel,wall_ms\n";
    }
    const auto start = std::chrono::steady_clock::now();
    RngStream rng(cfg.seed);
    VmcResult res;
    res.final_params = init_params;
    for (std::size_t it = 0;; ++it) {
        auto eg = energy_and_gradient(spec, res.final_params, ham, cfg.n_samples, rng);
        const bool finite_grad = std::all_of(eg.grad.begin(), eg.grad.end(), [](double g) { return std::isfinite(g); });
        res.energy_trace.push_back(eg.energy);
        if (!std::isfinite(eg.energy) || !std::isfinite(eg.var_per_spin) || !finite_grad)
            throw VmcDiverged(it, res.energy_trace);
        res.variance_trace.push_back(eg.var_per_spin);
        res.eps_rel_trace.push_back(std::abs(eg.energy - e_ref) / std::abs(e_ref));

        const std::size_t w = std::min(cfg.window, res.energy_trace.size());
        const double e_avg =
            std::accumulate(res.energy_trace.end() - static_cast<std::ptrdiff_t>(w), res.energy_trace.end(), 0.0) / w;
        const double v_avg = std::accumulate(res.variance_trace.end() - static_cast<std::ptrdiff_t>(w),
                                             res.variance_trace.end(), 0.0) / w;
        const double eps_avg = std::abs(e_avg - e_ref) / std::abs(e_ref);
        if (trace) {
            const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
            trace << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.3f}\n", it, eg.energy, eg.var_per_spin,
                                 res.eps_rel_trace.back(), ms.count());
        }
        if (eps_avg <= cfg.eps_rel_target && v_avg <= cfg.var_per_spin_target) {
            res.tau_conv = it;
            break;
        }
        if (it >= cfg.max_iters) break;
        auto [next, state] = adam_step(res.final_params, eg.grad, res.adam, cfg.eta, cfg.adam);
        res.final_params = std::move(next);
        res.adam = std::move(state);
    }
    return res;
}

void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const ParameterSet& params,
                     const AdamState& adam)
{
    save_model(path, spec, params);
    ParameterSet moments;
    const std::size_t n = params.total_count();
    moments.add("m", {n});
    moments.add("v", {n});
    moments.add("t", {1});
    if (!adam.m.empty()) std::copy(adam.m.begin(), adam.m.end(), moments.tensor("m").begin());
    if (!adam.v.empty()) std::copy(adam.v.begin(), adam.v.end(), moments.tensor("v").begin());
    moments.tensor("t")[0] = static_cast<double>(adam.t);
    write_parameters(path.string() + ".adam", moments);
}

std::pair<ParameterSet, AdamState> load_checkpoint(const std::filesystem::path& path)
{
    auto params = read_parameters(path);
    const auto moments = read_parameters(path.string() + ".adam");
    AdamState adam;
    const auto m = moments.tensor("m");
    const auto v = moments.tensor("v");
    if (m.size() != params.total_count()) throw Error("Adam checkpoint does not match the parameters");
    adam.m.assign(m.begin(), m.end());
    adam.v.assign(v.begin(), v.end());
    adam.t = static_cast<std::size_t>(moments.tensor("t")[0]);
    return {std::move(params), std::move(adam)};
}

} // namespace arnqs
