#include "arnqs/observables.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "arnqs/numerics.hpp"

namespace arnqs {

Partition Partition::half(int sites)
{
    Partition p;
    p.region_a.resize(static_cast<std::size_t>(sites / 2));
    std::iota(p.region_a.begin(), p.region_a.end(), 0);
    return p;
}

void validate(const Partition& part, int sites)
{
    std::set<int> seen;
    for (int s : part.region_a) {
        if (s < 0 || s >= sites) throw ConfigError(fmt::format("partition site {} outside [0, {})", s, sites));
        if (!seen.insert(s).second) throw ConfigError(fmt::format("partition site {} repeated", s));
    }
}

NonPositivePurity::NonPositivePurity(double raw, double raw_err)
    : Error(fmt::format("swap estimate of Tr rho_A^2 is not positive: {:.6g} +- {:.3g}; increase the sample count",
                        raw, raw_err)),
      raw_estimate(raw), raw_stderr(raw_err)
{
}

StateVector exact_state_vector(const ModelSpec& spec, const ParameterSet& params, int cap)
{
    const int L = sites(spec);
    if (L > cap) throw Error(fmt::format("exact state vector limited to L <= {}, got L = {}", cap, L));
    const auto amps = enumerate_log_amplitudes(spec, params);
    const double m = amps.log_modulus_sq.maxCoeff();
    const double log_norm_sq = m + std::log((amps.log_modulus_sq.array() - m).exp().sum());
    StateVector out;
    out.raw_norm = std::exp(0.5 * log_norm_sq);
    const double shift = is_normalizing(spec) ? 0.0 : log_norm_sq;
    out.amplitudes.resize(amps.log_modulus_sq.size());
    for (Eigen::Index i = 0; i < out.amplitudes.size(); ++i) {
        out.amplitudes[i] = std::polar(std::exp(0.5 * (amps.log_modulus_sq[i] - shift)), amps.phase[i]);
    }
    return out;
}

namespace {

int log2_size(Eigen::Index n)
{
    int L = 0;
    while ((Eigen::Index{1} << L) < n) ++L;
    if ((Eigen::Index{1} << L) != n) throw Error("state vector length is not a power of two");
    return L;
}

/// Amplitudes arranged as a 2^|A| x 2^|B| matrix.
Eigen::MatrixXcd bipartite_matrix(const Eigen::VectorXcd& state, const Partition& part)
{
    const int L = log2_size(state.size());
    validate(part, L);
    const int na = static_cast<int>(part.region_a.size());
    if (na > 14) throw Error(fmt::format("subsystem of {} sites exceeds the 14-site limit", na));
    std::vector<int> b_sites;
    for (int s = 0; s < L; ++s) {
        if (std::find(part.region_a.begin(), part.region_a.end(), s) == part.region_a.end()) b_sites.push_back(s);
    }
    const int nb = L - na;
    const Eigen::Index da = Eigen::Index{1} << na;
    const Eigen::Index db = Eigen::Index{1} << nb;
    bool leading = true;
    for (int k = 0; k < na; ++k) leading = leading && part.region_a[static_cast<std::size_t>(k)] == k;
    if (leading) {
        return Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            state.data(), da, db);
    }
    Eigen::MatrixXcd m(da, db);
    auto bit = [L](Eigen::Index x, int site) { return (x >> (L - 1 - site)) & 1; };
    for (Eigen::Index x = 0; x < state.size(); ++x) {
        Eigen::Index a = 0, b = 0;
        for (int s : part.region_a) a = (a << 1) | bit(x, s);
        for (int s : b_sites) b = (b << 1) | bit(x, s);
        m(a, b) = state[x];
    }
    return m;
}

} // namespace

Eigen::MatrixXcd reduced_density_matrix(const Eigen::VectorXcd& state, const Partition& part)
{
    const Eigen::MatrixXcd m = bipartite_matrix(state, part);
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(m.rows(), m.rows());
    rho.selfadjointView<Eigen::Lower>().rankUpdate(m);
    return rho.selfadjointView<Eigen::Lower>();
}

double renyi2_exact(const Eigen::MatrixXcd& rho)
{
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > 1e-6) throw Error(fmt::format("density matrix trace {:.12g} differs from 1", tr));
    return std::max(0.0, -std::log(rho.squaredNorm()));
}

double purity_exact(const Eigen::VectorXcd& state, const Partition& part)
{
    return reduced_density_matrix(state, part).squaredNorm();
}

EntanglementReport renyi2_swap(const ModelSpec& spec, const ParameterSet& params, const Partition& part,
                               const SampleBatch& sigma, const SampleBatch& tau, std::size_t n_batches)
{
    const int L = sites(spec);
    validate(part, L);
    if (sigma.size() != tau.size() || sigma.size() == 0) throw Error("swap estimator needs two equal nonempty batches");
    const auto n = static_cast<Eigen::Index>(sigma.size());
    Configs swapped(2 * n, L);
    swapped.topRows(n) = sigma.configs;
    swapped.bottomRows(n) = tau.configs;
    for (int s : part.region_a) {
        swapped.col(s).head(n) = tau.configs.col(s);
        swapped.col(s).tail(n) = sigma.configs.col(s);
    }
    const auto amps = log_amplitudes(spec, params, swapped);

    std::vector<std::complex<double>> ratio(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lm = 0.5 * (amps.log_modulus_sq[i] + amps.log_modulus_sq[n + i] - sigma.log_modulus_sq[i] -
                                 tau.log_modulus_sq[i]);
        const double ph = amps.phase[i] + amps.phase[n + i] - sigma.phases[i] - tau.phases[i];
        ratio[static_cast<std::size_t>(i)] = std::polar(std::exp(lm), ph);
    }

    const std::size_t nb = std::max<std::size_t>(2, std::min(n_batches, ratio.size()));
    std::vector<double> batch_re(nb, 0.0);
    std::complex<double> total = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
        const std::size_t lo = k * ratio.size() / nb;
        const std::size_t hi = (k + 1) * ratio.size() / nb;
        std::complex<double> sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += ratio[i];
        total += sum;
        batch_re[k] = hi > lo ? sum.real() / static_cast<double>(hi - lo) : 0.0;
    }
    const std::complex<double> mean = total / static_cast<double>(ratio.size());
    double var = 0.0;
    for (double b : batch_re) var += (b - mean.real()) * (b - mean.real());
    const double se = std::sqrt(var / static_cast<double>(nb * (nb - 1)));
    if (!(mean.real() > 0.0)) throw NonPositivePurity(mean.real(), se);

    EntanglementReport rep;
    rep.method = EntropyMethod::Swap;
    rep.purity = mean.real();
    rep.purity_stderr = se;
    rep.purity_imag = mean.imag();
    rep.s2 = -std::log(mean.real());
    rep.s2_stderr = se / mean.real();
    return rep;
}

EntanglementReport renyi2_swap(const ModelSpec& spec, const ParameterSet& params, const Partition& part,
                               std::size_t n_samples, RngStream& rng, std::size_t n_batches)
{
    const SampleBatch sigma = sample(spec, params, n_samples, rng);
    const SampleBatch tau = sample(spec, params, n_samples, rng);
    return renyi2_swap(spec, params, part, sigma, tau, n_batches);
}

std::vector<double> entanglement_spectrum(const Eigen::MatrixXcd& rho, double cutoff)
{
    const Eigen::VectorXd lambda = hermitian_eigenvalues(rho);
    std::vector<double> out;
    for (Eigen::Index i = lambda.size() - 1; i >= 0; --i) {
        if (lambda[i] >= cutoff) out.push_back(-std::log(lambda[i]));
    }
    if (out.empty()) throw Error(fmt::format("no eigenvalue above the cutoff {:.1e}", cutoff));
    return out;
}

GapRatios gap_ratios(std::vector<double> spectrum, double degenerate_tol)
{
    if (spectrum.size() < 3) throw Error("gap ratios need at least three levels");
    std::sort(spectrum.begin(), spectrum.end());
    GapRatios out;
    std::vector<double> gaps;
    for (std::size_t i = 0; i + 1 < spectrum.size(); ++i) {
        const double g = spectrum[i + 1] - spectrum[i];
        if (g < degenerate_tol) {
            ++out.skipped;
        } else {
            gaps.push_back(g);
        }
    }
    if (gaps.empty()) throw Error("all spectral gaps are degenerate");
    for (std::size_t i = 0; i + 1 < gaps.size(); ++i) {
        const double r = gaps[i + 1] / gaps[i];
        out.r.push_back(r);
        out.r_min.push_back(std::min(r, 1.0 / r));
    }
    return out;
}

std::string_view to_string(RmtKind kind) noexcept
{
    switch (kind) {
    case RmtKind::Goe:
        return "GOE";
    case RmtKind::Gue:
        return "GUE";
    case RmtKind::Gse:
        return "GSE";
    case RmtKind::Poisson:
        return "Poisson";
    case RmtKind::SemiPoisson:
        return "semi-Poisson";
    }
    return "?";
}

double reference_density(RmtKind kind, double r)
{
    if (!(r >= 0.0) || std::isinf(r)) return 0.0;
    if (r > 1.0) return reference_density(kind, 1.0 / r) / (r * r);
    const double sqrt3 = std::sqrt(3.0);
    auto surmise = [r](double beta, double z) {
        return std::pow(r + r * r, beta) / (z * std::pow(1.0 + r + r * r, 1.0 + 1.5 * beta));
    };
    switch (kind) {
    case RmtKind::Goe:
        return surmise(1.0, 8.0 / 27.0);
    case RmtKind::Gue:
        return surmise(2.0, 4.0 * M_PI / (81.0 * sqrt3));
    case RmtKind::Gse:
        return surmise(4.0, 4.0 * M_PI / (729.0 * sqrt3));
    case RmtKind::Poisson:
        return 1.0 / ((1.0 + r) * (1.0 + r));
    case RmtKind::SemiPoisson:
        return 6.0 * r / std::pow(1.0 + r, 4.0);
    }
    return 0.0;
}

double reference_mean_r_min(RmtKind kind)
{
    return integrate_1d([kind](double r) { return 2.0 * r * reference_density(kind, r); }, 0.0, 1.0, 1e-12);
}

double marchenko_pastur_density(double x, double aspect)
{
    if (!(aspect > 0.0 && aspect <= 1.0)) throw Error(fmt::format("aspect ratio {} outside (0, 1]", aspect));
    const double s = std::sqrt(aspect);
    const double lo = (1.0 - s) * (1.0 - s);
    const double hi = (1.0 + s) * (1.0 + s);
    if (x <= 0.0 || x <= lo || x >= hi) return 0.0;
    return std::sqrt((hi - x) * (x - lo)) / (2.0 * M_PI * aspect * x);
}

double marchenko_pastur_aspect(const Partition& part, int sites)
{
    validate(part, sites);
    const int na = static_cast<int>(part.region_a.size());
    return std::ldexp(1.0, na - (sites - na));
}

Histogram density_histogram(const std::vector<double>& values, double lo, double hi, int bins)
{
    if (!(hi > lo) || bins < 1) throw Error("histogram needs hi > lo and at least one bin");
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int i = 0; i <= bins; ++i) h.edges[static_cast<std::size_t>(i)] = lo + width * i;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        if (!(v >= lo && v <= hi)) {
            ++h.out_of_range;
            continue;
        }
        const auto k = std::min(bins - 1, static_cast<int>((v - lo) / width));
        ++counts[static_cast<std::size_t>(k)];
        ++h.in_range;
    }
    h.density.assign(static_cast<std::size_t>(bins), 0.0);
    if (h.in_range > 0) {
        for (int i = 0; i < bins; ++i) {
            h.density[static_cast<std::size_t>(i)] =
                static_cast<double>(counts[static_cast<std::size_t>(i)]) / (static_cast<double>(h.in_range) * width);
        }
    }
    return h;
}

namespace {

Eigen::MatrixXd connected(const Eigen::MatrixXd& z)
{
    const double n = static_cast<double>(z.rows());
    const Eigen::RowVectorXd mean = z.colwise().sum() / n;
    Eigen::MatrixXd c = (z.transpose() * z) / n - mean.transpose() * mean;
    return c.triangularView<Eigen::Upper>().toDenseMatrix().selfadjointView<Eigen::Upper>();
}

} // namespace

CorrelationMatrix connected_correlation_matrix(const SampleBatch& batch, std::size_t n_batches)
{
    if (batch.size() < 2) throw Error("correlations need at least two samples");
    const Eigen::MatrixXd z = (1.0 - 2.0 * batch.configs.cast<double>().array()).matrix();
    CorrelationMatrix out;
    out.value = connected(z);
    const std::size_t n = batch.size();
    const std::size_t nb = std::max<std::size_t>(2, std::min(n_batches, n / 2));
    const auto L = z.cols();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(L, L), sumsq = Eigen::MatrixXd::Zero(L, L);
    for (std::size_t k = 0; k < nb; ++k) {
        const auto lo = static_cast<Eigen::Index>(k * n / nb);
        const auto hi = static_cast<Eigen::Index>((k + 1) * n / nb);
        const Eigen::MatrixXd ck = connected(z.middleRows(lo, hi - lo));
        sum += ck;
        sumsq += ck.cwiseProduct(ck);
    }
    const double m = static_cast<double>(nb);
    const Eigen::MatrixXd var = ((sumsq / m - (sum / m).cwiseProduct(sum / m)) * (m / (m - 1.0))).cwiseMax(0.0);
    out.std_error = (var / m).cwiseSqrt();
    return out;
}

CorrelationCurve correlation_curve(const std::vector<CorrelationMatrix>& models)
{
    if (models.empty()) throw Error("correlation curve needs at least one model");
    const auto L = models.front().value.rows();
    constexpr double kFloor = 1e-300;
    CorrelationCurve out;
    for (Eigen::Index d = 1; d < L; ++d) {
        std::vector<double> per_model;
        double prop = 0.0;
        for (const auto& m : models) {
            if (m.value.rows() != L) throw Error("correlation matrices differ in size");
            double acc = 0.0;
            for (Eigen::Index i = 0; i + d < L; ++i) {
                const double c = std::max(std::abs(m.value(i, i + d)), kFloor);
                acc += std::log(c);
                const double rel = m.std_error(i, i + d) / c;
                prop += rel * rel;
            }
            per_model.push_back(acc / static_cast<double>(L - d));
        }
        const double mean = std::accumulate(per_model.begin(), per_model.end(), 0.0) / per_model.size();
        double se;
        if (per_model.size() > 1) {
            double v = 0.0;
            for (double x : per_model) v += (x - mean) * (x - mean);
            se = std::sqrt(v / static_cast<double>(per_model.size() - 1) / static_cast<double>(per_model.size()));
        } else {
            se = std::sqrt(prop) / static_cast<double>(L - d);
        }
        out.distances.push_back(static_cast<int>(d));
        out.mean_log_abs_corr.push_back(mean);
        out.std_error.push_back(se);
    }
    return out;
}

CorrelationCurve connected_correlations(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples,
                                        RngStream& rng)
{
    if (n_samples < 1000) throw ConfigError("connected correlations need at least 1000 samples");
    const SampleBatch batch = sample(spec, params, n_samples, rng);
    return correlation_curve({connected_correlation_matrix(batch)});
}

void write_spectrum_csv(const std::filesystem::path& path, const std::vector<double>& spectrum)
{
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    os << "entanglement_energy\n";
    for (double e : spectrum) os << fmt::format("{:.17g}\n", e);
}

} // namespace arnqs
