#include "arnqs/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "arnqs/activation.hpp"
#include "arnqs/error.hpp"
#include "model_detail.hpp"

namespace arnqs {

namespace detail {

HeadValue head_select(Activation g, double r0, double r1, int s) noexcept
{
    const double rs = s == 0 ? r0 : r1;
    switch (g) {
    case Activation::Softmax: {
        const double m = std::max(r0, r1);
        const double lse = m + std::log(std::exp(r0 - m) + std::exp(r1 - m));
        return {rs - lse, false};
    }
    case Activation::SquareModulus: {
        const double m = std::max(std::abs(r0), std::abs(r1));
        if (m == 0.0) return {-std::log(2.0), false};
        const double t0 = r0 / m;
        const double t1 = r1 / m;
        const double ts = s == 0 ? t0 : t1;
        return {std::log(ts * ts) - std::log(t0 * t0 + t1 * t1), false};
    }
    default: {
        const double v = activate(g, rs);
        return {std::log(std::abs(v)), v < 0.0};
    }
    }
}

std::array<double, 2> head_select_grad(Activation g, double r0, double r1, int s) noexcept
{
    std::array<double, 2> out{0.0, 0.0};
    switch (g) {
    case Activation::Softmax: {
        const double p1 = 1.0 / (1.0 + std::exp(r0 - r1));
        const double p0 = 1.0 - p1;
        out[0] = (s == 0 ? 1.0 : 0.0) - p0;
        out[1] = (s == 1 ? 1.0 : 0.0) - p1;
        break;
    }
    case Activation::SquareModulus: {
        const double norm = r0 * r0 + r1 * r1;
        const double rs = s == 0 ? r0 : r1;
        if (norm == 0.0 || rs == 0.0) break;
        out[0] = -2.0 * r0 / norm;
        out[1] = -2.0 * r1 / norm;
        out[s] += 2.0 / rs;
        break;
    }
    default: {
        const double x = s == 0 ? r0 : r1;
        const double v = activate(g, x);
        if (v != 0.0) out[s] = activate_derivative(g, x, v) / v;
        break;
    }
    }
    return out;
}

double head_prob_one(Activation g, double r0, double r1) noexcept
{
    if (g == Activation::Softmax) return 1.0 / (1.0 + std::exp(r0 - r1));
    const double m = std::max(std::abs(r0), std::abs(r1));
    if (m == 0.0) return 0.5;
    const double t0 = r0 / m;
    const double t1 = r1 / m;
    return t1 * t1 / (t0 * t0 + t1 * t1);
}

} // namespace detail

ParameterSet make_parameters(const ModelSpec& spec)
{
    validate(spec);
    ParameterSet p;
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        const auto d = static_cast<std::size_t>(r->hidden);
        if (r->cell == RnnCell::Vanilla) {
            p.add("W", {d, d + 2});
            p.add("b", {d});
        } else {
            for (const char* gate : {"z", "r", "c"}) {
                p.add(fmt::format("W{}", gate), {d, d + 2});
                p.add(fmt::format("b{}", gate), {d});
            }
        }
        p.add("U", {2, d});
        p.add("c", {2});
        if (r->phase == PhaseMode::Complex) {
            p.add("V", {2, d});
            p.add("d", {2});
        }
        return p;
    }
    const auto& a = std::get<AtfSpec>(spec);
    const auto d = static_cast<std::size_t>(a.d_emb);
    const auto dk = static_cast<std::size_t>(a.d_k());
    const auto f = static_cast<std::size_t>(a.ffl_width());
    p.add("embed", {2, d});
    for (int i = 0; i < a.heads; ++i) {
        if (a.attention == AttentionKind::Softmax) {
            p.add(fmt::format("Wq.{}", i), {d, dk});
            p.add(fmt::format("Wk.{}", i), {d, dk});
        } else {
            p.add(fmt::format("kernel.{}", i), {static_cast<std::size_t>(a.sites)});
        }
        p.add(fmt::format("Wv.{}", i), {d, dk});
    }
    p.add("ln1.gain", {d});
    p.add("ln1.bias", {d});
    p.add("W1", {d, f});
    p.add("b1", {f});
    p.add("W2", {f, d});
    p.add("b2", {d});
    p.add("ln2.gain", {d});
    p.add("ln2.bias", {d});
    p.add("W3", {d, 2});
    p.add("c3", {2});
    if (a.phase == PhaseMode::Complex) {
        p.add("W4", {d, 2});
        p.add("d4", {2});
    }
    return p;
}

ParameterSet init_gaussian(const ModelSpec& spec, double sigma, RngStream& rng)
{
    if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
    ParameterSet p = make_parameters(spec);
    const auto draw = gaussian_draw(p.total_count(), sigma, rng);
    std::copy(draw.begin(), draw.end(), p.values().begin());
    return p;
}

int fan_in(const ModelSpec& spec, std::string_view name)
{
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        if (name == "W" || name == "Wz" || name == "Wr" || name == "Wc") return r->hidden + 2;
        if (name == "U" || name == "V") return r->hidden;
        return 0;
    }
    const auto& a = std::get<AtfSpec>(spec);
    if (name == "embed") return 2;
    if (name.starts_with("Wq.") || name.starts_with("Wk.") || name.starts_with("Wv.")) return a.d_emb;
    if (name.starts_with("kernel.")) return a.sites;
    if (name == "W1" || name == "W3" || name == "W4") return a.d_emb;
    if (name == "W2") return a.ffl_width();
    return 0;
}

ParameterSet init_xavier_glorot(const ModelSpec& spec, RngStream& rng)
{
    ParameterSet p = make_parameters(spec);
    for (const auto& t : p.tensors()) {
        auto values = p.tensor(t.name);
        if (t.name.ends_with(".gain")) {
            std::fill(values.begin(), values.end(), 1.0);
            continue;
        }
        const int n = fan_in(spec, t.name);
        if (n == 0) continue;
        const double bound = 1.0 / std::sqrt(static_cast<double>(n));
        for (double& v : values) v = rng.uniform(-bound, bound);
    }
    return p;
}

SiteOutputs site_outputs(const ModelSpec& spec, const ParameterSet& params, std::span<const std::uint8_t> spins)
{
    if (const auto* r = std::get_if<RnnSpec>(&spec)) return detail::rnn_site_outputs(*r, params, spins);
    return atf_forward(std::get<AtfSpec>(spec), params, spins);
}

namespace {

void check_params(const ModelSpec& spec, const ParameterSet& params)
{
    if (!params.same_layout(make_parameters(spec))) {
        throw Error("parameter set does not match the model specification");
    }
}

void check_configs(const ModelSpec& spec, const Configs& configs)
{
    if (configs.cols() != sites(spec)) {
        throw Error(fmt::format("configurations have {} sites, model has {}", configs.cols(), sites(spec)));
    }
    for (Eigen::Index i = 0; i < configs.size(); ++i) {
        if (configs.data()[i] > 1) throw Error("spin values must be 0 or 1");
    }
}

} // namespace

LogAmplitudes log_amplitudes(const ModelSpec& spec, const ParameterSet& params, const Configs& configs)
{
    check_params(spec, params);
    check_configs(spec, configs);
    LogAmplitudes out;
    out.log_modulus_sq.setZero(configs.rows());
    out.phase.setZero(configs.rows());
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        detail::rnn_evaluate(*r, params, configs, out);
    } else {
        detail::atf_evaluate(std::get<AtfSpec>(spec), params, configs, out);
    }
    return out;
}

Amplitude amplitude(const ModelSpec& spec, const ParameterSet& params, std::span<const std::uint8_t> spins)
{
    Configs c(1, static_cast<Eigen::Index>(spins.size()));
    std::copy(spins.begin(), spins.end(), c.data());
    const auto la = log_amplitudes(spec, params, c);
    Amplitude a;
    a.modulus_sq = std::exp(la.log_modulus_sq[0]);
    a.phase = la.phase[0];
    a.value = std::polar(std::exp(0.5 * la.log_modulus_sq[0]), a.phase);
    if (phase_mode(spec) == PhaseMode::Positive) a.value = {a.value.real(), 0.0};
    a.normalized = is_normalizing(spec);
    return a;
}

LogAmplitudes enumerate_log_amplitudes(const ModelSpec& spec, const ParameterSet& params)
{
    check_params(spec, params);
    const int L = sites(spec);
    if (L > 30) throw Error(fmt::format("enumeration of 2^{} configurations is not supported", L));
    LogAmplitudes out;
    out.log_modulus_sq.setZero(Eigen::Index{1} << L);
    out.phase.setZero(Eigen::Index{1} << L);
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        detail::rnn_enumerate(*r, params, out);
    } else {
        detail::atf_enumerate(std::get<AtfSpec>(spec), params, out);
    }
    return out;
}

std::vector<double> log_amplitude_gradient(const ModelSpec& spec, const ParameterSet& params, const Configs& configs,
                                           std::span<const double> weight_re, std::span<const double> weight_im)
{
    check_params(spec, params);
    check_configs(spec, configs);
    const auto n = static_cast<std::size_t>(configs.rows());
    if (weight_re.size() != n || weight_im.size() != n) {
        throw Error("gradient weights must have one entry per configuration");
    }
    ParameterSet grad = make_parameters(spec);
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        detail::rnn_gradient(*r, params, configs, weight_re, weight_im, grad);
    } else {
        detail::atf_gradient(std::get<AtfSpec>(spec), params, configs, weight_re, weight_im, grad);
    }
    return {grad.values().begin(), grad.values().end()};
}

void draw_autoregressive(const ModelSpec& spec, const ParameterSet& params, std::size_t n, RngStream& rng,
                         Configs& configs, LogAmplitudes& amps)
{
    check_params(spec, params);
    if (!is_normalizing(spec)) {
        throw Error(fmt::format("output activation '{}' does not normalize the conditionals; "
                                "use mcmc_sample instead",
                                to_string(output_activation(spec))));
    }
    configs.resize(static_cast<Eigen::Index>(n), sites(spec));
    amps.log_modulus_sq.setZero(static_cast<Eigen::Index>(n));
    amps.phase.setZero(static_cast<Eigen::Index>(n));
    if (const auto* r = std::get_if<RnnSpec>(&spec)) {
        detail::rnn_draw(*r, params, n, rng, configs, amps);
    } else {
        detail::atf_draw(std::get<AtfSpec>(spec), params, n, rng, configs, amps);
    }
}

void index_to_spins(std::uint64_t index, std::span<std::uint8_t> spins) noexcept
{
    const std::size_t L = spins.size();
    for (std::size_t n = 0; n < L; ++n) spins[n] = static_cast<std::uint8_t>((index >> (L - 1 - n)) & 1u);
}

std::uint64_t spins_to_index(std::span<const std::uint8_t> spins) noexcept
{
    std::uint64_t index = 0;
    for (auto s : spins) index = (index << 1) | (s & 1u);
    return index;
}

} // namespace arnqs
