#include "arnqs/spec.hpp"

#include <array>
#include <utility>

#include <fmt/format.h>

#include "arnqs/error.hpp"
#include "json_util.hpp"

namespace arnqs {

namespace {

using detail::get_field;
using detail::get_or;
using detail::reject_unknown;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::array<std::pair<Activation, std::string_view>, 6> kActivationNames{{
    {Activation::Tanh, "tanh"},
    {Activation::Identity, "identity"},
    {Activation::Softmax, "softmax"},
    {Activation::SquareModulus, "square_modulus"},
    {Activation::Relu, "relu"},
    {Activation::Sigmoid, "sigmoid"},
}};

bool elementwise(Activation a) noexcept
{
    return a != Activation::Softmax && a != Activation::SquareModulus;
}

} // namespace

void validate(const ModelSpec& spec)
{
    std::visit(Overloaded{
                   [](const RnnSpec& s) {
                       if (s.sites < 1) throw ConfigError("sites must be >= 1");
                       if (s.hidden < 1) throw ConfigError("hidden must be >= 1");
                       if (!elementwise(s.f)) {
                           throw ConfigError("hidden activation f must be element-wise");
                       }
                   },
                   [](const AtfSpec& s) {
                       if (s.sites < 1) throw ConfigError("sites must be >= 1");
                       if (s.d_emb < 1) throw ConfigError("d_emb must be >= 1");
                       if (s.heads < 1) throw ConfigError("heads must be >= 1");
                       if (s.d_emb % s.heads != 0) throw ConfigError("d_emb not divisible by heads");
                       if (s.d_fl < 0) throw ConfigError("d_fl must be >= 0");
                       if (s.n_ffl != 1) throw ConfigError("n_ffl must be 1");
                       if (!elementwise(s.f_fl)) {
                           throw ConfigError("feedforward activation f_fl must be element-wise");
                       }
                   },
               },
               spec);
}

int sites(const ModelSpec& spec) noexcept
{
    return std::visit([](const auto& s) { return s.sites; }, spec);
}

Activation output_activation(const ModelSpec& spec) noexcept
{
    return std::visit([](const auto& s) { return s.g; }, spec);
}

PhaseMode phase_mode(const ModelSpec& spec) noexcept
{
    return std::visit([](const auto& s) { return s.phase; }, spec);
}

bool is_rnn(const ModelSpec& spec) noexcept { return std::holds_alternative<RnnSpec>(spec); }

bool is_normalizing(Activation g) noexcept { return !elementwise(g); }

bool is_normalizing(const ModelSpec& spec) noexcept { return is_normalizing(output_activation(spec)); }

ModelSpec with_sites(ModelSpec spec, int n)
{
    std::visit([n](auto& s) { s.sites = n; }, spec);
    return spec;
}

ModelSpec with_arch(ModelSpec spec, int value)
{
    std::visit(Overloaded{
                   [value](RnnSpec& s) { s.hidden = value; },
                   [value](AtfSpec& s) { s.d_emb = value; },
               },
               spec);
    return spec;
}

int arch_value(const ModelSpec& spec) noexcept
{
    return std::visit(Overloaded{
                          [](const RnnSpec& s) { return s.hidden; },
                          [](const AtfSpec& s) { return s.d_emb; },
                      },
                      spec);
}

std::string_view to_string(Activation a) noexcept
{
    for (const auto& [k, name] : kActivationNames) {
        if (k == a) return name;
    }
    return "?";
}

std::string_view to_string(PhaseMode p) noexcept { return p == PhaseMode::Complex ? "complex" : "positive"; }
std::string_view to_string(RnnCell c) noexcept { return c == RnnCell::Vanilla ? "vanilla" : "gru"; }
std::string_view to_string(AttentionKind k) noexcept
{
    return k == AttentionKind::Softmax ? "softmax" : "circulant";
}

Activation parse_activation(std::string_view s)
{
    for (const auto& [k, name] : kActivationNames) {
        if (name == s) return k;
    }
    throw ConfigError(fmt::format("unknown activation '{}'", s));
}

PhaseMode parse_phase_mode(std::string_view s)
{
    if (s == "complex") return PhaseMode::Complex;
    if (s == "positive") return PhaseMode::Positive;
    throw ConfigError(fmt::format("unknown phase mode '{}'", s));
}

RnnCell parse_cell(std::string_view s)
{
    if (s == "vanilla") return RnnCell::Vanilla;
    if (s == "gru") return RnnCell::Gru;
    throw ConfigError(fmt::format("unknown RNN cell '{}'", s));
}

AttentionKind parse_attention(std::string_view s)
{
    if (s == "softmax") return AttentionKind::Softmax;
    if (s == "circulant") return AttentionKind::Circulant;
    throw ConfigError(fmt::format("unknown attention kind '{}'", s));
}

nlohmann::json spec_to_json(const ModelSpec& spec)
{
    return std::visit(Overloaded{
                          [](const RnnSpec& s) {
                              return nlohmann::json{
                                  {"arch", "rnn"},
                                  {"sites", s.sites},
                                  {"hidden", s.hidden},
                                  {"cell", to_string(s.cell)},
                                  {"f", to_string(s.f)},
                                  {"g", to_string(s.g)},
                                  {"phase", to_string(s.phase)},
                              };
                          },
                          [](const AtfSpec& s) {
                              return nlohmann::json{
                                  {"arch", "atf"},
                                  {"sites", s.sites},
                                  {"d_emb", s.d_emb},
                                  {"heads", s.heads},
                                  {"attention", to_string(s.attention)},
                                  {"f_fl", to_string(s.f_fl)},
                                  {"g", to_string(s.g)},
                                  {"d_fl", s.d_fl},
                                  {"n_ffl", s.n_ffl},
                                  {"phase", to_string(s.phase)},
                              };
                          },
                      },
                      spec);
}

ModelSpec spec_from_json(const nlohmann::json& j, std::string_view where)
{
    if (!j.is_object()) throw ConfigError(fmt::format("{}: expected an object", where));
    const auto arch = get_or<std::string>(j, "arch", "rnn", where);
    auto parse = [&](std::string_view key, auto parser, auto fallback) {
        if (!j.contains(std::string(key))) return fallback;
        try {
            return parser(get_field<std::string>(j, key, where));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}.{}: {}", where, key, e.what()));
        }
    };
    ModelSpec out;
    if (arch == "rnn") {
        reject_unknown(j, {"arch", "sites", "hidden", "cell", "f", "g", "phase"}, where);
        RnnSpec s;
        s.sites = get_or<int>(j, "sites", s.sites, where);
        s.hidden = get_or<int>(j, "hidden", s.hidden, where);
        s.cell = parse("cell", parse_cell, s.cell);
        s.f = parse("f", parse_activation, s.f);
        s.g = parse("g", parse_activation, s.g);
        s.phase = parse("phase", parse_phase_mode, s.phase);
        out = s;
    } else if (arch == "atf") {
        reject_unknown(j, {"arch", "sites", "d_emb", "heads", "attention", "f_fl", "g", "d_fl", "n_ffl", "phase"},
                       where);
        AtfSpec s;
        s.sites = get_or<int>(j, "sites", s.sites, where);
        s.d_emb = get_or<int>(j, "d_emb", s.d_emb, where);
        s.heads = get_or<int>(j, "heads", s.heads, where);
        s.attention = parse("attention", parse_attention, s.attention);
        s.f_fl = parse("f_fl", parse_activation, s.f_fl);
        s.g = parse("g", parse_activation, s.g);
        s.d_fl = get_or<int>(j, "d_fl", s.d_fl, where);
        s.n_ffl = get_or<int>(j, "n_ffl", s.n_ffl, where);
        s.phase = parse("phase", parse_phase_mode, s.phase);
        out = s;
    } else {
        throw ConfigError(fmt::format("{}.arch: expected \"rnn\" or \"atf\", got \"{}\"", where, arch));
    }
    try {
        validate(out);
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
    return out;
}

std::uint64_t spec_hash(const ModelSpec& spec)
{
    const std::string text = spec_to_json(spec).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace arnqs
