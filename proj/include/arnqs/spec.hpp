#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace arnqs {

enum class Activation { Tanh, Identity, Softmax, SquareModulus, Relu, Sigmoid };
enum class PhaseMode { Complex, Positive };
enum class RnnCell { Vanilla, Gru };
enum class AttentionKind { Softmax, Circulant };

/// Single-layer recurrent wavefunction. Weights are shared by all sites, so
/// the same parameters describe any chain length.
struct RnnSpec {
    int sites = 1;
    int hidden = 1;
    RnnCell cell = RnnCell::Vanilla;
    Activation f = Activation::Tanh;    // hidden-state activation
    Activation g = Activation::Softmax; // output activation
    PhaseMode phase = PhaseMode::Complex;

    bool operator==(const RnnSpec&) const = default;
};

/// One-block autoregressive transformer.
struct AtfSpec {
    int sites = 1;
    int d_emb = 2;
    int heads = 2;
    AttentionKind attention = AttentionKind::Softmax;
    Activation f_fl = Activation::Relu;
    Activation g = Activation::Softmax;
    int d_fl = 0; // 0 selects d_emb
    int n_ffl = 1;
    PhaseMode phase = PhaseMode::Complex;

    int d_k() const noexcept { return d_emb / heads; }
    int ffl_width() const noexcept { return d_fl > 0 ? d_fl : d_emb; }

    bool operator==(const AtfSpec&) const = default;
};

using ModelSpec = std::variant<RnnSpec, AtfSpec>;

/// Throws ConfigError describing the first violated constraint.
void validate(const ModelSpec& spec);

int sites(const ModelSpec& spec) noexcept;
Activation output_activation(const ModelSpec& spec) noexcept;
PhaseMode phase_mode(const ModelSpec& spec) noexcept;
bool is_rnn(const ModelSpec& spec) noexcept;

/// Softmax and SquareModulus produce normalized conditionals and allow
/// direct ancestral sampling.
bool is_normalizing(Activation g) noexcept;
bool is_normalizing(const ModelSpec& spec) noexcept;

ModelSpec with_sites(ModelSpec spec, int sites);
/// Sets the architecture knob swept by ensembles: d_h for RNNs, d_emb for ATFs.
ModelSpec with_arch(ModelSpec spec, int value);
int arch_value(const ModelSpec& spec) noexcept;

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(PhaseMode p) noexcept;
std::string_view to_string(RnnCell c) noexcept;
std::string_view to_string(AttentionKind k) noexcept;
Activation parse_activation(std::string_view s);
PhaseMode parse_phase_mode(std::string_view s);
RnnCell parse_cell(std::string_view s);
AttentionKind parse_attention(std::string_view s);

nlohmann::json spec_to_json(const ModelSpec& spec);
/// Strict: unknown keys raise ConfigError naming the key path under `where`.
ModelSpec spec_from_json(const nlohmann::json& j, std::string_view where = "spec");

/// FNV-1a hash of the canonical JSON form; identifies a spec in reports.
std::uint64_t spec_hash(const ModelSpec& spec);

} // namespace arnqs
