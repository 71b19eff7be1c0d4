#pragma once

#include <cmath>
#include <vector>

#include "arnqs/model.hpp"

namespace arnqs::testing {

inline Configs all_configs(int L)
{
    Configs c(Eigen::Index{1} << L, L);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (int n = 0; n < L; ++n) c(i, n) = static_cast<std::uint8_t>((i >> (L - 1 - n)) & 1);
    }
    return c;
}

inline std::vector<std::uint8_t> row(const Configs& c, Eigen::Index r)
{
    return {c.row(r).data(), c.row(r).data() + c.cols()};
}

/// A mix of architectures used by property tests.
inline std::vector<ModelSpec> spec_zoo(int L, Activation g)
{
    std::vector<ModelSpec> out;
    for (auto cell : {RnnCell::Vanilla, RnnCell::Gru}) {
        for (auto phase : {PhaseMode::Complex, PhaseMode::Positive}) {
            RnnSpec s;
            s.sites = L;
            s.hidden = 5;
            s.cell = cell;
            s.g = g;
            s.phase = phase;
            out.push_back(s);
        }
    }
    for (auto kind : {AttentionKind::Softmax, AttentionKind::Circulant}) {
        for (auto phase : {PhaseMode::Complex, PhaseMode::Positive}) {
            AtfSpec s;
            s.sites = L;
            s.d_emb = 4;
            s.heads = 2;
            s.attention = kind;
            s.g = g;
            s.phase = phase;
            s.d_fl = 6;
            out.push_back(s);
        }
    }
    return out;
}

} // namespace arnqs::testing
