#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "arnqs/activation.hpp"
#include "arnqs/error.hpp"
#include "arnqs/model.hpp"
#include "test_util.hpp"

using namespace arnqs;
using arnqs::testing::all_configs;
using arnqs::testing::row;
using arnqs::testing::spec_zoo;

TEST(Activation, Examples)
{
    auto sm = activation_apply(Activation::Softmax, std::vector<double>{0.0, 0.0});
    EXPECT_DOUBLE_EQ(sm[0], 0.5);
    EXPECT_DOUBLE_EQ(sm[1], 0.5);
    auto mod = activation_apply(Activation::SquareModulus, std::vector<double>{3.0, 4.0});
    EXPECT_NEAR(mod[0], 0.36, 1e-15);
    EXPECT_NEAR(mod[1], 0.64, 1e-15);
    auto id = activation_apply(Activation::Identity, std::vector<double>{0.3, -0.2});
    EXPECT_EQ(id[0], 0.3);
    EXPECT_EQ(id[1], -0.2);
    auto big = activation_apply(Activation::SquareModulus, std::vector<double>{1e6, 2e6});
    EXPECT_NEAR(big[0], 0.2, 1e-15);
    EXPECT_NEAR(big[1], 0.8, 1e-15);
    auto zero = activation_apply(Activation::SquareModulus, std::vector<double>{0.0, 0.0});
    EXPECT_EQ(zero[0], 0.5);
}

TEST(Activation, SoftmaxShiftAndModScaleInvariance)
{
    RngStream rng(3);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> r{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const double c = rng.uniform(-50, 50);
        std::vector<double> shifted = r;
        for (double& v : shifted) v += c;
        const auto a = activation_apply(Activation::Softmax, r);
        const auto b = activation_apply(Activation::Softmax, shifted);
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
        EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 1.0, 1e-12);

        std::vector<double> scaled = r;
        for (double& v : scaled) v *= c;
        const auto m1 = activation_apply(Activation::SquareModulus, r);
        const auto m2 = activation_apply(Activation::SquareModulus, scaled);
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(m1[i], m2[i], 4e-16);
    }
}

TEST(Spec, JsonRoundTripAndErrors)
{
    AtfSpec a;
    a.sites = 12;
    a.d_emb = 8;
    a.attention = AttentionKind::Circulant;
    a.phase = PhaseMode::Positive;
    const ModelSpec s = a;
    EXPECT_EQ(spec_from_json(spec_to_json(s)), s);
    RnnSpec r;
    r.cell = RnnCell::Gru;
    r.g = Activation::SquareModulus;
    EXPECT_EQ(spec_from_json(spec_to_json(ModelSpec{r})), ModelSpec{r});

    auto j = nlohmann::json::parse(R"({"arch":"atf","sites":4,"d_emb":21,"heads":2})");
    try {
        spec_from_json(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("d_emb not divisible by heads"), std::string::npos);
    }
    auto bad = nlohmann::json::parse(R"({"arch":"rnn","sites":4,"hiden":3})");
    try {
        spec_from_json(bad, "model");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("model.hiden"), std::string::npos);
    }
}

TEST(Parameters, VanillaLayout)
{
    RnnSpec s;
    s.sites = 7;
    s.hidden = 4;
    const auto p = make_parameters(s);
    ASSERT_EQ(p.tensors().size(), 6u);
    EXPECT_EQ(p.info("W").shape, (std::vector<std::size_t>{4, 6}));
    EXPECT_EQ(p.info("b").shape, (std::vector<std::size_t>{4}));
    EXPECT_EQ(p.info("U").shape, (std::vector<std::size_t>{2, 4}));
    EXPECT_EQ(p.info("c").shape, (std::vector<std::size_t>{2}));
    EXPECT_EQ(p.info("V").shape, (std::vector<std::size_t>{2, 4}));
    EXPECT_EQ(p.info("d").shape, (std::vector<std::size_t>{2}));
    s.phase = PhaseMode::Positive;
    EXPECT_FALSE(make_parameters(s).contains("V"));
}

TEST(Parameters, RnnCountIndependentOfLength)
{
    for (auto cell : {RnnCell::Vanilla, RnnCell::Gru}) {
        RnnSpec s;
        s.hidden = 9;
        s.cell = cell;
        s.sites = 4;
        const auto n4 = make_parameters(s).total_count();
        s.sites = 256;
        EXPECT_EQ(make_parameters(s).total_count(), n4);
    }
}

TEST(Parameters, AttentionCounts)
{
    AtfSpec s;
    s.sites = 16;
    s.d_emb = 16;
    s.heads = 2;
    auto soft = attention_parameter_count(s);
    EXPECT_EQ(soft.score + soft.value, 3u * 2 * 16 * 8);
    s.attention = AttentionKind::Circulant;
    auto circ = attention_parameter_count(s);
    EXPECT_EQ(circ.score, 2u * 16);
    EXPECT_EQ(circ.value, 2u * 16 * 8);
    const auto p = make_parameters(s);
    EXPECT_EQ(p.info("kernel.1").shape, (std::vector<std::size_t>{16}));
    EXPECT_FALSE(p.contains("Wq.0"));
}

TEST(Parameters, SerializationRoundTrip)
{
    RngStream rng(11);
    AtfSpec s;
    s.sites = 5;
    s.d_emb = 4;
    const auto p = init_gaussian(s, 0.7, rng);
    const auto path = std::filesystem::temp_directory_path() / "arnqs_params_roundtrip.bin";
    save_model(path, s, p);
    const auto [s2, p2] = load_model(path);
    EXPECT_EQ(s2, ModelSpec{s});
    EXPECT_EQ(p2, p);
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
}

TEST(Init, GaussianStatistics)
{
    RnnSpec s;
    s.sites = 10;
    s.hidden = 40;
    RngStream a(5), b(5);
    const auto p = init_gaussian(s, 1.0, a);
    ASSERT_GE(p.total_count(), 1000u);
    EXPECT_EQ(p, init_gaussian(s, 1.0, b));
    std::vector<double> all(p.values().begin(), p.values().end());
    RnnSpec big = s;
    big.cell = RnnCell::Gru;
    while (all.size() < 10000u) {
        const auto q = init_gaussian(big, 1.0, a);
        all.insert(all.end(), q.values().begin(), q.values().end());
    }
    ASSERT_GE(all.size(), 10000u);
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / all.size();
    double var = 0.0;
    for (double v : all) var += (v - mean) * (v - mean);
    EXPECT_NEAR(std::sqrt(var / all.size()), 1.0, 0.02);

    RngStream c(1);
    const auto zero = init_gaussian(s, 0.0, c);
    for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(Init, XavierGlorotBounds)
{
    RnnSpec s;
    s.sites = 4;
    s.hidden = 2; // W fan-in 4
    RngStream rng(9);
    double wmax = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto p = init_xavier_glorot(s, rng);
        for (double v : p.tensor("W")) {
            EXPECT_LE(std::abs(v), 0.5);
            wmax = std::max(wmax, std::abs(v));
        }
        for (double v : p.tensor("b")) EXPECT_EQ(v, 0.0);
    }
    EXPECT_GT(wmax, 0.48);

    AtfSpec a;
    a.sites = 1; // circulant kernel fan-in 1
    a.d_emb = 2;
    a.attention = AttentionKind::Circulant;
    EXPECT_EQ(fan_in(a, "kernel.0"), 1);
    const auto pa = init_xavier_glorot(a, rng);
    for (double v : pa.tensor("kernel.0")) EXPECT_LE(std::abs(v), 1.0);
    for (double v : pa.tensor("ln1.gain")) EXPECT_EQ(v, 1.0);

    RnnSpec wide;
    wide.sites = 2;
    wide.hidden = 200;
    const auto pw = init_xavier_glorot(wide, rng);
    const auto w = pw.tensor("W");
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / w.size();
    const double range = 2.0 / std::sqrt(202.0);
    EXPECT_LE(std::abs(mean), 4.0 * (range / std::sqrt(12.0)) / std::sqrt(static_cast<double>(w.size())));
}

TEST(Rnn, StepExamples)
{
    RnnSpec s;
    s.sites = 3;
    s.hidden = 3;
    auto p = make_parameters(s);
    const std::vector<double> h{0.2, -0.4, 0.9};
    const std::vector<double> spin{0.0, 1.0};
    for (double v : rnn_step(s, p, h, spin)) EXPECT_EQ(v, 0.0);
    s.f = Activation::Identity;
    auto w = p.matrix("W");
    w.leftCols(3).setIdentity();
    const auto out = rnn_step(s, p, h, spin);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(out[i], h[i]);
    EXPECT_THROW(rnn_step(s, p, std::vector<double>{1.0}, spin), Error);
}

TEST(Rnn, StepMatchesDenseOracle)
{
    RngStream rng(21);
    for (int t = 0; t < 20; ++t) {
        RnnSpec s;
        s.sites = 4;
        s.hidden = 7;
        const auto p = init_gaussian(s, 0.8, rng);
        std::vector<double> h(7), spin{0.0, 0.0};
        for (double& v : h) v = rng.uniform(-1, 1);
        spin[t % 2] = 1.0;
        const auto got = rnn_step(s, p, h, spin);
        const auto W = p.tensor("W");
        const auto b = p.tensor("b");
        for (int i = 0; i < 7; ++i) {
            double acc = b[i];
            for (int j = 0; j < 7; ++j) acc += W[i * 9 + j] * h[j];
            acc += W[i * 9 + 7] * spin[0] + W[i * 9 + 8] * spin[1];
            EXPECT_NEAR(got[i], std::tanh(acc), 1e-12);
        }
    }
}

TEST(Rnn, GruStepMatchesOracle)
{
    RngStream rng(22);
    RnnSpec s;
    s.sites = 4;
    s.hidden = 5;
    s.cell = RnnCell::Gru;
    const auto p = init_gaussian(s, 0.8, rng);
    std::vector<double> h(5), x(7, 0.0);
    for (double& v : h) v = rng.uniform(-1, 1);
    const std::vector<double> spin{1.0, 0.0};
    auto affine = [&](const char* w, const char* b, const std::vector<double>& hin, int i) {
        const auto W = p.tensor(w);
        double acc = p.tensor(b)[i];
        for (int j = 0; j < 5; ++j) acc += W[i * 7 + j] * hin[j];
        return acc + W[i * 7 + 5] * spin[0] + W[i * 7 + 6] * spin[1];
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> r(5), rh(5);
    for (int i = 0; i < 5; ++i) {
        r[i] = sig(affine("Wr", "br", h, i));
        rh[i] = r[i] * h[i];
    }
    const auto got = rnn_step(s, p, h, spin);
    for (int i = 0; i < 5; ++i) {
        const double z = sig(affine("Wz", "bz", h, i));
        const double c = std::tanh(affine("Wc", "bc", rh, i));
        EXPECT_NEAR(got[i], (1 - z) * h[i] + z * c, 1e-12);
    }
}

TEST(Rnn, HeadsExamples)
{
    RnnSpec s;
    s.sites = 2;
    s.hidden = 2;
    auto p = make_parameters(s);
    const std::vector<double> h{0.3, 0.1};
    auto out = rnn_heads(s, p, h);
    EXPECT_EQ(out.conditional[0], 0.5);
    EXPECT_EQ(out.conditional[1], 0.5);
    s.g = Activation::SquareModulus;
    p.vector("c") << 1.0, 2.0;
    out = rnn_heads(s, p, h);
    EXPECT_NEAR(out.conditional[0], 0.2, 1e-15);
    EXPECT_NEAR(out.conditional[1], 0.8, 1e-15);
    s.phase = PhaseMode::Positive;
    auto pp = make_parameters(s);
    pp.matrix("U").setConstant(0.7);
    out = rnn_heads(s, pp, h);
    EXPECT_EQ(out.phase[0], 0.0);
    EXPECT_EQ(out.phase[1], 0.0);
}

TEST(Amplitude, ZeroWidthIsUniform)
{
    RnnSpec s;
    s.sites = 10;
    s.hidden = 6;
    RngStream rng(1);
    const auto p = init_gaussian(s, 0.0, rng);
    std::vector<std::uint8_t> spins(10);
    for (int t = 0; t < 5; ++t) {
        for (auto& v : spins) v = static_cast<std::uint8_t>(rng.below(2));
        const auto a = amplitude(s, p, spins);
        EXPECT_NEAR(a.modulus_sq, std::ldexp(1.0, -10), 1e-18);
        EXPECT_EQ(a.phase, 0.0);
    }
}

TEST(Amplitude, PositiveModeIsReal)
{
    RngStream rng(2);
    for (const auto& spec : spec_zoo(6, Activation::Softmax)) {
        if (phase_mode(spec) != PhaseMode::Positive) continue;
        const auto p = init_gaussian(spec, 1.0, rng);
        const auto c = all_configs(6);
        for (Eigen::Index i = 0; i < c.rows(); i += 7) {
            const auto a = amplitude(spec, p, row(c, i));
            EXPECT_EQ(a.value.imag(), 0.0);
            EXPECT_GE(a.value.real(), 0.0);
        }
    }
}

TEST(Amplitude, IdentityFoldsNegativeSignsIntoPhase)
{
    RnnSpec s;
    s.sites = 2;
    s.hidden = 1;
    s.g = Activation::Identity;
    auto p = make_parameters(s);
    p.vector("c") << -0.5, 0.25;
    const auto a = amplitude(s, p, std::vector<std::uint8_t>{0, 1});
    EXPECT_FALSE(a.normalized);
    EXPECT_NEAR(a.modulus_sq, 0.125, 1e-15);
    EXPECT_NEAR(a.phase, M_PI, 1e-15);
}

TEST(Amplitude, NormalizationByEnumeration)
{
    RngStream rng(31);
    for (auto g : {Activation::Softmax, Activation::SquareModulus}) {
        for (const auto& spec : spec_zoo(8, g)) {
            for (double sigma : {0.3, 1.0, 4.0}) {
                const auto p = init_gaussian(spec, sigma, rng);
                const auto amps = enumerate_log_amplitudes(spec, p);
                EXPECT_NEAR(amps.log_modulus_sq.array().exp().sum(), 1.0, 1e-10);
            }
        }
    }
}

TEST(Amplitude, EnumerationMatchesPointwiseEvaluation)
{
    RngStream rng(32);
    for (auto g : {Activation::Softmax, Activation::Identity}) {
        for (const auto& spec : spec_zoo(7, g)) {
            const auto p = init_gaussian(spec, 0.9, rng);
            const auto amps = enumerate_log_amplitudes(spec, p);
            const auto c = all_configs(7);
            const auto direct = log_amplitudes(spec, p, c);
            for (Eigen::Index i = 0; i < c.rows(); ++i) {
                EXPECT_NEAR(amps.log_modulus_sq[i], direct.log_modulus_sq[i], 1e-11);
                EXPECT_NEAR(std::remainder(amps.phase[i] - direct.phase[i], 2 * M_PI), 0.0, 1e-11);
            }
            for (Eigen::Index i = 0; i < c.rows(); i += 17) {
                const auto so = site_outputs(spec, p, row(c, i));
                double lm = 0.0;
                for (int n = 0; n < 7; ++n) lm += std::log(std::abs(so.conditionals(n, c(i, n))));
                EXPECT_NEAR(lm, direct.log_modulus_sq[i], 1e-11);
            }
        }
    }
}

TEST(Amplitude, LargeEnumerationNormalized)
{
    RnnSpec s;
    s.sites = 14; // exercises the chunked enumeration path
    s.hidden = 6;
    RngStream rng(4);
    const auto p = init_gaussian(s, 1.0, rng);
    const auto amps = enumerate_log_amplitudes(s, p);
    EXPECT_NEAR(amps.log_modulus_sq.array().exp().sum(), 1.0, 1e-10);
    const auto c = all_configs(14);
    const auto direct = log_amplitudes(s, p, c);
    EXPECT_LT((amps.log_modulus_sq - direct.log_modulus_sq).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Atf, ZeroParametersGiveUniformConditionals)
{
    for (auto kind : {AttentionKind::Softmax, AttentionKind::Circulant}) {
        AtfSpec s;
        s.sites = 6;
        s.d_emb = 4;
        s.attention = kind;
        const auto p = make_parameters(s);
        const auto out = atf_forward(s, p, std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0});
        for (int n = 0; n < 6; ++n) {
            EXPECT_EQ(out.conditionals(n, 0), 0.5);
            EXPECT_EQ(out.conditionals(n, 1), 0.5);
        }
    }
}

TEST(Atf, RejectsIndivisibleHeads)
{
    AtfSpec s;
    s.d_emb = 21;
    s.heads = 2;
    EXPECT_THROW(make_parameters(s), ConfigError);
}

TEST(Causality, ConditionalsIgnoreLaterSpins)
{
    RngStream rng(41);
    for (const auto& spec : spec_zoo(9, Activation::Softmax)) {
        for (int t = 0; t < 5; ++t) {
            const auto p = init_gaussian(spec, 1.5, rng);
            std::vector<std::uint8_t> spins(9);
            for (auto& v : spins) v = static_cast<std::uint8_t>(rng.below(2));
            const auto base = site_outputs(spec, p, spins);
            for (int n = 0; n < 9; ++n) {
                auto mutated = spins;
                for (int k = n; k < 9; ++k) mutated[k] = static_cast<std::uint8_t>(rng.below(2));
                mutated[n] ^= 1u;
                const auto out = site_outputs(spec, p, mutated);
                for (int m = 0; m <= n; ++m) {
                    EXPECT_EQ(out.conditionals(m, 0), base.conditionals(m, 0));
                    EXPECT_EQ(out.conditionals(m, 1), base.conditionals(m, 1));
                    EXPECT_EQ(out.phases(m, 0), base.phases(m, 0));
                    EXPECT_EQ(out.phases(m, 1), base.phases(m, 1));
                }
            }
        }
    }
}

namespace {

/// sum_s a_s Re ln Psi + b_s Im ln Psi evaluated directly.
double weighted_log(const ModelSpec& spec, const ParameterSet& p, const Configs& c, const std::vector<double>& a,
                    const std::vector<double>& b)
{
    const auto amps = log_amplitudes(spec, p, c);
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        acc += a[i] * 0.5L * amps.log_modulus_sq[i] + b[i] * static_cast<long double>(amps.phase[i]);
    }
    return static_cast<double>(acc);
}

void check_gradient(const ModelSpec& spec, double sigma, std::uint64_t seed)
{
    RngStream rng(seed);
    auto p = init_gaussian(spec, sigma, rng);
    const int L = sites(spec);
    Configs c(12, L);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = static_cast<std::uint8_t>(rng.below(2));
    std::vector<double> a(12), b(12);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    const auto grad = log_amplitude_gradient(spec, p, c, a, b);
    ASSERT_EQ(grad.size(), p.total_count());
    const double h = 1e-6;
    for (std::size_t k = 0; k < grad.size(); ++k) {
        const double saved = p.values()[k];
        p.values()[k] = saved + h;
        const double up = weighted_log(spec, p, c, a, b);
        p.values()[k] = saved - h;
        const double down = weighted_log(spec, p, c, a, b);
        p.values()[k] = saved;
        const double fd = (up - down) / (2 * h);
        EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "coordinate " << k;
    }
}

} // namespace

TEST(Gradient, MatchesFiniteDifferences)
{
    std::uint64_t seed = 100;
    for (auto g : {Activation::Softmax, Activation::SquareModulus}) {
        for (const auto& spec : spec_zoo(5, g)) check_gradient(spec, 0.7, ++seed);
    }
    RnnSpec relu;
    relu.sites = 4;
    relu.hidden = 3;
    relu.f = Activation::Sigmoid;
    relu.g = Activation::Identity;
    check_gradient(relu, 0.5, 7);
    AtfSpec atf;
    atf.sites = 4;
    atf.d_emb = 6;
    atf.heads = 3;
    atf.f_fl = Activation::Tanh;
    check_gradient(atf, 0.6, 8);
}
