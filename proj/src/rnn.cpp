#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "arnqs/activation.hpp"
#include "arnqs/error.hpp"
#include "model_detail.hpp"

namespace arnqs {

namespace detail {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix<double, 2, Eigen::Dynamic>;
using Eigen::Index;

constexpr Index kChunk = 4096;
constexpr Index kEnumChunk = 2048;

Mat apply_f(Activation f, const Mat& a)
{
    switch (f) {
    case Activation::Tanh:
        return a.array().tanh().matrix();
    case Activation::Relu:
        return a.cwiseMax(0.0);
    case Activation::Sigmoid:
        return a.unaryExpr([](double x) { return activate(Activation::Sigmoid, x); });
    default:
        return a;
    }
}

Mat apply_df(Activation f, const Mat& a, const Mat& y)
{
    switch (f) {
    case Activation::Tanh:
        return (1.0 - y.array().square()).matrix();
    case Activation::Relu:
        return (a.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid:
        return (y.array() * (1.0 - y.array())).matrix();
    default:
        return Mat::Ones(a.rows(), a.cols());
    }
}

Mat sigmoid(const Mat& a) { return apply_f(Activation::Sigmoid, a); }

/// Dense copies of the weights in column-major form. Gate k of a GRU is
/// z, r, c for k = 0, 1, 2; the vanilla cell only uses slot 0.
struct Net {
    const RnnSpec& spec;
    int d;
    bool gru;
    bool complex;
    std::array<Mat, 3> wh;
    std::array<Mat, 3> ws;
    std::array<Vec, 3> bias;
    Mat2 u;
    Eigen::Vector2d c;
    Mat2 v;
    Eigen::Vector2d dd;

    Net(const RnnSpec& s, const ParameterSet& p)
        : spec(s), d(s.hidden), gru(s.cell == RnnCell::Gru), complex(s.phase == PhaseMode::Complex)
    {
        auto load = [&](int k, const char* w, const char* b) {
            const auto m = p.matrix(w);
            wh[k] = m.leftCols(d);
            ws[k] = m.rightCols(2);
            bias[k] = p.vector(b);
        };
        if (gru) {
            load(0, "Wz", "bz");
            load(1, "Wr", "br");
            load(2, "Wc", "bc");
        } else {
            load(0, "W", "b");
        }
        u = p.matrix("U");
        c = p.vector("c");
        if (complex) {
            v = p.matrix("V");
            dd = p.vector("d");
        } else {
            v = Mat2::Zero(2, d);
            dd.setZero();
        }
    }

    /// Pre-activation of gate k: wh h + ws onehot(prev) + bias. `h` null and
    /// `prev` null stand for the zero boundary inputs of site 0.
    Mat gate_input(int k, const Mat* h, const std::uint8_t* prev, Index n) const
    {
        Mat a = h ? Mat((wh[k] * *h).colwise() + bias[k]) : Mat(bias[k].replicate(1, n));
        if (prev) {
            for (Index j = 0; j < n; ++j) a.col(j) += ws[k].col(prev[j]);
        }
        return a;
    }
};

/// Forward record of one site for a batch of columns.
struct Step {
    Mat a;  // vanilla pre-activation, GRU candidate pre-activation
    Mat h;  // new hidden state
    Mat z;  // GRU update gate
    Mat r;  // GRU reset gate
    Mat cand; // GRU candidate
};

void cell(const Net& net, const Mat* hprev, const std::uint8_t* prev, Index n, Step& out)
{
    const Activation f = net.spec.f;
    if (!net.gru) {
        out.a = net.gate_input(0, hprev, prev, n);
        out.h = apply_f(f, out.a);
        return;
    }
    out.z = sigmoid(net.gate_input(0, hprev, prev, n));
    out.r = sigmoid(net.gate_input(1, hprev, prev, n));
    if (hprev) {
        const Mat rh = out.r.cwiseProduct(*hprev);
        out.a = net.gate_input(2, &rh, prev, n);
    } else {
        out.a = net.gate_input(2, nullptr, prev, n);
    }
    out.cand = apply_f(f, out.a);
    if (hprev) {
        out.h = (*hprev + out.z.cwiseProduct(out.cand - *hprev)).eval();
    } else {
        out.h = out.z.cwiseProduct(out.cand);
    }
}

/// Runs the chain over `n` columns. `spin_at(site, column, r0, r1)` returns
/// the spin at that site, either read from data or sampled.
template <class SpinFn>
void run_chain(const Net& net, Index n, SpinFn&& spin_at, double* lm, double* ph, std::vector<Step>* tape)
{
    const int L = net.spec.sites;
    const Activation g = net.spec.g;
    std::vector<std::uint8_t> prev(static_cast<std::size_t>(n)), cur(static_cast<std::size_t>(n));
    Step local;
    const Mat* hprev = nullptr;
    Mat hkeep;
    for (int site = 0; site < L; ++site) {
        Step& st = tape ? (*tape)[static_cast<std::size_t>(site)] : local;
        cell(net, hprev, site == 0 ? nullptr : prev.data(), n, st);
        const Mat2 logits = (net.u * st.h).colwise() + net.c;
        Mat2 phases;
        if (net.complex) phases = (net.v * st.h).colwise() + net.dd;
        for (Index j = 0; j < n; ++j) {
            const int s = spin_at(site, j, logits(0, j), logits(1, j));
            cur[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(s);
            const HeadValue hv = head_select(g, logits(0, j), logits(1, j), s);
            lm[j] += hv.log_abs;
            if (net.complex) ph[j] += phases(s, j) + (hv.negative ? kPi : 0.0);
        }
        if (tape) {
            hprev = &st.h;
        } else {
            hkeep.swap(st.h);
            hprev = &hkeep;
        }
        prev.swap(cur);
    }
}

/// Hidden states of both children of parents [p0, p0 + m) of H, columns
/// ordered 2 p + s.
Mat children_hidden(const Net& net, const Mat& h, Index p0, Index m)
{
    if (!net.gru) {
        const Mat t = (net.wh[0] * h.middleCols(p0, m)).colwise() + net.bias[0];
        Mat a(net.d, 2 * m);
        for (Index p = 0; p < m; ++p) {
            a.col(2 * p) = t.col(p) + net.ws[0].col(0);
            a.col(2 * p + 1) = t.col(p) + net.ws[0].col(1);
        }
        return apply_f(net.spec.f, a);
    }
    Mat hexp(net.d, 2 * m);
    std::vector<std::uint8_t> spins(static_cast<std::size_t>(2 * m));
    for (Index p = 0; p < m; ++p) {
        hexp.col(2 * p) = h.col(p0 + p);
        hexp.col(2 * p + 1) = h.col(p0 + p);
        spins[static_cast<std::size_t>(2 * p)] = 0;
        spins[static_cast<std::size_t>(2 * p + 1)] = 1;
    }
    Step st;
    cell(net, &hexp, spins.data(), 2 * m, st);
    return std::move(st.h);
}

void enumerate_level(const Net& net, const Mat& h, const Vec& lm, const Vec& ph, int site, Index offset,
                     LogAmplitudes& out)
{
    const Index b = h.cols();
    const Mat2 logits = (net.u * h).colwise() + net.c;
    Mat2 phases;
    if (net.complex) phases = (net.v * h).colwise() + net.dd;
    Vec clm(2 * b), cph(2 * b);
    for (Index p = 0; p < b; ++p) {
        for (int s = 0; s < 2; ++s) {
            const HeadValue hv = head_select(net.spec.g, logits(0, p), logits(1, p), s);
            clm[2 * p + s] = lm[p] + hv.log_abs;
            cph[2 * p + s] = ph[p] + (net.complex ? phases(s, p) + (hv.negative ? kPi : 0.0) : 0.0);
        }
    }
    if (site == net.spec.sites - 1) {
        out.log_modulus_sq.segment(2 * offset, 2 * b) = clm;
        out.phase.segment(2 * offset, 2 * b) = cph;
        return;
    }
    const Index parts = 2 * b > kEnumChunk ? 2 : 1;
    const Index m = b / parts;
    for (Index k = 0; k < parts; ++k) {
        const Index p0 = k * m;
        const Mat hc = children_hidden(net, h, p0, m);
        enumerate_level(net, hc, clm.segment(2 * p0, 2 * m), cph.segment(2 * p0, 2 * m), site + 1,
                        2 * (offset + p0), out);
    }
}

/// Reverse pass over one chunk; accumulates into `grad` (laid out like Net).
struct Grad {
    std::array<Mat, 3> wh;
    std::array<Mat, 3> ws;
    std::array<Vec, 3> bias;
    Mat2 u;
    Eigen::Vector2d c;
    Mat2 v;
    Eigen::Vector2d dd;

    explicit Grad(const Net& net)
    {
        for (int k = 0; k < 3; ++k) {
            wh[k] = Mat::Zero(net.d, net.d);
            ws[k] = Mat::Zero(net.d, 2);
            bias[k] = Vec::Zero(net.d);
        }
        u = Mat2::Zero(2, net.d);
        v = Mat2::Zero(2, net.d);
        c.setZero();
        dd.setZero();
    }
};

void accumulate_gate(const Net& net, Grad& gr, int k, const Mat& da, const Mat* hin, const Configs& cfg, Index begin,
                     int site, Mat* dh_in)
{
    gr.bias[k] += da.rowwise().sum();
    if (site > 0) {
        for (Index j = 0; j < da.cols(); ++j) gr.ws[k].col(cfg(begin + j, site - 1)) += da.col(j);
    }
    if (hin) {
        gr.wh[k].noalias() += da * hin->transpose();
        if (dh_in) dh_in->noalias() += net.wh[k].transpose() * da;
    }
}

void backward_chunk(const Net& net, const Configs& cfg, Index begin, Index n, const std::vector<Step>& tape,
                    std::span<const double> wre, std::span<const double> wim, Grad& gr)
{
    const int L = net.spec.sites;
    const Activation g = net.spec.g;
    Mat dh = Mat::Zero(net.d, n);
    for (int site = L - 1; site >= 0; --site) {
        const Step& st = tape[static_cast<std::size_t>(site)];
        const Mat2 logits = (net.u * st.h).colwise() + net.c;
        Mat2 dr(2, n);
        Mat2 dp = Mat2::Zero(2, n);
        for (Index j = 0; j < n; ++j) {
            const int s = cfg(begin + j, site);
            const auto hg = head_select_grad(g, logits(0, j), logits(1, j), s);
            const double w = 0.5 * wre[static_cast<std::size_t>(begin + j)];
            dr(0, j) = w * hg[0];
            dr(1, j) = w * hg[1];
            if (net.complex) dp(s, j) = wim[static_cast<std::size_t>(begin + j)];
        }
        gr.u.noalias() += dr * st.h.transpose();
        gr.c += dr.rowwise().sum();
        dh.noalias() += net.u.transpose() * dr;
        if (net.complex) {
            gr.v.noalias() += dp * st.h.transpose();
            gr.dd += dp.rowwise().sum();
            dh.noalias() += net.v.transpose() * dp;
        }

        const Mat* hprev = site > 0 ? &tape[static_cast<std::size_t>(site - 1)].h : nullptr;
        if (!net.gru) {
            const Mat da = dh.cwiseProduct(apply_df(net.spec.f, st.a, st.h));
            Mat dprev = Mat::Zero(net.d, n);
            accumulate_gate(net, gr, 0, da, hprev, cfg, begin, site, &dprev);
            dh.swap(dprev);
            continue;
        }
        const Mat zero = hprev ? Mat() : Mat::Zero(net.d, n);
        const Mat& hp = hprev ? *hprev : zero;
        const Mat dz = dh.cwiseProduct(st.cand - hp);
        const Mat dcand = dh.cwiseProduct(st.z);
        Mat dprev = dh.cwiseProduct((1.0 - st.z.array()).matrix());
        const Mat dac = dcand.cwiseProduct(apply_df(net.spec.f, st.a, st.cand));
        const Mat rh = st.r.cwiseProduct(hp);
        gr.bias[2] += dac.rowwise().sum();
        if (site > 0) {
            for (Index j = 0; j < n; ++j) gr.ws[2].col(cfg(begin + j, site - 1)) += dac.col(j);
        }
        gr.wh[2].noalias() += dac * rh.transpose();
        const Mat drh = net.wh[2].transpose() * dac;
        const Mat dgr = drh.cwiseProduct(hp);
        dprev += drh.cwiseProduct(st.r);
        const Mat daz = dz.cwiseProduct(st.z.cwiseProduct((1.0 - st.z.array()).matrix()));
        const Mat dar = dgr.cwiseProduct(st.r.cwiseProduct((1.0 - st.r.array()).matrix()));
        accumulate_gate(net, gr, 0, daz, hprev, cfg, begin, site, &dprev);
        accumulate_gate(net, gr, 1, dar, hprev, cfg, begin, site, &dprev);
        dh.swap(dprev);
    }
}

} // namespace

void rnn_evaluate(const RnnSpec& spec, const ParameterSet& params, const Configs& configs, LogAmplitudes& out)
{
    const Net net(spec, params);
    const Index total = configs.rows();
    for (Index begin = 0; begin < total; begin += kChunk) {
        const Index n = std::min(kChunk, total - begin);
        auto spin_at = [&](int site, Index j, double, double) { return static_cast<int>(configs(begin + j, site)); };
        run_chain(net, n, spin_at, out.log_modulus_sq.data() + begin, out.phase.data() + begin, nullptr);
    }
}

void rnn_enumerate(const RnnSpec& spec, const ParameterSet& params, LogAmplitudes& out)
{
    const Net net(spec, params);
    Step root;
    cell(net, nullptr, nullptr, 1, root);
    enumerate_level(net, root.h, Vec::Zero(1), Vec::Zero(1), 0, 0, out);
}

void rnn_draw(const RnnSpec& spec, const ParameterSet& params, std::size_t count, RngStream& rng, Configs& configs,
              LogAmplitudes& out)
{
    const Net net(spec, params);
    const auto total = static_cast<Index>(count);
    for (Index begin = 0; begin < total; begin += kChunk) {
        const Index n = std::min(kChunk, total - begin);
        auto spin_at = [&](int site, Index j, double r0, double r1) {
            const int s = rng.uniform() < head_prob_one(spec.g, r0, r1) ? 1 : 0;
            configs(begin + j, site) = static_cast<std::uint8_t>(s);
            return s;
        };
        run_chain(net, n, spin_at, out.log_modulus_sq.data() + begin, out.phase.data() + begin, nullptr);
    }
}

void rnn_gradient(const RnnSpec& spec, const ParameterSet& params, const Configs& configs,
                  std::span<const double> weight_re, std::span<const double> weight_im, ParameterSet& grad)
{
    const Net net(spec, params);
    Grad gr(net);
    const Index total = configs.rows();
    std::vector<Step> tape(static_cast<std::size_t>(spec.sites));
    for (Index begin = 0; begin < total; begin += kChunk) {
        const Index n = std::min(kChunk, total - begin);
        Vec lm = Vec::Zero(n), ph = Vec::Zero(n);
        auto spin_at = [&](int site, Index j, double, double) { return static_cast<int>(configs(begin + j, site)); };
        run_chain(net, n, spin_at, lm.data(), ph.data(), &tape);
        backward_chunk(net, configs, begin, n, tape, weight_re, weight_im, gr);
    }
    auto store = [&](int k, const char* w, const char* b) {
        auto m = grad.matrix(w);
        m.leftCols(net.d) += gr.wh[k];
        m.rightCols(2) += gr.ws[k];
        grad.vector(b) += gr.bias[k];
    };
    if (net.gru) {
        store(0, "Wz", "bz");
        store(1, "Wr", "br");
        store(2, "Wc", "bc");
    } else {
        store(0, "W", "b");
    }
    grad.matrix("U") += gr.u;
    grad.vector("c") += gr.c;
    if (net.complex) {
        grad.matrix("V") += gr.v;
        grad.vector("d") += gr.dd;
    }
}

SiteOutputs rnn_site_outputs(const RnnSpec& spec, const ParameterSet& params, std::span<const std::uint8_t> spins)
{
    if (static_cast<int>(spins.size()) != spec.sites) throw Error("spin vector length does not match the model");
    SiteOutputs out;
    out.conditionals.resize(spec.sites, 2);
    out.phases.resize(spec.sites, 2);
    std::vector<double> h(static_cast<std::size_t>(spec.hidden), 0.0);
    std::array<double, 2> onehot{0.0, 0.0};
    for (int n = 0; n < spec.sites; ++n) {
        h = rnn_step(spec, params, h, onehot);
        const HeadOutputs ho = rnn_heads(spec, params, h);
        out.conditionals.row(n) << ho.conditional[0], ho.conditional[1];
        out.phases.row(n) << ho.phase[0], ho.phase[1];
        onehot = {0.0, 0.0};
        onehot[spins[static_cast<std::size_t>(n)] & 1u] = 1.0;
    }
    return out;
}

} // namespace detail

std::vector<double> rnn_step(const RnnSpec& spec, const ParameterSet& params, std::span<const double> h_prev,
                             std::span<const double> spin_prev)
{
    const auto d = static_cast<std::size_t>(spec.hidden);
    if (h_prev.size() != d || spin_prev.size() != 2) {
        throw Error(fmt::format("rnn_step expects h_prev of length {} and a 2-vector spin, got {} and {}", d,
                                h_prev.size(), spin_prev.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> h(h_prev.data(), static_cast<Eigen::Index>(d));
    const Eigen::Map<const Eigen::Vector2d> s(spin_prev.data());
    const int dh = spec.hidden;
    auto affine = [&](const char* w, const char* b, const Eigen::VectorXd& hin) {
        const auto m = params.matrix(w);
        return Eigen::VectorXd(m.leftCols(dh) * hin + m.rightCols(2) * s + params.vector(b));
    };
    auto f = [&](Activation a, const Eigen::VectorXd& x) {
        Eigen::VectorXd y(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = activate(a, x[i]);
        return y;
    };
    Eigen::VectorXd out;
    if (spec.cell == RnnCell::Vanilla) {
        out = f(spec.f, affine("W", "b", h));
    } else {
        const Eigen::VectorXd z = f(Activation::Sigmoid, affine("Wz", "bz", h));
        const Eigen::VectorXd r = f(Activation::Sigmoid, affine("Wr", "br", h));
        const Eigen::VectorXd cand = f(spec.f, affine("Wc", "bc", r.cwiseProduct(h)));
        out = h + z.cwiseProduct(cand - h);
    }
    return {out.data(), out.data() + out.size()};
}

HeadOutputs rnn_heads(const RnnSpec& spec, const ParameterSet& params, std::span<const double> h_in)
{
    if (h_in.size() != static_cast<std::size_t>(spec.hidden)) {
        throw Error(fmt::format("rnn_heads expects h of length {}, got {}", spec.hidden, h_in.size()));
    }
    const Eigen::Map<const Eigen::VectorXd> h(h_in.data(), spec.hidden);
    const Eigen::Vector2d logits = params.matrix("U") * h + params.vector("c");
    HeadOutputs out;
    const auto cond = activation_apply(spec.g, std::span<const double>(logits.data(), 2));
    out.conditional = {cond[0], cond[1]};
    if (spec.phase == PhaseMode::Complex) {
        const Eigen::Vector2d ph = params.matrix("V") * h + params.vector("d");
        out.phase = {ph[0], ph[1]};
    }
    return out;
}

} // namespace arnqs
