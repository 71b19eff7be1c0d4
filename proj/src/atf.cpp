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
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::RowVectorXd;
using Eigen::Index;

constexpr double kLayerNormEps = 1e-5;
constexpr int kStartToken = 2;

struct Net {
    const AtfSpec& spec;
    int L, d, heads, dk, dff;
    bool circulant, complex;
    double scale;
    RowMat embed; // 2 x d
    RowMat pe;    // L x d
    Mat wq, wk, wv; // d x d, head i in columns [i dk, (i+1) dk)
    std::vector<Vec> kernel;
    RowVec g1, b1n, g2, b2n;
    Mat w1, w2, w3, w4;
    RowVec b1, b2, c3, d4;

    Net(const AtfSpec& s, const ParameterSet& p)
        : spec(s), L(s.sites), d(s.d_emb), heads(s.heads), dk(s.d_k()), dff(s.ffl_width()),
          circulant(s.attention == AttentionKind::Circulant), complex(s.phase == PhaseMode::Complex),
          scale(1.0 / std::sqrt(static_cast<double>(s.d_k())))
    {
        embed = p.matrix("embed");
        pe.resize(L, d);
        for (int n = 0; n < L; ++n) {
            for (int i = 0; i < d; i += 2) {
                const double angle = n / std::pow(10000.0, static_cast<double>(i) / d);
                pe(n, i) = std::sin(angle);
                if (i + 1 < d) pe(n, i + 1) = std::cos(angle);
            }
        }
        wq = Mat::Zero(d, d);
        wk = Mat::Zero(d, d);
        wv.resize(d, d);
        for (int i = 0; i < heads; ++i) {
            if (circulant) {
                kernel.push_back(p.vector(fmt::format("kernel.{}", i)));
            } else {
                wq.middleCols(i * dk, dk) = p.matrix(fmt::format("Wq.{}", i));
                wk.middleCols(i * dk, dk) = p.matrix(fmt::format("Wk.{}", i));
            }
            wv.middleCols(i * dk, dk) = p.matrix(fmt::format("Wv.{}", i));
        }
        g1 = p.vector("ln1.gain").transpose();
        b1n = p.vector("ln1.bias").transpose();
        g2 = p.vector("ln2.gain").transpose();
        b2n = p.vector("ln2.bias").transpose();
        w1 = p.matrix("W1");
        b1 = p.vector("b1").transpose();
        w2 = p.matrix("W2");
        b2 = p.vector("b2").transpose();
        w3 = p.matrix("W3");
        c3 = p.vector("c3").transpose();
        if (complex) {
            w4 = p.matrix("W4");
            d4 = p.vector("d4").transpose();
        } else {
            w4 = Mat::Zero(d, 2);
            d4 = RowVec::Zero(2);
        }
    }
};

/// Activations of every row of one pass. Row n depends only on rows <= n
/// and on the spin fed into row n, so rows may be recomputed in place while
/// walking a prefix tree.
struct State {
    RowMat x0, q, k, v, mha, xh1, x1, p1, f1, xh2, x2, logits, phases;
    std::vector<RowMat> attn; // per head, L x L, zero above the diagonal
    Vec rs1, rs2;
    std::vector<int> input; // spin fed into each row

    explicit State(const Net& net)
    {
        const int L = net.L;
        for (RowMat* m : {&x0, &q, &k, &v, &mha, &xh1, &x1, &xh2, &x2}) m->setZero(L, net.d);
        p1.setZero(L, net.dff);
        f1.setZero(L, net.dff);
        logits.setZero(L, 2);
        phases.setZero(L, 2);
        attn.assign(static_cast<std::size_t>(net.heads), RowMat::Zero(L, L));
        rs1.setZero(L);
        rs2.setZero(L);
        input.assign(static_cast<std::size_t>(L), kStartToken);
    }
};

template <class Row>
double layer_norm(const Row& y, const RowVec& gain, const RowVec& bias, RowVec& xh, RowVec& x)
{
    const double mu = y.mean();
    const double var = (y.array() - mu).square().mean();
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    xh = (y.array() - mu) * rs;
    x = xh.cwiseProduct(gain) + bias;
    return rs;
}

RowVec apply_f(Activation f, const RowVec& a)
{
    RowVec y(a.size());
    for (Index i = 0; i < a.size(); ++i) y[i] = activate(f, a[i]);
    return y;
}

void compute_row(const Net& net, State& st, int n, int spin_in)
{
    st.input[static_cast<std::size_t>(n)] = spin_in;
    st.x0.row(n) = net.pe.row(n);
    if (spin_in != kStartToken) st.x0.row(n) += net.embed.row(spin_in);
    if (!net.circulant) {
        st.q.row(n).noalias() = st.x0.row(n) * net.wq;
        st.k.row(n).noalias() = st.x0.row(n) * net.wk;
    }
    st.v.row(n).noalias() = st.x0.row(n) * net.wv;
    for (int i = 0; i < net.heads; ++i) {
        auto a = st.attn[static_cast<std::size_t>(i)].row(n);
        const Index off = static_cast<Index>(i) * net.dk;
        if (net.circulant) {
            const Vec& r = net.kernel[static_cast<std::size_t>(i)];
            for (int j = 0; j <= n; ++j) a[j] = r[n - j];
        } else {
            double m = -std::numeric_limits<double>::infinity();
            for (int j = 0; j <= n; ++j) {
                a[j] = net.scale * st.q.row(n).segment(off, net.dk).dot(st.k.row(j).segment(off, net.dk));
                m = std::max(m, a[j]);
            }
            double sum = 0.0;
            for (int j = 0; j <= n; ++j) {
                a[j] = std::exp(a[j] - m);
                sum += a[j];
            }
            for (int j = 0; j <= n; ++j) a[j] /= sum;
        }
        auto head = st.mha.row(n).segment(off, net.dk);
        head.setZero();
        for (int j = 0; j <= n; ++j) head += a[j] * st.v.row(j).segment(off, net.dk);
    }
    RowVec xh, x;
    st.rs1[n] = layer_norm(st.x0.row(n) + st.mha.row(n), net.g1, net.b1n, xh, x);
    st.xh1.row(n) = xh;
    st.x1.row(n) = x;
    st.p1.row(n).noalias() = st.x1.row(n) * net.w1;
    st.p1.row(n) += net.b1;
    st.f1.row(n) = apply_f(net.spec.f_fl, st.p1.row(n));
    RowVec y2 = st.x1.row(n) + net.b2;
    y2.noalias() += st.f1.row(n) * net.w2;
    st.rs2[n] = layer_norm(y2, net.g2, net.b2n, xh, x);
    st.xh2.row(n) = xh;
    st.x2.row(n) = x;
    st.logits.row(n).noalias() = st.x2.row(n) * net.w3;
    st.logits.row(n) += net.c3;
    if (net.complex) {
        st.phases.row(n).noalias() = st.x2.row(n) * net.w4;
        st.phases.row(n) += net.d4;
    }
}

void forward_all(const Net& net, State& st, std::span<const std::uint8_t> spins)
{
    for (int n = 0; n < net.L; ++n) compute_row(net, st, n, n == 0 ? kStartToken : spins[static_cast<std::size_t>(n - 1)]);
}

/// Adds the contribution of row n selecting spin s to (lm, ph).
void accumulate_site(const Net& net, const State& st, int n, int s, double& lm, double& ph)
{
    const HeadValue hv = head_select(net.spec.g, st.logits(n, 0), st.logits(n, 1), s);
    lm += hv.log_abs;
    if (net.complex) ph += st.phases(n, s) + (hv.negative ? kPi : 0.0);
}

void dfs(const Net& net, State& st, int n, double lm, double ph, Index index, LogAmplitudes& out)
{
    for (int s = 0; s < 2; ++s) {
        double l2 = lm, p2 = ph;
        accumulate_site(net, st, n, s, l2, p2);
        const Index child = 2 * index + s;
        if (n == net.L - 1) {
            out.log_modulus_sq[child] = l2;
            out.phase[child] = p2;
        } else {
            compute_row(net, st, n + 1, s);
            dfs(net, st, n + 1, l2, p2, child, out);
        }
    }
}

RowMat layer_norm_backward(const RowMat& dx, const RowMat& xh, const Vec& rs, const RowVec& gain, RowVec& dgain,
                           RowVec& dbias)
{
    dgain += dx.cwiseProduct(xh).colwise().sum();
    dbias += dx.colwise().sum();
    RowMat dy(dx.rows(), dx.cols());
    const double inv_d = 1.0 / static_cast<double>(dx.cols());
    for (Index n = 0; n < dx.rows(); ++n) {
        const RowVec dxh = dx.row(n).cwiseProduct(gain);
        const double m1 = dxh.sum() * inv_d;
        const double m2 = dxh.dot(xh.row(n)) * inv_d;
        dy.row(n) = rs[n] * (dxh.array() - m1 - xh.row(n).array() * m2);
    }
    return dy;
}

struct Grad {
    RowMat embed;
    Mat wq, wk, wv;
    std::vector<Vec> kernel;
    RowVec g1, b1n, g2, b2n, b1, b2, c3, d4;
    Mat w1, w2, w3, w4;

    explicit Grad(const Net& net)
    {
        embed.setZero(2, net.d);
        wq.setZero(net.d, net.d);
        wk.setZero(net.d, net.d);
        wv.setZero(net.d, net.d);
        kernel.assign(net.circulant ? static_cast<std::size_t>(net.heads) : 0, Vec::Zero(net.L));
        for (RowVec* v : {&g1, &b1n, &g2, &b2n, &b2}) v->setZero(net.d);
        b1.setZero(net.dff);
        c3.setZero(2);
        d4.setZero(2);
        w1.setZero(net.d, net.dff);
        w2.setZero(net.dff, net.d);
        w3.setZero(net.d, 2);
        w4.setZero(net.d, 2);
    }
};

void backward(const Net& net, const State& st, std::span<const std::uint8_t> spins, double wre, double wim, Grad& gr)
{
    const int L = net.L;
    RowMat dlogits(L, 2), dphases = RowMat::Zero(L, 2);
    for (int n = 0; n < L; ++n) {
        const int s = spins[static_cast<std::size_t>(n)];
        const auto hg = head_select_grad(net.spec.g, st.logits(n, 0), st.logits(n, 1), s);
        dlogits(n, 0) = 0.5 * wre * hg[0];
        dlogits(n, 1) = 0.5 * wre * hg[1];
        if (net.complex) dphases(n, s) = wim;
    }
    gr.w3.noalias() += st.x2.transpose() * dlogits;
    gr.c3 += dlogits.colwise().sum();
    RowMat dx2 = dlogits * net.w3.transpose();
    if (net.complex) {
        gr.w4.noalias() += st.x2.transpose() * dphases;
        gr.d4 += dphases.colwise().sum();
        dx2.noalias() += dphases * net.w4.transpose();
    }
    const RowMat dy2 = layer_norm_backward(dx2, st.xh2, st.rs2, net.g2, gr.g2, gr.b2n);
    gr.w2.noalias() += st.f1.transpose() * dy2;
    gr.b2 += dy2.colwise().sum();
    RowMat dp1 = dy2 * net.w2.transpose();
    for (Index n = 0; n < dp1.rows(); ++n) {
        for (Index i = 0; i < dp1.cols(); ++i) {
            dp1(n, i) *= activate_derivative(net.spec.f_fl, st.p1(n, i), st.f1(n, i));
        }
    }
    gr.w1.noalias() += st.x1.transpose() * dp1;
    gr.b1 += dp1.colwise().sum();
    RowMat dx1 = dy2;
    dx1.noalias() += dp1 * net.w1.transpose();
    const RowMat dy1 = layer_norm_backward(dx1, st.xh1, st.rs1, net.g1, gr.g1, gr.b1n);

    RowMat dx0 = dy1;
    RowMat dq = RowMat::Zero(L, net.d), dk = RowMat::Zero(L, net.d), dv(L, net.d);
    for (int i = 0; i < net.heads; ++i) {
        const Index off = static_cast<Index>(i) * net.dk;
        const RowMat& a = st.attn[static_cast<std::size_t>(i)];
        const auto dhead = dy1.middleCols(off, net.dk);
        dv.middleCols(off, net.dk).noalias() = a.transpose() * dhead;
        RowMat da = dhead * st.v.middleCols(off, net.dk).transpose();
        if (net.circulant) {
            Vec& gk = gr.kernel[static_cast<std::size_t>(i)];
            for (int n = 0; n < L; ++n) {
                for (int j = 0; j <= n; ++j) gk[n - j] += da(n, j);
            }
            continue;
        }
        RowMat ds = RowMat::Zero(L, L);
        for (int n = 0; n < L; ++n) {
            double dot = 0.0;
            for (int j = 0; j <= n; ++j) dot += a(n, j) * da(n, j);
            for (int j = 0; j <= n; ++j) ds(n, j) = net.scale * a(n, j) * (da(n, j) - dot);
        }
        dq.middleCols(off, net.dk).noalias() = ds * st.k.middleCols(off, net.dk);
        dk.middleCols(off, net.dk).noalias() = ds.transpose() * st.q.middleCols(off, net.dk);
    }
    gr.wv.noalias() += st.x0.transpose() * dv;
    dx0.noalias() += dv * net.wv.transpose();
    if (!net.circulant) {
        gr.wq.noalias() += st.x0.transpose() * dq;
        gr.wk.noalias() += st.x0.transpose() * dk;
        dx0.noalias() += dq * net.wq.transpose();
        dx0.noalias() += dk * net.wk.transpose();
    }
    for (int n = 1; n < L; ++n) gr.embed.row(spins[static_cast<std::size_t>(n - 1)]) += dx0.row(n);
}

std::span<const std::uint8_t> row_span(const Configs& c, Index r)
{
    return {c.data() + r * c.cols(), static_cast<std::size_t>(c.cols())};
}

} // namespace

void atf_evaluate(const AtfSpec& spec, const ParameterSet& params, const Configs& configs, LogAmplitudes& out)
{
    const Net net(spec, params);
    State st(net);
    for (Index r = 0; r < configs.rows(); ++r) {
        const auto spins = row_span(configs, r);
        double lm = 0.0, ph = 0.0;
        for (int n = 0; n < net.L; ++n) {
            compute_row(net, st, n, n == 0 ? kStartToken : spins[static_cast<std::size_t>(n - 1)]);
            accumulate_site(net, st, n, spins[static_cast<std::size_t>(n)], lm, ph);
        }
        out.log_modulus_sq[r] = lm;
        out.phase[r] = ph;
    }
}

void atf_enumerate(const AtfSpec& spec, const ParameterSet& params, LogAmplitudes& out)
{
    const Net net(spec, params);
    State st(net);
    compute_row(net, st, 0, kStartToken);
    dfs(net, st, 0, 0.0, 0.0, 0, out);
}

void atf_draw(const AtfSpec& spec, const ParameterSet& params, std::size_t count, RngStream& rng, Configs& configs,
              LogAmplitudes& out)
{
    const Net net(spec, params);
    State st(net);
    for (Index r = 0; r < static_cast<Index>(count); ++r) {
        double lm = 0.0, ph = 0.0;
        int prev = kStartToken;
        for (int n = 0; n < net.L; ++n) {
            compute_row(net, st, n, prev);
            const int s = rng.uniform() < head_prob_one(spec.g, st.logits(n, 0), st.logits(n, 1)) ? 1 : 0;
            configs(r, n) = static_cast<std::uint8_t>(s);
            accumulate_site(net, st, n, s, lm, ph);
            prev = s;
        }
        out.log_modulus_sq[r] = lm;
        out.phase[r] = ph;
    }
}

void atf_gradient(const AtfSpec& spec, const ParameterSet& params, const Configs& configs,
                  std::span<const double> weight_re, std::span<const double> weight_im, ParameterSet& grad)
{
    const Net net(spec, params);
    State st(net);
    Grad gr(net);
    for (Index r = 0; r < configs.rows(); ++r) {
        const auto spins = row_span(configs, r);
        forward_all(net, st, spins);
        backward(net, st, spins, weight_re[static_cast<std::size_t>(r)], weight_im[static_cast<std::size_t>(r)], gr);
    }
    grad.matrix("embed") += gr.embed;
    for (int i = 0; i < net.heads; ++i) {
        const Index off = static_cast<Index>(i) * net.dk;
        if (net.circulant) {
            grad.vector(fmt::format("kernel.{}", i)) += gr.kernel[static_cast<std::size_t>(i)];
        } else {
            grad.matrix(fmt::format("Wq.{}", i)) += gr.wq.middleCols(off, net.dk);
            grad.matrix(fmt::format("Wk.{}", i)) += gr.wk.middleCols(off, net.dk);
        }
        grad.matrix(fmt::format("Wv.{}", i)) += gr.wv.middleCols(off, net.dk);
    }
    grad.vector("ln1.gain") += gr.g1.transpose();
    grad.vector("ln1.bias") += gr.b1n.transpose();
    grad.matrix("W1") += gr.w1;
    grad.vector("b1") += gr.b1.transpose();
    grad.matrix("W2") += gr.w2;
    grad.vector("b2") += gr.b2.transpose();
    grad.vector("ln2.gain") += gr.g2.transpose();
    grad.vector("ln2.bias") += gr.b2n.transpose();
    grad.matrix("W3") += gr.w3;
    grad.vector("c3") += gr.c3.transpose();
    if (net.complex) {
        grad.matrix("W4") += gr.w4;
        grad.vector("d4") += gr.d4.transpose();
    }
}

} // namespace detail

SiteOutputs atf_forward(const AtfSpec& spec, const ParameterSet& params, std::span<const std::uint8_t> spins)
{
    validate(spec);
    if (static_cast<int>(spins.size()) != spec.sites) {
        throw Error(fmt::format("atf_forward expects {} spins, got {}", spec.sites, spins.size()));
    }
    if (!params.same_layout(make_parameters(spec))) {
        throw Error("parameter set does not match the model specification");
    }
    const detail::Net net(spec, params);
    detail::State st(net);
    detail::forward_all(net, st, spins);
    SiteOutputs out;
    out.conditionals.resize(spec.sites, 2);
    out.phases.resize(spec.sites, 2);
    for (int n = 0; n < spec.sites; ++n) {
        const double r[2] = {st.logits(n, 0), st.logits(n, 1)};
        const auto cond = activation_apply(spec.g, r);
        out.conditionals.row(n) << cond[0], cond[1];
        out.phases.row(n) << st.phases(n, 0), st.phases(n, 1);
    }
    return out;
}

AttentionParameterCount attention_parameter_count(const AtfSpec& spec)
{
    const auto h = static_cast<std::size_t>(spec.heads);
    const auto d = static_cast<std::size_t>(spec.d_emb);
    const auto dk = static_cast<std::size_t>(spec.d_k());
    AttentionParameterCount out;
    out.value = h * d * dk;
    out.score = spec.attention == AttentionKind::Softmax ? 2 * h * d * dk : h * static_cast<std::size_t>(spec.sites);
    return out;
}

} // namespace arnqs
