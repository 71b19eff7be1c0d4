#include "arnqs/activation.hpp"

#include <algorithm>
#include <cmath>

namespace arnqs {

bool is_elementwise(Activation kind) noexcept
{
    return kind != Activation::Softmax && kind != Activation::SquareModulus;
}

double activate(Activation kind, double x) noexcept
{
    switch (kind) {
    case Activation::Tanh:
        return std::tanh(x);
    case Activation::Relu:
        return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid:
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    default:
        return x;
    }
}

double activate_derivative(Activation kind, double x, double y) noexcept
{
    switch (kind) {
    case Activation::Tanh:
        return 1.0 - y * y;
    case Activation::Relu:
        return x > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid:
        return y * (1.0 - y);
    default:
        return 1.0;
    }
}

std::vector<double> activation_apply(Activation kind, std::span<const double> r)
{
    std::vector<double> out(r.size());
    if (r.empty()) return out;
    if (kind == Activation::Softmax) {
        const double m = *std::max_element(r.begin(), r.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            out[i] = std::exp(r[i] - m);
            sum += out[i];
        }
        for (double& v : out) v /= sum;
    } else if (kind == Activation::SquareModulus) {
        double m = 0.0;
        for (double v : r) m = std::max(m, std::abs(v));
        if (m == 0.0) {
            std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(r.size()));
            return out;
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double t = r[i] / m;
            out[i] = t * t;
            sum += out[i];
        }
        for (double& v : out) v /= sum;
    } else {
        for (std::size_t i = 0; i < r.size(); ++i) out[i] = activate(kind, r[i]);
    }
    return out;
}

} // namespace arnqs
