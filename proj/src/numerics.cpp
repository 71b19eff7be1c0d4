#include "arnqs/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>

#include "arnqs/error.hpp"

namespace arnqs {

double hermiticity_defect(const Eigen::MatrixXcd& a)
{
    if (a.rows() != a.cols()) {
        throw Error(fmt::format("matrix is not square ({}x{})", a.rows(), a.cols()));
    }
    double worst = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = j; i < a.rows(); ++i) {
            worst = std::max(worst, std::abs(a(i, j) - std::conj(a(j, i))));
        }
    }
    return worst;
}

namespace {

void require_hermitian(const Eigen::MatrixXcd& a, double tol)
{
    const double defect = hermiticity_defect(a);
    if (!(defect <= tol)) {
        throw Error(fmt::format("matrix is not Hermitian: max |A_ij - conj(A_ji)| = {:.3e} > {:.1e}",
                                defect, tol));
    }
}

} // namespace

EighResult hermitian_eigh(const Eigen::MatrixXcd& a, double tol)
{
    require_hermitian(a, tol);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        throw Error("Hermitian eigensolver did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& a, double tol)
{
    require_hermitian(a, tol);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw Error("Hermitian eigensolver did not converge");
    }
    return solver.eigenvalues();
}

// ---------------------------------------------------------------------------
// Entropy scaling fit

double evaluate_entropy_fit(const FitResult& fit, double size)
{
    return fit.a * std::pow(size, fit.nu) + fit.b * std::log(size) + fit.c;
}

namespace {

struct ScalingProblem {
    std::span<const double> sizes;
    std::span<const double> values;
    std::span<const double> errors;

    // Weighted residuals and Jacobian at p = (a, nu, b, c).
    double evaluate(const Eigen::Vector4d& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const
    {
        const auto n = static_cast<Eigen::Index>(sizes.size());
        r.resize(n);
        if (jac != nullptr) {
            jac->resize(n, 4);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double l = sizes[i];
            const double log_l = std::log(l);
            const double power = std::pow(l, p[1]);
            const double w = 1.0 / errors[i];
            r[i] = w * (p[0] * power + p[2] * log_l + p[3] - values[i]);
            if (jac != nullptr) {
                (*jac)(i, 0) = w * power;
                (*jac)(i, 1) = w * p[0] * power * log_l;
                (*jac)(i, 2) = w * log_l;
                (*jac)(i, 3) = w;
            }
        }
        return 0.5 * r.squaredNorm();
    }
};

} // namespace

FitResult fit_entropy_scaling(std::span<const double> sizes, std::span<const double> values,
                              std::span<const double> errors, int max_iterations)
{
    if (sizes.size() != values.size() || sizes.size() != errors.size()) {
        throw Error("fit_entropy_scaling: sizes, values and errors differ in length");
    }
    if (sizes.size() < 5) {
        throw Error(fmt::format("fit_entropy_scaling: need at least 5 points, got {}", sizes.size()));
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] > 0.0) || !(errors[i] > 0.0) || !std::isfinite(values[i])) {
            throw Error(fmt::format("fit_entropy_scaling: invalid point {} (L={}, S={}, err={})", i,
                                    sizes[i], values[i], errors[i]));
        }
    }

    const ScalingProblem problem{sizes, values, errors};
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    Eigen::Vector4d p(0.0, 1.0, 0.0, mean);

    Eigen::VectorXd r;
    Eigen::VectorXd r_trial;
    Eigen::MatrixXd jac;
    double cost = problem.evaluate(p, r, &jac);
    double lambda = 1e-3;
    FitResult out;

    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d grad = jac.transpose() * r;
        if (grad.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, cost) || cost < 1e-30) {
            out.converged = true;
            break;
        }
        const double diag_floor = 1e-12 * std::max(1.0, jtj.diagonal().maxCoeff());
        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix4d damped = jtj;
            for (int k = 0; k < 4; ++k) {
                damped(k, k) += lambda * std::max(jtj(k, k), diag_floor);
            }
            const Eigen::Vector4d step = damped.ldlt().solve(-grad);
            Eigen::Vector4d trial = p + step;
            trial[1] = std::clamp(trial[1], -3.0, 3.0);
            const double trial_cost = step.allFinite() ? problem.evaluate(trial, r_trial, nullptr)
                                                       : std::numeric_limits<double>::infinity();
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                const double decrease = cost - trial_cost;
                p = trial;
                cost = problem.evaluate(p, r, &jac);
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                if (decrease <= 1e-15 * std::max(cost, 1e-300) &&
                    step.norm() <= 1e-12 * (p.norm() + 1e-12)) {
                    out.converged = true;
                }
            } else {
                lambda *= 4.0;
                if (lambda > 1e16) {
                    break;
                }
            }
        }
        if (!accepted || out.converged) {
            // Stalled damping means no downhill direction is left: a minimum.
            out.converged = true;
            ++iter;
            break;
        }
    }

    out.a = p[0];
    out.nu = p[1];
    out.b = p[2];
    out.c = p[3];
    out.iterations = iter;
    out.residual_norm = r.norm();
    double unweighted = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double d = evaluate_entropy_fit(out, sizes[i]) - values[i];
        unweighted += d * d;
    }
    out.unweighted_residual_norm = std::sqrt(unweighted);
    return out;
}

// ---------------------------------------------------------------------------
// Power-law fit

namespace {

struct PowerLawCandidate {
    double amplitude;
    double offset;
    double sse;
};

PowerLawCandidate solve_linear_part(std::span<const double> x, std::span<const double> y,
                                    double exponent)
{
    const auto n = static_cast<double>(x.size());
    double mu = 0.0;
    double my = 0.0;
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        u[i] = std::pow(x[i], -exponent);
        mu += u[i];
        my += y[i];
    }
    mu /= n;
    my /= n;
    double suu = 0.0;
    double suy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        suy += (u[i] - mu) * (y[i] - my);
    }
    double amplitude = 0.0;
    if (suu > 1e-300 * std::max(1.0, mu * mu)) {
        amplitude = std::max(0.0, suy / suu);
    }
    const double offset = my - amplitude * mu;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = amplitude * u[i] + offset - y[i];
        sse += d * d;
    }
    return {amplitude, offset, sse};
}

} // namespace

PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) {
        throw Error("fit_power_law: x and y differ in length");
    }
    if (x.size() < 4) {
        throw Error(fmt::format("fit_power_law: need at least 4 points, got {}", x.size()));
    }
    for (double xi : x) {
        if (!(xi > 0.0)) {
            throw Error("fit_power_law: x values must be positive");
        }
    }
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    if (*xmin == *xmax) {
        throw Error("fit_power_law: degenerate x (all values equal)");
    }

    constexpr double kMaxExponent = 20.0;
    constexpr int kGrid = 2000;
    double best_e = 0.0;
    PowerLawCandidate best = solve_linear_part(x, y, 0.0);
    for (int k = 1; k <= kGrid; ++k) {
        const double e = kMaxExponent * k / kGrid;
        const auto cand = solve_linear_part(x, y, e);
        if (cand.sse < best.sse) {
            best = cand;
            best_e = e;
        }
    }

    // Golden-section refinement around the best grid point.
    const double h = kMaxExponent / kGrid;
    double lo = std::max(0.0, best_e - h);
    double hi = std::min(kMaxExponent, best_e + h);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = solve_linear_part(x, y, x1).sse;
    double f2 = solve_linear_part(x, y, x2).sse;
    for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = solve_linear_part(x, y, x1).sse;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = solve_linear_part(x, y, x2).sse;
        }
    }
    const double refined_e = 0.5 * (lo + hi);
    const auto refined = solve_linear_part(x, y, refined_e);
    if (refined.sse < best.sse) {
        best = refined;
        best_e = refined_e;
    }
    if (best.amplitude == 0.0) {
        best_e = 0.0; // exponent is unidentifiable without a power-law term
    }
    return {best.amplitude, best_e, best.offset, std::sqrt(best.sse)};
}

// ---------------------------------------------------------------------------
// Quadrature

double integrate_1d(const std::function<double(double)>& f, double lo, double hi, double tol)
{
    namespace q = boost::math::quadrature;
    if (std::isnan(lo) || std::isnan(hi)) {
        throw Error("integrate_1d: NaN bound");
    }
    if (lo == hi) {
        return 0.0;
    }
    if (lo > hi) {
        return -integrate_1d(f, hi, lo, tol);
    }
    double error = 0.0;
    double l1 = 0.0;
    double result = 0.0;
    const bool lo_inf = std::isinf(lo);
    const bool hi_inf = std::isinf(hi);
    if (!lo_inf && !hi_inf) {
        q::tanh_sinh<double> integrator;
        result = integrator.integrate(f, lo, hi, tol, &error, &l1);
    } else if (lo_inf && hi_inf) {
        q::sinh_sinh<double> integrator;
        result = integrator.integrate(f, tol, &error, &l1);
    } else {
        q::exp_sinh<double> integrator;
        result = integrator.integrate(f, lo, hi, tol, &error, &l1);
    }
    if (!std::isfinite(result) || error > tol * std::max(1.0, l1)) {
        throw Error(fmt::format("integrate_1d: no convergence on [{}, {}] (error estimate {:.3e})",
                                lo, hi, error));
    }
    return result;
}

double normal_pdf(double z) noexcept
{
    constexpr double inv_sqrt_2pi = 0.398942280401432677939946059934;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

double normal_cdf(double z) noexcept
{
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

} // namespace arnqs
