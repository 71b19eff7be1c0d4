#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace arnqs {

using Complex = std::complex<double>;

struct EighResult {
    Eigen::VectorXd eigenvalues; // ascending
    Eigen::MatrixXcd eigenvectors; // columns, unitary
};

/// Largest |A_ij - conj(A_ji)|.
double hermiticity_defect(const Eigen::MatrixXcd& a);

/// Eigendecomposition of a Hermitian matrix. Throws arnqs::Error when the
/// input deviates from Hermitian by more than `tol` in any element.
EighResult hermitian_eigh(const Eigen::MatrixXcd& a, double tol = 1e-10);

/// Eigenvalues only (ascending); same checks as hermitian_eigh.
Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& a, double tol = 1e-10);

/// Parameters of S(L) = a L^nu + b ln L + c.
struct FitResult {
    double a = 0.0;
    double nu = 1.0;
    double b = 0.0;
    double c = 0.0;
    double residual_norm = 0.0;            // weighted by 1/error
    double unweighted_residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Weighted Levenberg-Marquardt fit of S(L) = a L^nu + b ln L + c with
/// weights 1/err. Starts from a = 0, nu = 1, b = 0, c = mean(S).
/// Requires at least 5 points and strictly positive errors.
FitResult fit_entropy_scaling(std::span<const double> sizes, std::span<const double> values,
                              std::span<const double> errors, int max_iterations = 1000);

double evaluate_entropy_fit(const FitResult& fit, double size);

/// y = amplitude * x^(-exponent) + offset with amplitude >= 0.
struct PowerLawFit {
    double amplitude = 0.0;
    double exponent = 0.0;
    double offset = 0.0;
    double residual_norm = 0.0;
};

/// Least-squares power-law fit. Requires x > 0, at least 4 points and at
/// least two distinct x values. The exponent is searched on [0, 20].
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Adaptive double-exponential quadrature of f over [lo, hi]; either bound
/// may be infinite. Finite intervals use tanh-sinh, half-lines exp-sinh and
/// the real line sinh-sinh, so integrable endpoint singularities are fine.
/// Throws arnqs::Error when the error estimate exceeds `tol`.
double integrate_1d(const std::function<double(double)>& f, double lo, double hi,
                    double tol = 1e-10);

/// Standard normal density and CDF (erf-based).
double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;

} // namespace arnqs
