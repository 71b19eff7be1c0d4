#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "arnqs/error.hpp"
#include "arnqs/model.hpp"
#include "arnqs/sampling.hpp"

namespace arnqs {

/// Subsystem A of a bipartition; the rest of the chain is B.
struct Partition {
    std::vector<int> region_a;

    /// First floor(L/2) sites.
    static Partition half(int sites);
};

/// Throws ConfigError for repeated or out-of-range sites.
void validate(const Partition& part, int sites);

enum class EntropyMethod { Swap, Exact };

struct EntanglementReport {
    double s2 = 0.0;
    double s2_stderr = 0.0;
    EntropyMethod method = EntropyMethod::Exact;
    double purity = 1.0;        // Tr rho_A^2 estimate
    double purity_stderr = 0.0;
    double purity_imag = 0.0;   // swap only, zero up to noise
    std::vector<double> spectrum;   // optional, ascending
    std::vector<double> gap_ratios; // optional
};

/// Raised when the swap estimate of Tr rho_A^2 is not positive.
class NonPositivePurity : public Error {
public:
    NonPositivePurity(double raw, double raw_err);
    double raw_estimate;
    double raw_stderr;
};

struct StateVector {
    Eigen::VectorXcd amplitudes; // index has site 0 as most significant bit
    double raw_norm = 1.0;       // sqrt(sum |Psi|^2) before normalization
};

/// All 2^L amplitudes. Non-normalizing activations are normalized
/// explicitly and their raw norm reported.
StateVector exact_state_vector(const ModelSpec& spec, const ParameterSet& params, int cap = 22);

/// rho_A = Tr_B |Psi><Psi|, a 2^|A| square matrix. |A| <= 14.
Eigen::MatrixXcd reduced_density_matrix(const Eigen::VectorXcd& state, const Partition& part);

/// -ln Tr rho^2, clamped below at 0. Throws when |Tr rho - 1| > 1e-6.
double renyi2_exact(const Eigen::MatrixXcd& rho);

/// Tr rho^2 of the half-chain reduced density matrix.
double purity_exact(const Eigen::VectorXcd& state, const Partition& part);

/// Swap estimator of S_2. Draws independent batches sigma and tau and
/// averages Psi(tau_A sigma_B) Psi(sigma_A tau_B) / (Psi(sigma) Psi(tau)),
/// whose expectation is conj(Tr rho_A^2). The real part gives the purity,
/// the imaginary part is kept as a diagnostic. Errors are batch means over
/// `n_batches` contiguous batches.
EntanglementReport renyi2_swap(const ModelSpec& spec, const ParameterSet& params, const Partition& part,
                               std::size_t n_samples, RngStream& rng, std::size_t n_batches = 50);

/// Same estimator on precomputed batches (equal sizes).
EntanglementReport renyi2_swap(const ModelSpec& spec, const ParameterSet& params, const Partition& part,
                               const SampleBatch& sigma, const SampleBatch& tau, std::size_t n_batches = 50);

/// E_n = -ln lambda_n over eigenvalues lambda_n >= cutoff, ascending.
std::vector<double> entanglement_spectrum(const Eigen::MatrixXcd& rho, double cutoff = 1e-10);

struct GapRatios {
    std::vector<double> r;     // Delta_{n+1} / Delta_n
    std::vector<double> r_min; // min(r, 1/r)
    std::size_t skipped = 0;   // gaps below the degeneracy tolerance
};

/// Consecutive-gap ratios of a spectrum (sorted internally). Gaps below
/// 1e-12 are dropped and counted. Needs at least three levels.
GapRatios gap_ratios(std::vector<double> spectrum, double degenerate_tol = 1e-12);

enum class RmtKind { Goe, Gue, Gse, Poisson, SemiPoisson };

std::string_view to_string(RmtKind kind) noexcept;

/// Gap-ratio density P(r) on r >= 0. Surmise for beta = 1, 2, 4:
///   (r + r^2)^beta / (Z_beta (1 + r + r^2)^(1 + 3 beta / 2));
/// Poisson 1/(1+r)^2; semi-Poisson 6r/(1+r)^4.
double reference_density(RmtKind kind, double r);

/// Mean of min(r, 1/r) under reference_density, by quadrature.
double reference_mean_r_min(RmtKind kind);

/// Marchenko-Pastur density for unit-variance entries and aspect ratio
/// c in (0, 1]: sqrt((x+ - x)(x - x-)) / (2 pi c x) on [x-, x+],
/// x+- = (1 +- sqrt c)^2.
double marchenko_pastur_density(double x, double aspect);

/// 2^|A| / 2^|B| for a bipartition of L sites.
double marchenko_pastur_aspect(const Partition& part, int sites);

struct Histogram {
    std::vector<double> edges;   // bins + 1
    std::vector<double> density; // integrates to 1 over the in-range values
    std::size_t in_range = 0;
    std::size_t out_of_range = 0;
};

Histogram density_histogram(const std::vector<double>& values, double lo, double hi, int bins);

/// Connected <z_i z_j> - <z_i><z_j> with z = 1 - 2 s, from one batch.
struct CorrelationMatrix {
    Eigen::MatrixXd value;
    Eigen::MatrixXd std_error; // batch means
};

CorrelationMatrix connected_correlation_matrix(const SampleBatch& batch, std::size_t n_batches = 20);

struct CorrelationCurve {
    std::vector<int> distances;
    std::vector<double> mean_log_abs_corr;
    std::vector<double> std_error;
};

/// Averages ln|C_ij| over pairs at each distance |i - j| and over the
/// given models. With several models the error is the spread across
/// models; with one it propagates the batch-means errors.
CorrelationCurve correlation_curve(const std::vector<CorrelationMatrix>& models);

CorrelationCurve connected_correlations(const ModelSpec& spec, const ParameterSet& params, std::size_t n_samples,
                                        RngStream& rng);

/// One eigenvalue per row.
void write_spectrum_csv(const std::filesystem::path& path, const std::vector<double>& spectrum);

} // namespace arnqs
