#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "arnqs/numerics.hpp"
#include "arnqs/observables.hpp"
#include "arnqs/spec.hpp"
#include "arnqs/vmc.hpp"

namespace arnqs {

/// Axes of a (d_h or d_emb) x sigma sweep. Replica r of every cell uses
/// seed base_seed ^ r.
struct SweepGrid {
    std::vector<int> arch_axis;
    std::vector<double> sigma_axis;
    std::size_t n_init = 1;
    std::uint64_t base_seed = 0;

    bool operator==(const SweepGrid&) const = default;
};

void validate(const SweepGrid& grid);

enum class EstimatorKind { Swap, Exact };

struct Estimator {
    EstimatorKind kind = EstimatorKind::Exact;
    std::size_t n_samples = 100000; // swap only
    std::size_t n_batches = 50;     // swap only

    bool operator==(const Estimator&) const = default;
};

std::string_view to_string(EstimatorKind kind) noexcept;
EstimatorKind parse_estimator_kind(std::string_view name);

struct Stats {
    double mean = 0.0;
    double std = 0.0; // population
    double std_error = 0.0;
    std::size_t n = 0;
};

/// Mean, population standard deviation and std / sqrt(n), summed in order.
Stats aggregate(std::span<const double> values);

struct ReplicaFailure {
    std::size_t replica = 0;
    std::string message;
};

/// Fraction of replicas that must succeed for a cell to be kept.
inline constexpr double kMinReplicaSuccess = 0.8;

struct GridCell {
    int arch_value = 0;
    double sigma = 0.0;
    Stats stats;                  // over successful replicas
    std::vector<double> values;   // per replica, NaN where it failed
    std::vector<ReplicaFailure> failures;
    bool kept = true;
};

struct GridResult {
    ModelSpec template_spec;
    SweepGrid grid;
    Estimator estimator;
    std::vector<GridCell> cells; // arch-major: cells[a * sigma_axis.size() + s]

    const GridCell& cell(std::size_t arch_index, std::size_t sigma_index) const;
};

/// S_2 of the half chain for one replica.
EntanglementReport replica_entropy(const ModelSpec& spec, const ParameterSet& params, const Estimator& est,
                                   RngStream& rng);

GridResult run_entropy_grid(const ModelSpec& template_spec, const SweepGrid& grid, const Estimator& est,
                            std::size_t workers = 1);

/// Index of the sigma maximizing the mean over kept cells of one arch row.
std::optional<std::size_t> peak_sigma_index(const GridResult& result, std::size_t arch_index);

struct ScalingPoint {
    int sites = 0;
    Stats stats;                   // of raw S_2
    double mean_relative_purity_error = 0.0;
    bool excluded = false;
    std::string reason;
    std::vector<double> values;    // per replica, NaN where it failed
};

struct ScalingRow {
    double sigma = 0.0;
    std::vector<ScalingPoint> points;
    std::optional<FitResult> fit;
    std::string skip_reason;
};

/// Points whose mean relative swap error of Tr rho_A^2 exceeds this are excluded.
inline constexpr double kMaxRelativePurityError = 0.3;

/// S_2(L) per sigma with the fit S = a L^nu + b ln L + c. RNN parameters are
/// drawn once per replica and shared by every L.
std::vector<ScalingRow> run_scaling_study(const ModelSpec& template_spec, const std::vector<double>& sigmas,
                                          const std::vector<int>& sizes, std::size_t n_init,
                                          const Estimator& est, std::uint64_t base_seed, std::size_t workers = 1);

struct LevelStatsRow {
    double sigma = 0.0;
    std::vector<double> r;     // pooled over replicas
    std::vector<double> r_min;
    double mean_r = 0.0;
    double median_r = 0.0;
    double mean_r_min = 0.0;
    double median_r_min = 0.0;
    Stats replica_mean_r_min;  // spread of per-replica means
    std::size_t spectra = 0;
    std::size_t skipped_gaps = 0;
    std::vector<ReplicaFailure> failures;
    Histogram hist_r;          // [0, 6], 60 bins
    Histogram hist_r_min;      // [0, 1], 40 bins
};

std::vector<LevelStatsRow> run_level_stats(const ModelSpec& template_spec, const std::vector<double>& sigmas,
                                           std::size_t n_init, double cutoff, std::uint64_t base_seed,
                                           std::size_t workers = 1);

struct CorrelationRow {
    double sigma = 0.0;
    CorrelationCurve curve; // averaged over replicas
};

std::vector<CorrelationRow> run_correlations(const ModelSpec& template_spec, const std::vector<double>& sigmas,
                                             std::size_t n_init, std::size_t n_samples, std::uint64_t base_seed,
                                             std::size_t workers = 1);

enum class InitScheme { Gaussian, XavierGlorot };

std::string_view to_string(InitScheme scheme) noexcept;
InitScheme parse_init_scheme(std::string_view name);

struct VmcCell {
    int arch_value = 0;
    double sigma = 0.0; // 0 for Xavier-Glorot
    std::vector<std::optional<std::size_t>> tau; // per replica
    std::vector<ReplicaFailure> failures;
    Stats tau_stats; // over converged replicas
    std::size_t converged = 0;
    bool flagged = false; // fewer than half converged
};

struct VmcSweepResult {
    InitScheme init = InitScheme::Gaussian;
    double e_ref = 0.0;
    std::vector<int> arch_axis;
    std::vector<double> sigma_axis; // {0} for Xavier-Glorot
    std::vector<VmcCell> cells;     // arch-major
    std::vector<std::optional<double>> argmin_sigma; // per arch, Gaussian only
    std::optional<PowerLawFit> argmin_fit;
    std::string argmin_fit_skip_reason;
};

/// Convergence times over a grid. e_ref defaults to exact diagonalization.
VmcSweepResult run_vmc_sweep(const ModelSpec& template_spec, const Hamiltonian& ham, const SweepGrid& grid,
                             const VmcConfig& cfg, InitScheme init, std::optional<double> e_ref = std::nullopt,
                             std::size_t workers = 1);

struct BestInClassRow {
    int arch_value = 0;
    double best_sigma = 0.0;
    Stats gaussian;
    Stats xavier_glorot;
};

std::vector<BestInClassRow> best_in_class(const VmcSweepResult& gaussian, const VmcSweepResult& xavier_glorot);

// Writers. Every real is printed with 17 significant digits so reruns are
// byte-identical.
void write_grid_csv(const std::filesystem::path& path, const GridResult& result);
void write_grid_replicas_csv(const std::filesystem::path& path, const GridResult& result);
void write_scaling_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows);
void write_scaling_fits_csv(const std::filesystem::path& path, const std::vector<ScalingRow>& rows);
void write_level_stats_csv(const std::filesystem::path& path, const std::vector<LevelStatsRow>& rows);
void write_level_histograms_csv(const std::filesystem::path& path, const std::vector<LevelStatsRow>& rows);
void write_correlations_csv(const std::filesystem::path& path, const std::vector<CorrelationRow>& rows);
void write_vmc_sweep_csv(const std::filesystem::path& path, const VmcSweepResult& result);
void write_best_in_class_csv(const std::filesystem::path& path, const std::vector<BestInClassRow>& rows);

nlohmann::json grid_manifest(const GridResult& result);

/// 17 significant digits; the rendering used by every CSV writer.
std::string format_real(double x);

std::string_view library_version() noexcept;

} // namespace arnqs
