#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arnqs/ensemble.hpp"
#include "arnqs/spec.hpp"
#include "arnqs/vmc.hpp"

namespace arnqs {

enum class Subcommand { PhaseDiagram, Scaling, LevelStats, Correlations, VmcSweep, Check };

std::string_view to_string(Subcommand s) noexcept;
Subcommand parse_subcommand(std::string_view name);

struct VmcSweepSettings {
    Hamiltonian hamiltonian; // sites follow the spec
    VmcConfig vmc;           // seed and trace_path are unused; replicas are seeded from the grid
    std::vector<InitScheme> inits{InitScheme::Gaussian, InitScheme::XavierGlorot};
    std::optional<double> e_ref;

    bool operator==(const VmcSweepSettings&) const = default;
};

/// One batch run. Only the fields used by `subcommand` are read or emitted.
struct RunConfig {
    Subcommand subcommand = Subcommand::PhaseDiagram;
    ModelSpec spec;
    std::vector<int> arch_axis;      // phase-diagram, vmc-sweep
    std::vector<double> sigma_axis;  // every study
    std::size_t n_init = 10;
    Estimator estimator;             // phase-diagram, scaling
    std::vector<int> sizes;          // scaling, ascending
    double cutoff = 1e-10;           // level-stats
    std::size_t n_samples = 10000;   // correlations
    VmcSweepSettings vmc;            // vmc-sweep
    std::string check = "appendix-b";
    std::filesystem::path output_dir = "arnqs-out";
    std::uint64_t base_seed = 0;

    SweepGrid grid() const;

    bool operator==(const RunConfig&) const = default;
};

/// Strict parse: unknown or misplaced keys and schema violations raise
/// ConfigError naming the key path.
RunConfig parse_config(std::string_view text);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

/// Throws ConfigError for any field the subcommand cannot run with.
void validate(const RunConfig& cfg);

inline constexpr int kOutputLayoutVersion = 1;

struct RunOutcome {
    std::vector<std::filesystem::path> files; // relative to output_dir
    std::vector<std::string> failed_checks;
    std::string summary;

    int exit_code() const noexcept { return failed_checks.empty() ? 0 : 3; }
};

/// Runs the study and writes manifest.json, the CSVs and summary.txt under
/// cfg.output_dir. ConfigError and Error propagate to the caller.
RunOutcome execute(const RunConfig& cfg, std::size_t workers, std::ostream& log);

/// Column layout of every CSV a subcommand writes, for --help.
std::string csv_schema_help();

} // namespace arnqs
