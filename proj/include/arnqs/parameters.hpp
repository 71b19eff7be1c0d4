#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "arnqs/spec.hpp"

namespace arnqs {

using RowMatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

struct TensorInfo {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;

    bool operator==(const TensorInfo&) const = default;
};

/// Named trainable tensors of one network, stored back to back in a single
/// flat buffer (row-major per tensor). Gradients and optimizer state use the
/// same flat layout.
class ParameterSet {
public:
    ParameterSet() = default;

    /// Appends a zero-filled tensor. Names must be unique.
    void add(std::string name, std::vector<std::size_t> shape);

    bool contains(std::string_view name) const noexcept;
    const TensorInfo& info(std::string_view name) const;
    const std::vector<TensorInfo>& tensors() const noexcept { return infos_; }
    std::size_t total_count() const noexcept { return data_.size(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    std::span<double> tensor(std::string_view name);
    std::span<const double> tensor(std::string_view name) const;

    /// Rank-2 tensors as row-major matrices; rank-1 tensors as column vectors.
    RowMatrixMap matrix(std::string_view name);
    ConstRowMatrixMap matrix(std::string_view name) const;
    VectorMap vector(std::string_view name);
    ConstVectorMap vector(std::string_view name) const;

    /// Same tensor names and shapes.
    bool same_layout(const ParameterSet& other) const noexcept { return infos_ == other.infos_; }

    bool operator==(const ParameterSet& other) const = default;

private:
    std::vector<TensorInfo> infos_;
    std::vector<double> data_;
};

/// Binary container layout (all integers little-endian):
///   8 bytes  magic "ARNQSPS1"
///   u32      format version (1)
///   u32      tensor count
///   per tensor:
///     u32 name length, name bytes (UTF-8, no terminator)
///     u32 rank, rank x u64 dimensions
///     product(dimensions) x f64 values, row-major
void write_parameters(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet read_parameters(const std::filesystem::path& path);

/// Writes `path` (binary container) and `path` + ".json" (spec sidecar).
void save_model(const std::filesystem::path& path, const ModelSpec& spec, const ParameterSet& params);
std::pair<ModelSpec, ParameterSet> load_model(const std::filesystem::path& path);

} // namespace arnqs
