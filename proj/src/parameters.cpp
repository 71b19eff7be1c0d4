#include "arnqs/parameters.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "arnqs/error.hpp"

namespace arnqs {

static_assert(std::endian::native == std::endian::little, "parameter container assumes little-endian host");

void ParameterSet::add(std::string name, std::vector<std::size_t> shape)
{
    if (contains(name)) throw Error(fmt::format("duplicate tensor name '{}'", name));
    if (shape.empty() || shape.size() > 2) {
        throw Error(fmt::format("tensor '{}' must have rank 1 or 2", name));
    }
    const std::size_t size = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    infos_.push_back({std::move(name), std::move(shape), data_.size(), size});
    data_.resize(data_.size() + size, 0.0);
}

bool ParameterSet::contains(std::string_view name) const noexcept
{
    return std::any_of(infos_.begin(), infos_.end(), [&](const TensorInfo& t) { return t.name == name; });
}

const TensorInfo& ParameterSet::info(std::string_view name) const
{
    for (const auto& t : infos_) {
        if (t.name == name) return t;
    }
    throw Error(fmt::format("no tensor named '{}'", name));
}

std::span<double> ParameterSet::tensor(std::string_view name)
{
    const auto& t = info(name);
    return {data_.data() + t.offset, t.size};
}

std::span<const double> ParameterSet::tensor(std::string_view name) const
{
    const auto& t = info(name);
    return {data_.data() + t.offset, t.size};
}

RowMatrixMap ParameterSet::matrix(std::string_view name)
{
    const auto& t = info(name);
    const auto rows = static_cast<Eigen::Index>(t.shape[0]);
    const auto cols = static_cast<Eigen::Index>(t.shape.size() == 2 ? t.shape[1] : 1);
    return {data_.data() + t.offset, rows, cols};
}

ConstRowMatrixMap ParameterSet::matrix(std::string_view name) const
{
    const auto& t = info(name);
    const auto rows = static_cast<Eigen::Index>(t.shape[0]);
    const auto cols = static_cast<Eigen::Index>(t.shape.size() == 2 ? t.shape[1] : 1);
    return {data_.data() + t.offset, rows, cols};
}

VectorMap ParameterSet::vector(std::string_view name)
{
    const auto& t = info(name);
    return {data_.data() + t.offset, static_cast<Eigen::Index>(t.size)};
}

ConstVectorMap ParameterSet::vector(std::string_view name) const
{
    const auto& t = info(name);
    return {data_.data() + t.offset, static_cast<Eigen::Index>(t.size)};
}

namespace {

constexpr char kMagic[8] = {'A', 'R', 'N', 'Q', 'S', 'P', 'S', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& is, const std::filesystem::path& path)
{
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw Error(fmt::format("{}: truncated parameter file", path.string()));
    }
    return v;
}

} // namespace

void write_parameters(const std::filesystem::path& path, const ParameterSet& params)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, kVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.tensors().size()));
    for (const auto& t : params.tensors()) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) put<std::uint64_t>(os, d);
        const auto values = params.tensor(t.name);
        os.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)));
    }
    if (!os) throw Error(fmt::format("write to '{}' failed", path.string()));
}

ParameterSet read_parameters(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(fmt::format("cannot open '{}'", path.string()));
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw Error(fmt::format("{}: not a parameter container", path.string()));
    }
    const auto version = take<std::uint32_t>(is, path);
    if (version != kVersion) {
        throw Error(fmt::format("{}: unsupported container version {}", path.string(), version));
    }
    const auto count = take<std::uint32_t>(is, path);
    ParameterSet out;
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto len = take<std::uint32_t>(is, path);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw Error(fmt::format("{}: truncated parameter file", path.string()));
        const auto rank = take<std::uint32_t>(is, path);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(take<std::uint64_t>(is, path));
        out.add(name, shape);
        auto values = out.tensor(name);
        if (!is.read(reinterpret_cast<char*>(values.data()),
                     static_cast<std::streamsize>(values.size() * sizeof(double)))) {
            throw Error(fmt::format("{}: truncated parameter file", path.string()));
        }
    }
    return out;
}

void save_model(const std::filesystem::path& path, const ModelSpec& spec, const ParameterSet& params)
{
    write_parameters(path, params);
    std::ofstream js(path.string() + ".json", std::ios::trunc);
    if (!js) throw Error(fmt::format("cannot open '{}.json' for writing", path.string()));
    js << spec_to_json(spec).dump(2) << '\n';
}

std::pair<ModelSpec, ParameterSet> load_model(const std::filesystem::path& path)
{
    std::ifstream js(path.string() + ".json");
    if (!js) throw Error(fmt::format("cannot open '{}.json'", path.string()));
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("{}.json: {}", path.string(), e.what()));
    }
    return {spec_from_json(j), read_parameters(path)};
}

} // namespace arnqs
