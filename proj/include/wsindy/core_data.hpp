#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wsindy {

/// Uniform lattice over a product of closed intervals. Time is the last axis.
struct Grid {
    std::vector<std::pair<double, double>> extents;
    std::vector<std::size_t> counts;
    std::vector<double> resolution;

    [[nodiscard]] std::size_t dims() const noexcept { return counts.size(); }
    [[nodiscard]] std::size_t num_points() const noexcept;
    /// Row-major strides in points (last axis fastest).
    [[nodiscard]] std::vector<std::size_t> strides() const;
    [[nodiscard]] double coordinate(std::size_t axis, std::size_t index) const {
        return extents[axis].first + static_cast<double>(index) * resolution[axis];
    }
};

[[nodiscard]] Grid make_grid(const std::vector<std::pair<double, double>>& extents,
                             const std::vector<std::size_t>& counts);

enum class DataKind { clean, noisy };

/// State samples on a grid; values are row-major with the state component innermost.
struct Dataset {
    Grid grid;
    std::size_t state_dim = 1;
    std::vector<double> values;
    DataKind kind = DataKind::clean;
    double sigma = 0.0;
    std::optional<std::uint64_t> seed;
    /// Free-form provenance (system, initial condition, noise reference, ...).
    std::map<std::string, std::string> metadata;

    [[nodiscard]] std::size_t num_points() const noexcept { return grid.num_points(); }
    [[nodiscard]] double at(std::size_t point, std::size_t component) const {
        return values[point * state_dim + component];
    }
    /// Checks shape consistency; throws std::invalid_argument.
    void validate() const;
};

enum class NoiseDistribution { gaussian, uniform };
enum class NoiseLevelMode { absolute_sigma, noise_ratio };

struct NoiseSpec {
    NoiseDistribution distribution = NoiseDistribution::gaussian;
    NoiseLevelMode level_mode = NoiseLevelMode::absolute_sigma;
    double level = 0.0;
    std::uint64_t seed = 0;
};

/// Keeps every factor-th sample per axis, starting at index 0.
[[nodiscard]] Dataset subsample(const Dataset& data, const std::vector<std::size_t>& factors);

/// Population standard deviation of all entries.
[[nodiscard]] double stdev_all(const Dataset& data);

/// Adds i.i.d. noise drawn in row-major order from a counter-based generator.
/// In noise_ratio mode the reference deviation is taken from `data` itself,
/// i.e. at the resolution being corrupted.
[[nodiscard]] Dataset add_noise(const Dataset& data, const NoiseSpec& spec);

void write_dataset(const Dataset& data, const std::string& path);
[[nodiscard]] Dataset read_dataset(const std::string& path);

[[nodiscard]] std::string serialize_dataset(const Dataset& data);
[[nodiscard]] Dataset deserialize_dataset(const std::string& bytes);

[[nodiscard]] const char* to_string(DataKind kind) noexcept;

}  // namespace wsindy
