#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace basinvol {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DatasetMeta {
    std::string id;         // full lineage, e.g. "swiss_roll(n=400,...)/subset(count=20,...)"
    std::string source;     // root generator or file set
    std::uint64_t seed = 0; // generation seed of the root source
    std::string parent_id;  // empty for root datasets
    std::string transform;  // last transform applied
    std::vector<std::size_t> row_ids;   // row index in the root source, per row
    std::vector<std::uint8_t> poisoned; // 1 where the label was replaced
    std::vector<double> feature_shift;  // standardization applied: x = (raw - shift) / scale
    std::vector<double> feature_scale;
};

struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::size_t num_classes = 0;
    DatasetMeta meta;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t width() const noexcept { return static_cast<std::size_t>(features.cols()); }
    bool empty() const noexcept { return labels.empty(); }

    // Throws DataError if rows/labels/classes/meta are inconsistent.
    void validate() const;

    std::vector<std::size_t> class_counts() const;
    std::size_t poisoned_count() const;
};

// Class-c spiral point at parameter t, before noise and standardization.
std::array<double, 2> swiss_roll_point(double t, int cls);

inline constexpr double kSwissRollTMin = 1.5707963267948966;   // pi/2
inline constexpr double kSwissRollTMax = 10.995574287564276;   // 3.5 pi

// Two interleaved spirals; class 0 gets ceil(n/2) points. Features are
// standardized per column (population statistics).
Dataset gen_swiss_roll(std::size_t n, double noise, std::uint64_t seed);

// All p^2 ordered pairs (a, b) with one-hot(a) ++ one-hot(b) features and
// label (a + b) mod p, in a-major order.
Dataset gen_modulo(std::size_t p);

// Reads an IDX image file (magic 2051) and label file (magic 2049).
// Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct SubsetSpec {
    std::optional<std::size_t> count;
    std::optional<double> fraction;
    std::size_t offset = 0;  // skip this many entries of the permutation first
    std::uint64_t split_seed = 0;
    std::optional<std::vector<double>> class_proportions;

    // Number of rows requested from a parent of `parent_size` rows.
    std::size_t resolve_count(std::size_t parent_size) const;
};

// Seeded permutation of [0, n) used by `subset`; prefixes give nested subsets.
std::vector<std::size_t> split_permutation(std::size_t n, std::uint64_t split_seed);

Dataset subset(const Dataset& parent, const SubsetSpec& spec);

// Rows of `parent` at `indices` (in that order). `transform` is recorded in meta.
Dataset take_rows(const Dataset& parent, std::span<const std::size_t> indices, const std::string& transform);

// Appends n_poison rows of `source`, each relabelled to a uniformly drawn
// incorrect class. `source` must not share root rows with `base`.
Dataset poison(const Dataset& base, const Dataset& source, std::size_t n_poison, std::uint64_t seed);

}  // namespace basinvol
