#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include "basinvol/datasets.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/rng.hpp"

namespace testing {

using basinvol::Dataset;
using basinvol::Matrix;

// Dataset from explicit rows; meta row ids 0..n-1 under the given source name.
inline Dataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                            std::size_t num_classes, const std::string& source = "manual") {
    Dataset d;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto w = static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size());
    d.features.resize(n, w);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < w; ++j) d.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    d.labels = labels;
    d.num_classes = num_classes;
    d.meta.id = source;
    d.meta.source = source;
    for (std::size_t i = 0; i < rows.size(); ++i) d.meta.row_ids.push_back(i);
    d.meta.poisoned.assign(rows.size(), 0);
    return d;
}

// Random Gaussian features with uniform labels.
inline Dataset random_dataset(std::size_t n, std::size_t width, std::size_t classes, std::uint64_t seed) {
    basinvol::CounterRng rng(seed, 99);
    std::vector<std::vector<double>> rows(n, std::vector<double>(width));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& x : rows[i]) x = rng.normal();
        labels[i] = static_cast<int>(rng.below(classes));
    }
    return make_dataset(rows, labels, classes, "random");
}

inline Dataset concat_self(const Dataset& d) {
    Dataset out = d;
    out.features.resize(d.features.rows() * 2, d.features.cols());
    out.features.topRows(d.features.rows()) = d.features;
    out.features.bottomRows(d.features.rows()) = d.features;
    out.labels.insert(out.labels.end(), d.labels.begin(), d.labels.end());
    out.meta.row_ids.insert(out.meta.row_ids.end(), d.meta.row_ids.begin(), d.meta.row_ids.end());
    out.meta.poisoned.insert(out.meta.poisoned.end(), d.meta.poisoned.begin(), d.meta.poisoned.end());
    return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("basinvol-test-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace testing
