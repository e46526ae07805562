#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "basinvol/datasets.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/volume.hpp"

namespace basinvol {

struct ScalingPoint {
    double dataset_size = 0.0;
    double log_volume = 0.0;
};

struct ScalingFit {
    double alpha = 0.0;      // slope / n_params
    double slope = 0.0;      // d ln V / d ln D
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_params = 0;
    std::vector<ScalingPoint> points;  // the points actually used
    std::size_t excluded = 0;          // collapsed (non-finite) points dropped
};

// Ordinary least squares of ln V on ln D; alpha is the slope divided by the
// parameter count.
ScalingFit fit_power_law(std::span<const ScalingPoint> points, std::size_t n_params);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    std::size_t censored = 0;  // of `count`, how many were censored at c_max
};

// Equal-width bins over [0, max radius]; every radius lands in exactly one bin.
std::vector<HistogramBin> radii_histogram(const VolumeEstimate& estimate, std::size_t bins);

struct RadiiSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
    std::size_t censored = 0;
    bool any_censored = false;
};

RadiiSummary summarize_radii(const VolumeEstimate& estimate);

struct CrossLandscapeMatrix {
    // cells[i][j]: model i measured in landscape j
    std::vector<std::vector<VolumeEstimate>> cells;

    double log_volume(std::size_t model, std::size_t landscape) const { return cells[model][landscape].log_volume; }
    bool collapsed(std::size_t model, std::size_t landscape) const { return cells[model][landscape].collapsed(); }
};

// One volume measurement per (model, landscape) pair; all models must share
// the layout of `spec`. Cells are computed independently and assembled in
// (model, landscape) order.
CrossLandscapeMatrix cross_landscape_matrix(const NetworkSpec& spec, std::span<const ParameterVector> models,
                                            std::span<const Dataset> landscapes, const McConfig& mc,
                                            std::size_t workers = 1);

// Mean of the finite entries; -inf when none is finite.
double mean_finite(std::span<const double> xs, std::size_t* finite_count = nullptr);

double median(std::vector<double> xs);

}  // namespace basinvol
