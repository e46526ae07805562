#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>

#include "basinvol/nn.hpp"
#include "basinvol/volume.hpp"

namespace basinvol {

// Scale-invariant toy basin: loss |xy - 1|, sublevel set at s is the band
// between y = (1 - s)/x and y = (1 + s)/x; the minimum sits at (b, 1/b).
double toy_loss(double x, double y) noexcept;

struct ToyBasin {
    double s = 0.2;
    double b = 1.0;

    void validate() const;
    std::pair<double, double> anchor() const noexcept { return {b, 1.0 / b}; }
};

// Two-parameter objective realizing toy_loss on (theta[0], theta[1]).
class ToyObjective final : public Objective {
public:
    double loss(std::span<const double> params) const override;
};

// Anchor (b, 1/b) as a parameter vector with two single-entry groups, so that
// filter normalization scales each coordinate by its own magnitude.
ParameterVector toy_anchor(double b);

// Points where the boundary line from the anchor is tangent to y = (1 + s)/x.
std::pair<double, double> toy_critical_points(double s, double b);

// Smallest and largest x of the star-convex region.
std::pair<double, double> toy_extent(double s, double b);

// Exact star-convex area; does not depend on b.
double toy_volume_closed_form(double s);

struct Bounds {
    double x_lo = 0.0;
    double x_hi = 1.0;
    double y_lo = 0.0;
    double y_hi = 1.0;
};

// Cell-counting area of {loss <= threshold} on a resolution x resolution grid.
// With star_convex, a cell counts only if every point sampled along the
// segment anchor -> cell center (spacing = cell diagonal) is in the set.
double grid_volume(const std::function<double(double, double)>& loss, double threshold, const Bounds& bounds,
                   std::size_t resolution, std::pair<double, double> anchor, bool star_convex);

struct OracleReport {
    double s = 0.0;
    double b = 0.0;
    double closed_form = 0.0;
    double grid = 0.0;
    double mc = 0.0;
    double grid_rel_error = 0.0;
    double mc_rel_error = 0.0;
    VolumeEstimate estimate;
};

struct OracleConfig {
    std::size_t directions = 10000;
    std::uint64_t seed = 0;
    std::size_t grid_resolution = 2000;
    RadiusSearch search{100.0, 20000, 30};
    std::size_t workers = 1;
};

// Closed form, brute-force grid and Monte Carlo estimate for one (s, b).
OracleReport run_toy_oracle(const ToyBasin& basin, const OracleConfig& cfg);

// Monte Carlo estimate only (the volume module driven by the toy objective).
VolumeEstimate toy_monte_carlo(const ToyBasin& basin, const OracleConfig& cfg);

}  // namespace basinvol
