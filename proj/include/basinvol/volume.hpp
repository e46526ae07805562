#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "basinvol/datasets.hpp"
#include "basinvol/nn.hpp"

namespace basinvol {

// A scalar loss over a flat parameter vector. Implementations must be safe to
// call concurrently.
class Objective {
public:
    virtual ~Objective() = default;
    virtual double loss(std::span<const double> params) const = 0;
};

// Mean training loss of an MLP on a fixed dataset (the loss landscape).
class MlpObjective final : public Objective {
public:
    MlpObjective(const NetworkSpec& spec, const Dataset& data) : spec_(&spec), data_(&data) {}
    double loss(std::span<const double> params) const override;

private:
    const NetworkSpec* spec_;
    const Dataset* data_;
};

// A perturbation direction. `raw` is i.i.d. standard normal, `scaled` is
// raw * filter_norms(anchor) element-wise.
struct Direction {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<double> raw;
    std::vector<double> scaled;
    double raw_norm = 0.0;  // Euclidean norm of raw
};

// Direction `index` of the stream keyed by `master_seed`. Entry j depends only
// on (master_seed, index, j), so directions can be drawn in any order.
// Without filter normalization, scaled == raw.
Direction sample_direction(const ParameterVector& params, std::uint64_t master_seed, std::size_t index,
                           bool filter_normalize = true);

// Direction with explicit raw entries (scaled by the anchor's filter norms).
Direction make_direction(const ParameterVector& params, std::vector<double> raw, std::size_t index = 0,
                         bool filter_normalize = true);

// Loss at params + c * dir.scaled; non-finite values come back as +inf.
double loss_along(const Objective& objective, const ParameterVector& params, const Direction& dir, double c);

struct RadiusSearch {
    double c_max = 50.0;
    std::size_t scan_steps = 100;
    std::size_t bisect_iters = 20;

    void validate() const;
};

struct RadiusSample {
    std::size_t direction_index = 0;
    double radius = 0.0;     // coefficient c at the first threshold crossing
    bool censored = false;   // no crossing up to c_max; radius == c_max
    std::size_t scan_points = 0;    // loss evaluations spent
    std::size_t crossing_step = 0;  // first scan step above threshold (0 for a degenerate start)
    double direction_norm = 0.0;    // |raw| of the direction

    // Euclidean length of the crossing point in filter-normalized coordinates.
    double extent() const noexcept { return radius * direction_norm; }
};

// First crossing of `threshold` along `dir`: a linear scan over
// {0, c_max/steps, ..., c_max} followed by bisection inside the first step
// above threshold. `base_loss` may carry loss(0) when already known.
RadiusSample find_radius(const Objective& objective, const ParameterVector& params, const Direction& dir,
                         double threshold, const RadiusSearch& search, std::optional<double> base_loss = std::nullopt);

// log of the volume of the unit n-ball.
double log_unit_ball(std::size_t n);

// log( V_unit(n) * mean_i r_i^n ), in the log domain. Zero radii count in K
// but add nothing; all-zero input yields -inf.
double estimate_log_volume(std::span<const double> radii, std::size_t n);

struct McConfig {
    std::size_t directions = 500;
    double threshold = 0.1;
    RadiusSearch search;
    std::uint64_t seed = 0;
    std::size_t workers = 1;  // 0 = hardware concurrency
    bool filter_normalize = true;
};

struct VolumeEstimate {
    std::size_t n_params = 0;
    double threshold = 0.0;
    std::size_t directions = 0;
    std::vector<RadiusSample> radii;
    double log_volume = 0.0;
    double base_loss = 0.0;
    std::string landscape_dataset_id;

    bool collapsed() const noexcept;
    std::size_t censored_count() const noexcept;
    double censored_fraction() const noexcept;
};

VolumeEstimate volume_of_minimum(const Objective& objective, const ParameterVector& params, const McConfig& mc,
                                 std::string landscape_id = {});
VolumeEstimate volume_of_minimum(const NetworkSpec& spec, const ParameterVector& params, const Dataset& landscape,
                                 const McConfig& mc);

struct SliceGrid {
    double half_width = 1.0;
    std::size_t steps = 10;
};

// Row-major (2*steps+1)^2 losses at anchor + a*dir_a + b*dir_b with row index
// for a and column index for b, both running from -half_width to +half_width.
Matrix landscape_slice(const Objective& objective, const ParameterVector& anchor, std::span<const double> dir_a,
                       std::span<const double> dir_b, const SliceGrid& grid);

// Orthonormal plane through three points: origin a, u along (b - a), v the
// Gram-Schmidt remainder of (c - a). Coordinates are (along u, along v).
struct Plane {
    std::vector<double> origin;
    std::vector<double> u;
    std::vector<double> v;
    std::array<double, 2> coord_b{};
    std::array<double, 2> coord_c{};
};
Plane plane_through(std::span<const double> a, std::span<const double> b, std::span<const double> c);

// Losses at origin + x*u + y*v for x in xs (rows), y in ys (columns).
Matrix plane_slice(const Objective& objective, const Plane& plane, std::span<const double> xs, std::span<const double> ys);

}  // namespace basinvol
