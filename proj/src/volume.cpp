#include "basinvol/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "basinvol/error.hpp"
#include "basinvol/parallel.hpp"
#include "basinvol/rng.hpp"

namespace basinvol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

}  // namespace

double MlpObjective::loss(std::span<const double> params) const {
    return loss_mean(*spec_, params, data_->features, data_->labels);
}

Direction make_direction(const ParameterVector& params, std::vector<double> raw, std::size_t index,
                         bool filter_normalize) {
    if (raw.size() != params.size()) throw DimensionError("direction size does not match the parameter vector");
    ParameterVector f = filter_norms(params);
    if (!filter_normalize) std::fill(f.values.begin(), f.values.end(), 1.0);
    Direction d;
    d.index = index;
    d.raw = std::move(raw);
    d.scaled.resize(d.raw.size());
    double ss = 0.0;
    for (std::size_t j = 0; j < d.raw.size(); ++j) {
        d.scaled[j] = d.raw[j] * f.values[j];
        ss += d.raw[j] * d.raw[j];
    }
    d.raw_norm = std::sqrt(ss);
    return d;
}

Direction sample_direction(const ParameterVector& params, std::uint64_t master_seed, std::size_t index,
                           bool filter_normalize) {
    const std::uint64_t key = mix_seed(master_seed, static_cast<std::uint64_t>(Stream::direction));
    std::vector<double> raw(params.size());
    for (std::size_t j = 0; j < raw.size(); ++j) raw[j] = normal_at(key, index, j);
    Direction d = make_direction(params, std::move(raw), index, filter_normalize);
    d.seed = master_seed;
    return d;
}

double loss_along(const Objective& objective, const ParameterVector& params, const Direction& dir, double c) {
    if (!(c >= 0.0)) throw DomainError("loss_along: c must be non-negative");
    if (dir.scaled.size() != params.size()) throw DimensionError("loss_along: direction size mismatch");
    std::vector<double> theta(params.values);
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] += c * dir.scaled[j];
    return finite_or_inf(objective.loss(theta));
}

void RadiusSearch::validate() const {
    if (!(c_max > 0.0)) throw DomainError("radius search c_max must be positive");
    if (scan_steps < 2) throw DomainError("radius search needs at least 2 scan steps");
}

RadiusSample find_radius(const Objective& objective, const ParameterVector& params, const Direction& dir,
                         double threshold, const RadiusSearch& search, std::optional<double> base_loss) {
    if (!(threshold > 0.0)) throw DomainError("find_radius: threshold must be positive");
    search.validate();
    if (dir.scaled.size() != params.size()) throw DimensionError("find_radius: direction size mismatch");

    RadiusSample out;
    out.direction_index = dir.index;
    out.direction_norm = dir.raw_norm;

    const std::span<const double> anchor = params.values;
    std::vector<double> theta(anchor.begin(), anchor.end());
    auto eval = [&](double c) {
        for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = anchor[j] + c * dir.scaled[j];
        ++out.scan_points;
        return finite_or_inf(objective.loss(theta));
    };

    const double base = base_loss ? finite_or_inf(*base_loss) : eval(0.0);
    if (base > threshold) return out;

    const double step = search.c_max / static_cast<double>(search.scan_steps);
    for (std::size_t k = 1; k <= search.scan_steps; ++k) {
        const double hi_c = k == search.scan_steps ? search.c_max : step * static_cast<double>(k);
        if (eval(hi_c) <= threshold) continue;
        double lo = step * static_cast<double>(k - 1);
        double hi = hi_c;
        for (std::size_t it = 0; it < search.bisect_iters; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (eval(mid) > threshold) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.radius = hi;
        out.crossing_step = k;
        return out;
    }
    out.radius = search.c_max;
    out.censored = true;
    return out;
}

double log_unit_ball(std::size_t n) {
    const double half = 0.5 * static_cast<double>(n);
    return half * std::log(std::numbers::pi) - std::lgamma(half + 1.0);
}

double estimate_log_volume(std::span<const double> radii, std::size_t n) {
    if (radii.empty()) throw DomainError("estimate_log_volume: need at least one radius");
    const double dim = static_cast<double>(n);
    double peak = -kInf;
    for (double r : radii) {
        if (!(r >= 0.0)) throw DomainError("estimate_log_volume: radii must be non-negative");
        if (r > 0.0) peak = std::max(peak, dim * std::log(r));
    }
    if (peak == -kInf) return -kInf;
    double sum = 0.0;
    for (double r : radii) {
        if (r > 0.0) sum += std::exp(dim * std::log(r) - peak);
    }
    return log_unit_ball(n) - std::log(static_cast<double>(radii.size())) + peak + std::log(sum);
}

bool VolumeEstimate::collapsed() const noexcept { return log_volume == -kInf; }

std::size_t VolumeEstimate::censored_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(radii.begin(), radii.end(), [](const RadiusSample& r) { return r.censored; }));
}

double VolumeEstimate::censored_fraction() const noexcept {
    return radii.empty() ? 0.0 : static_cast<double>(censored_count()) / static_cast<double>(radii.size());
}

VolumeEstimate volume_of_minimum(const Objective& objective, const ParameterVector& params, const McConfig& mc,
                                 std::string landscape_id) {
    if (mc.directions == 0) throw DomainError("volume_of_minimum: need at least one direction");
    if (!(mc.threshold > 0.0)) throw DomainError("volume_of_minimum: threshold must be positive");
    mc.search.validate();

    VolumeEstimate est;
    est.n_params = params.size();
    est.threshold = mc.threshold;
    est.directions = mc.directions;
    est.landscape_dataset_id = std::move(landscape_id);
    est.base_loss = finite_or_inf(objective.loss(params.values));

    est.radii = parallel_map(mc.directions, mc.workers, [&](std::size_t i) {
        const Direction dir = sample_direction(params, mc.seed, i, mc.filter_normalize);
        return find_radius(objective, params, dir, mc.threshold, mc.search, est.base_loss);
    });
    std::vector<double> extents;
    extents.reserve(est.radii.size());
    for (const auto& r : est.radii) extents.push_back(r.extent());
    est.log_volume = estimate_log_volume(extents, est.n_params);
    return est;
}

VolumeEstimate volume_of_minimum(const NetworkSpec& spec, const ParameterVector& params, const Dataset& landscape,
                                 const McConfig& mc) {
    if (landscape.empty()) throw DomainError("volume_of_minimum: empty landscape dataset");
    if (params.size() != spec.param_count()) throw DimensionError("volume_of_minimum: parameters do not match the network");
    MlpObjective objective(spec, landscape);
    return volume_of_minimum(objective, params, mc, landscape.meta.id);
}

Matrix landscape_slice(const Objective& objective, const ParameterVector& anchor, std::span<const double> dir_a,
                       std::span<const double> dir_b, const SliceGrid& grid) {
    if (dir_a.size() != anchor.size() || dir_b.size() != anchor.size()) throw DimensionError("landscape_slice: direction size mismatch");
    if (grid.half_width == 0.0) {
        Matrix one(1, 1);
        one(0, 0) = finite_or_inf(objective.loss(anchor.values));
        return one;
    }
    if (grid.steps < 1) throw DomainError("landscape_slice: steps must be at least 1");
    const auto side = static_cast<Eigen::Index>(2 * grid.steps + 1);
    const double h = grid.half_width / static_cast<double>(grid.steps);
    Matrix out(side, side);
    std::vector<double> theta(anchor.size());
    for (Eigen::Index i = 0; i < side; ++i) {
        const double a = -grid.half_width + h * static_cast<double>(i);
        for (Eigen::Index k = 0; k < side; ++k) {
            const double b = -grid.half_width + h * static_cast<double>(k);
            for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = anchor.values[j] + a * dir_a[j] + b * dir_b[j];
            out(i, k) = finite_or_inf(objective.loss(theta));
        }
    }
    return out;
}

Plane plane_through(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
    if (a.size() != b.size() || a.size() != c.size()) throw DimensionError("plane_through: point sizes differ");
    Plane p;
    p.origin.assign(a.begin(), a.end());
    p.u.resize(a.size());
    p.v.resize(a.size());
    std::vector<double> ca(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        p.u[j] = b[j] - a[j];
        ca[j] = c[j] - a[j];
    }
    const double nb = std::sqrt(dot(p.u, p.u));
    if (!(nb > 0.0)) throw DomainError("plane_through: first two points coincide");
    for (double& x : p.u) x /= nb;
    const double along = dot(ca, p.u);
    for (std::size_t j = 0; j < a.size(); ++j) p.v[j] = ca[j] - along * p.u[j];
    const double nv = std::sqrt(dot(p.v, p.v));
    if (!(nv > 0.0)) throw DomainError("plane_through: points are collinear");
    for (double& x : p.v) x /= nv;
    p.coord_b = {nb, 0.0};
    p.coord_c = {along, nv};
    return p;
}

Matrix plane_slice(const Objective& objective, const Plane& plane, std::span<const double> xs, std::span<const double> ys) {
    Matrix out(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
    std::vector<double> theta(plane.origin.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t k = 0; k < ys.size(); ++k) {
            for (std::size_t j = 0; j < theta.size(); ++j) theta[j] = plane.origin[j] + xs[i] * plane.u[j] + ys[k] * plane.v[j];
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = finite_or_inf(objective.loss(theta));
        }
    }
    return out;
}

}  // namespace basinvol
