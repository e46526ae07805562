#include "basinvol/oracle.hpp"

#include <cmath>

#include "basinvol/error.hpp"

namespace basinvol {

double toy_loss(double x, double y) noexcept { return std::abs(x * y - 1.0); }

void ToyBasin::validate() const {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("toy basin: s must lie in (0, 1)");
    if (!(b > 0.0)) throw DomainError("toy basin: b must be positive");
}

double ToyObjective::loss(std::span<const double> params) const {
    if (params.size() != 2) throw DimensionError("toy objective takes exactly two parameters");
    return toy_loss(params[0], params[1]);
}

ParameterVector toy_anchor(double b) {
    if (!(b > 0.0)) throw DomainError("toy anchor: b must be positive");
    ParameterVector p;
    p.values = {b, 1.0 / b};
    p.layout = {{0, GroupKind::weight, 0, 0, 1, 1}, {1, GroupKind::weight, 1, 1, 1, 1}};
    return p;
}

std::pair<double, double> toy_critical_points(double s, double b) {
    ToyBasin{s, b}.validate();
    const double q = std::sqrt(s / (1.0 + s));
    return {b * (1.0 + s) * (1.0 - q), b * (1.0 + s) * (1.0 + q)};
}

std::pair<double, double> toy_extent(double s, double b) {
    const auto [xc1, xc2] = toy_critical_points(s, b);
    const double q = std::sqrt(2.0 * s / (1.0 + s));
    return {xc1 * (1.0 - q), xc2 * (1.0 + q)};
}

double toy_volume_closed_form(double s) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("toy volume: s must lie in (0, 1)");
    const double q1 = std::sqrt(s / (1.0 + s));
    const double q2 = std::sqrt(2.0 * s / (1.0 + s));
    return 2.0 * std::sqrt(2.0 * s * (1.0 + s)) + 2.0 * s * std::log((1.0 + q1) / (1.0 - q1)) -
           (1.0 - s) * std::log((1.0 + q2) / (1.0 - q2));
}

double grid_volume(const std::function<double(double, double)>& loss, double threshold, const Bounds& bounds,
                   std::size_t resolution, std::pair<double, double> anchor, bool star_convex) {
    if (resolution < 10) throw DomainError("grid_volume: resolution must be at least 10");
    if (!(bounds.x_hi > bounds.x_lo && bounds.y_hi > bounds.y_lo)) throw DomainError("grid_volume: empty bounds");
    const auto [ax, ay] = anchor;
    if (ax < bounds.x_lo || ax > bounds.x_hi || ay < bounds.y_lo || ay > bounds.y_hi) {
        throw DomainError("grid_volume: bounds must contain the anchor");
    }
    const double dx = (bounds.x_hi - bounds.x_lo) / static_cast<double>(resolution);
    const double dy = (bounds.y_hi - bounds.y_lo) / static_cast<double>(resolution);
    const double diag = std::hypot(dx, dy);

    std::size_t count = 0;
    for (std::size_t i = 0; i < resolution; ++i) {
        const double x = bounds.x_lo + (static_cast<double>(i) + 0.5) * dx;
        for (std::size_t k = 0; k < resolution; ++k) {
            const double y = bounds.y_lo + (static_cast<double>(k) + 0.5) * dy;
            if (!(loss(x, y) <= threshold)) continue;
            if (star_convex) {
                const double len = std::hypot(x - ax, y - ay);
                const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / diag)));
                bool inside = true;
                for (std::size_t j = 1; j < m && inside; ++j) {
                    const double t = static_cast<double>(j) / static_cast<double>(m);
                    inside = loss(ax + t * (x - ax), ay + t * (y - ay)) <= threshold;
                }
                if (!inside) continue;
            }
            ++count;
        }
    }
    return static_cast<double>(count) * dx * dy;
}

VolumeEstimate toy_monte_carlo(const ToyBasin& basin, const OracleConfig& cfg) {
    basin.validate();
    ToyObjective objective;
    McConfig mc;
    mc.directions = cfg.directions;
    mc.threshold = basin.s;
    mc.search = cfg.search;
    mc.seed = cfg.seed;
    mc.workers = cfg.workers;
    return volume_of_minimum(objective, toy_anchor(basin.b), mc, "toy(|xy-1|)");
}

OracleReport run_toy_oracle(const ToyBasin& basin, const OracleConfig& cfg) {
    basin.validate();
    OracleReport r;
    r.s = basin.s;
    r.b = basin.b;
    r.closed_form = toy_volume_closed_form(basin.s);

    // The star-convex region lies inside [x_i, x_f] x [y_i, y_f]; by the
    // x <-> y symmetry of the loss, y_i = x_i / b^2 and y_f = x_f / b^2.
    const auto [xi, xf] = toy_extent(basin.s, basin.b);
    const double pad = 0.02 * (xf - xi);
    const double b2 = basin.b * basin.b;
    const Bounds bounds{xi - pad, xf + pad, xi / b2 - pad / b2, xf / b2 + pad / b2};
    r.grid = grid_volume(toy_loss, basin.s, bounds, cfg.grid_resolution, basin.anchor(), true);

    r.estimate = toy_monte_carlo(basin, cfg);
    r.mc = std::exp(r.estimate.log_volume);
    r.grid_rel_error = std::abs(r.grid - r.closed_form) / r.closed_form;
    r.mc_rel_error = std::abs(r.mc - r.closed_form) / r.closed_form;
    return r;
}

}  // namespace basinvol
