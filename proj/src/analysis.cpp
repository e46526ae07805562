#include "basinvol/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "basinvol/error.hpp"
#include "basinvol/parallel.hpp"

namespace basinvol {

ScalingFit fit_power_law(std::span<const ScalingPoint> points, std::size_t n_params) {
    if (n_params == 0) throw DomainError("fit_power_law: parameter count must be positive");
    ScalingFit fit;
    fit.n_params = n_params;
    for (const auto& p : points) {
        if (!(p.dataset_size > 0.0)) throw DomainError("fit_power_law: dataset sizes must be positive");
        if (std::isfinite(p.log_volume)) {
            fit.points.push_back(p);
        } else {
            ++fit.excluded;
        }
    }
    if (fit.points.size() < 2) throw DomainError("fit_power_law: need at least two points with finite log-volume");

    const double n = static_cast<double>(fit.points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : fit.points) {
        mx += std::log(p.dataset_size);
        my += p.log_volume;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : fit.points) {
        const double dx = std::log(p.dataset_size) - mx;
        const double dy = p.log_volume - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw DomainError("fit_power_law: all dataset sizes are equal");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.alpha = fit.slope / static_cast<double>(n_params);
    double ss_res = 0.0;
    for (const auto& p : fit.points) {
        const double r = p.log_volume - (fit.intercept + fit.slope * std::log(p.dataset_size));
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

std::vector<HistogramBin> radii_histogram(const VolumeEstimate& estimate, std::size_t bins) {
    if (bins == 0) throw DomainError("radii_histogram: need at least one bin");
    if (estimate.radii.empty()) throw DomainError("radii_histogram: no radii");
    double top = 0.0;
    for (const auto& r : estimate.radii) top = std::max(top, r.radius);
    const double width = top / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        out[k].lo = width * static_cast<double>(k);
        out[k].hi = k + 1 == bins ? top : width * static_cast<double>(k + 1);
    }
    for (const auto& r : estimate.radii) {
        std::size_t k = width > 0.0 ? static_cast<std::size_t>(r.radius / width) : 0;
        k = std::min(k, bins - 1);
        ++out[k].count;
        if (r.censored) ++out[k].censored;
    }
    return out;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw DomainError("median of an empty sequence");
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

RadiiSummary summarize_radii(const VolumeEstimate& estimate) {
    if (estimate.radii.empty()) throw DomainError("summarize_radii: no radii");
    RadiiSummary s;
    std::vector<double> r;
    r.reserve(estimate.radii.size());
    for (const auto& x : estimate.radii) {
        r.push_back(x.radius);
        if (x.censored) ++s.censored;
    }
    s.any_censored = s.censored > 0;
    s.min = *std::min_element(r.begin(), r.end());
    s.max = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double x : r) sum += x;
    s.mean = sum / static_cast<double>(r.size());
    s.median = median(std::move(r));
    return s;
}

CrossLandscapeMatrix cross_landscape_matrix(const NetworkSpec& spec, std::span<const ParameterVector> models,
                                            std::span<const Dataset> landscapes, const McConfig& mc,
                                            std::size_t workers) {
    const ParameterVector reference = zero_params(spec);
    for (const auto& m : models) {
        if (!m.same_layout(reference)) throw DimensionError("cross_landscape_matrix: model does not match the network spec");
    }
    const std::size_t cols = landscapes.size();
    auto flat = parallel_map(models.size() * cols, workers, [&](std::size_t cell) {
        return volume_of_minimum(spec, models[cell / cols], landscapes[cell % cols], mc);
    });
    CrossLandscapeMatrix out;
    out.cells.resize(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) out.cells[i].push_back(std::move(flat[i * cols + j]));
    }
    return out;
}

double mean_finite(std::span<const double> xs, std::size_t* finite_count) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    }
    if (finite_count) *finite_count = n;
    return n ? sum / static_cast<double>(n) : -std::numeric_limits<double>::infinity();
}

}  // namespace basinvol
