#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "basinvol/analysis.hpp"
#include "basinvol/datasets.hpp"
#include "basinvol/error.hpp"
#include "basinvol/optim.hpp"
#include "basinvol/oracle.hpp"
#include "basinvol/volume.hpp"
#include "support.hpp"

using namespace basinvol;

namespace {

constexpr double kPi = std::numbers::pi;

// Toy |xy - 1| objective at (1, 1) with a direction that is not filter scaled
// (the anchor's group norms are both 1).
Direction toy_dir(double dx, double dy) { return make_direction(toy_anchor(1.0), {dx, dy}); }

class ConstantObjective final : public Objective {
public:
    explicit ConstantObjective(double v) : v_(v) {}
    double loss(std::span<const double>) const override { return v_; }

private:
    double v_;
};

class NanObjective final : public Objective {
public:
    double loss(std::span<const double> p) const override {
        return std::abs(p[0] - 1.0) > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    }
};

struct TrainedSwiss {
    NetworkSpec spec;
    Dataset data;
    ParameterVector params;
};

const TrainedSwiss& trained_swiss() {
    static const TrainedSwiss t = [] {
        TrainedSwiss s;
        s.spec.input_dim = 2;
        s.spec.hidden_dims = {32, 32, 32};
        s.spec.output_dim = 2;
        s.data = gen_swiss_roll(200, 0.1, 1);
        TrainConfig tc;
        tc.epochs = 4000;
        tc.target_loss = 0.01;
        s.params = train(s.spec, s.data, Dataset{}, init_params(s.spec, 0), OptimizerConfig::defaults(OptimizerKind::adamw), tc)
                       .final_params;
        return s;
    }();
    return t;
}

}  // namespace

TEST_SUITE("volume") {

TEST_CASE("directions") {
    const auto p = init_params(NetworkSpec{3, {4}, 2}, 1);
    const auto a = sample_direction(p, 9, 4), b = sample_direction(p, 9, 4), c = sample_direction(p, 9, 5);
    CHECK(a.raw == b.raw);
    CHECK(a.scaled == b.scaled);
    CHECK(a.raw != c.raw);
    const auto f = filter_norms(p);
    for (std::size_t j = 0; j < p.size(); ++j) CHECK(a.scaled[j] == a.raw[j] * f.values[j]);
    // fresh biases are zero groups, so the direction never moves them
    for (std::size_t j = p.layout[1].offset; j < p.layout[1].offset + p.layout[1].size(); ++j) CHECK(a.scaled[j] == 0.0);

    auto ones = p;
    for (std::size_t g = 0; g < ones.layout.size(); ++g) {
        auto grp = ones.group(g);
        const double v = 1.0 / std::sqrt(static_cast<double>(grp.size()));
        for (double& x : grp) x = v;
    }
    const auto unit = sample_direction(ones, 9, 4);
    for (std::size_t j = 0; j < p.size(); ++j) CHECK(unit.scaled[j] == doctest::Approx(unit.raw[j]).epsilon(1e-15));

    const auto plain = sample_direction(p, 9, 4, false);
    CHECK(plain.scaled == plain.raw);
    CHECK(plain.raw == a.raw);
}

TEST_CASE("loss along a direction") {
    const ToyObjective toy;
    const auto anchor = toy_anchor(1.0);
    CHECK(loss_along(toy, anchor, toy_dir(1, 0), 0.0) == 0.0);
    CHECK(loss_along(toy, anchor, toy_dir(1, 0), 0.3) == doctest::Approx(0.3));
    for (double c : {0.0, 0.1, 0.7, 2.0}) CHECK(loss_along(toy, anchor, toy_dir(1, 1), c) == doctest::Approx(2 * c + c * c));
    CHECK(anchor.values == toy_anchor(1.0).values);
    CHECK(std::isinf(loss_along(NanObjective{}, anchor, toy_dir(1, 0), 1.0)));
    CHECK_THROWS_AS(loss_along(toy, anchor, toy_dir(1, 0), -0.1), DomainError);

    const auto& s = trained_swiss();
    const MlpObjective obj(s.spec, s.data);
    CHECK(loss_along(obj, s.params, sample_direction(s.params, 0, 0), 0.0) == loss_mean(s.spec, s.params, s.data));
}

TEST_CASE("radius search") {
    const ToyObjective toy;
    const auto anchor = toy_anchor(1.0);
    const RadiusSearch search{1.0, 100, 20};
    const auto along_x = find_radius(toy, anchor, toy_dir(1, 0), 0.2, search);
    CHECK(std::abs(along_x.radius - 0.2) < 1e-3);
    CHECK_FALSE(along_x.censored);
    const auto diag = find_radius(toy, anchor, toy_dir(1, 1), 0.2, search);
    CHECK(std::abs(diag.radius - (std::sqrt(1.2) - 1.0)) < 1e-3);
    CHECK(diag.extent() == doctest::Approx(diag.radius * std::sqrt(2.0)));

    // bracket property: at most one bisection width below the crossing
    const double width = search.c_max / static_cast<double>(search.scan_steps) / std::pow(2.0, 20);
    CHECK(loss_along(toy, anchor, toy_dir(1, 1), diag.radius - width) <= 0.2);
    CHECK(loss_along(toy, anchor, toy_dir(1, 1), diag.radius) > 0.2);

    const auto degenerate = find_radius(ConstantObjective(0.5), anchor, toy_dir(1, 0), 0.1, search);
    CHECK(degenerate.radius == 0.0);
    CHECK_FALSE(degenerate.censored);

    const auto never = find_radius(ConstantObjective(0.0), anchor, toy_dir(1, 0), 0.1, search);
    CHECK(never.censored);
    CHECK(never.radius == search.c_max);

    // quantized mode: no bisection, radius on the scan grid
    const auto coarse = find_radius(toy, anchor, toy_dir(1, 0), 0.2, RadiusSearch{1.0, 100, 0});
    CHECK(coarse.radius >= 0.2 - 1e-12);
    CHECK(coarse.radius <= 0.21 + 1e-12);
    CHECK(std::abs(coarse.radius * 100.0 - std::round(coarse.radius * 100.0)) < 1e-9);

    CHECK(std::isfinite(find_radius(NanObjective{}, anchor, toy_dir(1, 0), 0.1, search).radius));
    CHECK(find_radius(NanObjective{}, anchor, toy_dir(1, 0), 0.1, search).radius <= 0.51);
    CHECK_THROWS_AS(find_radius(toy, anchor, toy_dir(1, 0), 0.0, search), DomainError);
    CHECK_THROWS_AS(RadiusSearch({1.0, 1, 0}).validate(), DomainError);
}

TEST_CASE("unit ball") {
    CHECK(log_unit_ball(0) == 0.0);
    CHECK(log_unit_ball(1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(std::abs(log_unit_ball(2) - std::log(kPi)) <= 1e-15);
    CHECK(log_unit_ball(3) == doctest::Approx(std::log(4.0 * kPi / 3.0)).epsilon(1e-15));
    for (std::size_t n = 2; n <= 100; ++n) {
        const double lhs = log_unit_ball(n);
        const double rhs = log_unit_ball(n - 2) + std::log(2.0 * kPi / static_cast<double>(n));
        // relative in volume terms: |V_n / (V_{n-2} 2pi/n) - 1|
        CHECK(std::abs(std::expm1(lhs - rhs)) < 1e-12);
    }
    CHECK(std::isfinite(log_unit_ball(1000000)));
}

TEST_CASE("log-volume estimator") {
    const std::vector<double> ones{1.0, 1.0}, two{2.0}, one_three{1.0, 3.0};
    CHECK(estimate_log_volume(ones, 2) == doctest::Approx(std::log(kPi)).epsilon(1e-15));
    CHECK(estimate_log_volume(two, 2) == doctest::Approx(std::log(kPi) + 2 * std::log(2.0)).epsilon(1e-15));
    CHECK(estimate_log_volume(one_three, 2) == doctest::Approx(std::log(5 * kPi)).epsilon(1e-15));

    const std::vector<double> with_zero{0.0, 2.0};
    CHECK(estimate_log_volume(with_zero, 2) == doctest::Approx(std::log(kPi) + std::log(4.0 / 2.0)).epsilon(1e-15));
    const std::vector<double> zeros{0.0, 0.0};
    CHECK(estimate_log_volume(zeros, 3) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(estimate_log_volume(std::vector<double>{}, 2), DomainError);

    // 1e6 radii near 1 in 1e6 dimensions: r^n over- and underflows, the log domain does not
    const std::size_t n = 1000000;
    std::vector<double> radii(n);
    CounterRng rng(1, 1);
    for (auto& r : radii) r = rng.uniform(0.5, 2.0);
    const double v = estimate_log_volume(radii, n);
    CHECK(std::isfinite(v));
    const double max_term = static_cast<double>(n) * std::log(*std::max_element(radii.begin(), radii.end()));
    CHECK(v <= log_unit_ball(n) + max_term + 1e-6);
    CHECK(v >= log_unit_ball(n) + max_term - std::log(static_cast<double>(n)) - 1e-6);
}

TEST_CASE("threshold monotonicity and prefix consistency on a trained network") {
    const auto& s = trained_swiss();
    const MlpObjective obj(s.spec, s.data);
    REQUIRE(loss_mean(s.spec, s.params, s.data) <= 0.01);

    McConfig lo;
    lo.directions = 40;
    lo.threshold = 0.01;
    lo.search = {0.5, 100, 20};
    lo.seed = 3;
    McConfig hi = lo;
    hi.threshold = 0.1;
    const auto a = volume_of_minimum(obj, s.params, lo);
    const auto b = volume_of_minimum(obj, s.params, hi);
    for (std::size_t i = 0; i < a.radii.size(); ++i) CHECK(a.radii[i].radius <= b.radii[i].radius);
    CHECK(a.log_volume <= b.log_volume);

    McConfig small = hi;
    small.directions = 10;
    const auto prefix = volume_of_minimum(obj, s.params, small);
    for (std::size_t i = 0; i < prefix.radii.size(); ++i) {
        CHECK(prefix.radii[i].radius == b.radii[i].radius);
        CHECK(prefix.radii[i].direction_index == i);
    }

    McConfig threaded = hi;
    threaded.workers = 3;
    const auto t = volume_of_minimum(obj, s.params, threaded);
    CHECK(t.log_volume == b.log_volume);
}

TEST_CASE("volume of a minimum") {
    const auto& s = trained_swiss();
    McConfig mc;
    mc.directions = 20;
    mc.threshold = 0.1;
    mc.search = {0.5, 50, 10};
    const auto est = volume_of_minimum(s.spec, s.params, s.data, mc);
    CHECK(est.n_params == s.spec.param_count());
    CHECK(est.radii.size() == 20);
    CHECK(std::isfinite(est.log_volume));
    CHECK_FALSE(est.collapsed());
    std::vector<double> ext;
    for (const auto& r : est.radii) ext.push_back(r.extent());
    CHECK(est.log_volume == doctest::Approx(estimate_log_volume(ext, est.n_params)).epsilon(1e-14));
    CHECK(est.landscape_dataset_id == s.data.meta.id);

    const auto again = volume_of_minimum(s.spec, s.params, s.data, mc);
    CHECK(again.log_volume == est.log_volume);

    // a random network sits far above the threshold: collapsed
    const auto bad = volume_of_minimum(s.spec, init_params(s.spec, 5), s.data, mc);
    CHECK(bad.collapsed());
    CHECK(bad.log_volume == -std::numeric_limits<double>::infinity());
    for (const auto& r : bad.radii) CHECK(r.radius == 0.0);
}

TEST_CASE("slices") {
    const ToyObjective toy;
    const auto anchor = toy_anchor(1.0);
    const std::vector<double> da{1.0, 0.0}, db{0.0, 1.0};
    const auto grid = landscape_slice(toy, anchor, da, db, {1.0, 2});
    CHECK(grid.rows() == 5);
    CHECK(grid.cols() == 5);
    CHECK(grid(2, 2) == 0.0);
    CHECK(grid(4, 2) == doctest::Approx(toy_loss(2.0, 1.0)));
    CHECK(grid(2, 0) == doctest::Approx(toy_loss(1.0, 0.0)));

    const std::vector<double> a{0.0, 0.0}, b{2.0, 0.0}, c{1.0, 3.0};
    const auto plane = plane_through(a, b, c);
    CHECK(plane.coord_b[0] == doctest::Approx(2.0));
    CHECK(plane.coord_b[1] == doctest::Approx(0.0));
    CHECK(plane.coord_c[0] == doctest::Approx(1.0));
    CHECK(plane.coord_c[1] == doctest::Approx(3.0));
    const std::vector<double> xs{1.0}, ys{1.0};
    const auto one = plane_slice(toy, plane, xs, ys);
    CHECK(one(0, 0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(plane_through(a, a, c), DomainError);
    CHECK_THROWS_AS(plane_through(a, b, std::vector<double>{4.0, 0.0}), DomainError);
}

}
