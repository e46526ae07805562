#include <doctest.h>

#include <cmath>
#include <numbers>

#include "basinvol/error.hpp"
#include "basinvol/nn.hpp"
#include "basinvol/oracle.hpp"
#include "support.hpp"

using namespace basinvol;
using testing::make_dataset;
using testing::random_dataset;

namespace {

NetworkSpec spec_of(std::size_t in, std::vector<std::size_t> hidden, std::size_t out,
                    LossKind loss = LossKind::cross_entropy) {
    NetworkSpec s;
    s.input_dim = in;
    s.hidden_dims = std::move(hidden);
    s.output_dim = out;
    s.loss_kind = loss;
    return s;
}

double central_difference(const NetworkSpec& spec, const ParameterVector& p, const Dataset& d, std::size_t j, double h) {
    ParameterVector plus = p, minus = p;
    plus.values[j] += h;
    minus.values[j] -= h;
    return (loss_mean(spec, plus, d) - loss_mean(spec, minus, d)) / (2.0 * h);
}

// Largest per-coordinate relative mismatch between the analytic gradient and
// central differences; coordinates with both magnitudes below `floor` are
// compared absolutely.
double worst_gradient_error(const NetworkSpec& spec, const ParameterVector& p, const Dataset& d, double floor) {
    const ParameterVector g = grad(spec, p, d);
    double worst = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double fd = central_difference(spec, p, d, j, 1e-5);
        const double scale = std::max({std::abs(fd), std::abs(g.values[j]), floor});
        worst = std::max(worst, std::abs(fd - g.values[j]) / scale);
    }
    return worst;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("parameter count and layout") {
    const auto mnist = spec_of(784, {256, 128}, 10);
    CHECK(mnist.param_count() == 235146);
    const auto p = zero_params(mnist);
    CHECK(p.size() == 235146);
    CHECK(p.layout.size() == 6);
    p.validate();
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(p.layout[2 * l].kind == GroupKind::weight);
        CHECK(p.layout[2 * l + 1].kind == GroupKind::bias);
        CHECK(p.layout[2 * l].layer == l);
    }
    CHECK_THROWS_AS(spec_of(2, {}, 2).validate(), DomainError);
    CHECK_THROWS_AS(spec_of(2, {0}, 2).validate(), DomainError);
}

TEST_CASE("init is deterministic with zero biases") {
    const auto s = spec_of(2, {2}, 2);
    const auto a = init_params(s, 7), b = init_params(s, 7), c = init_params(s, 8);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);

    const auto big = spec_of(20, {30, 10}, 3);
    const auto p = init_params(big, 1);
    for (std::size_t g = 0; g < p.layout.size(); ++g) {
        const auto& grp = p.layout[g];
        const double bound = 1.0 / std::sqrt(static_cast<double>(big.fan_in(grp.layer)));
        for (double v : p.group(g)) {
            if (grp.kind == GroupKind::bias) {
                CHECK(v == 0.0);
            } else {
                CHECK(std::abs(v) <= bound);
            }
        }
    }
}

TEST_CASE("forward by hand") {
    const auto s = spec_of(1, {1}, 1);
    Matrix x(2, 1);
    x << 2.0, -3.0;
    const auto zero = forward(s, zero_params(s), x);
    CHECK(zero(0, 0) == 0.0);
    CHECK(zero(1, 0) == 0.0);

    auto p = zero_params(s);
    p.group(0)[0] = 1.0;
    p.group(2)[0] = 1.0;
    const auto y = forward(s, p, x);
    CHECK(y(0, 0) == 2.0);
    CHECK(y(1, 0) == 0.0);

    CHECK_THROWS_AS(forward(s, p, Matrix::Zero(1, 2)), DimensionError);
}

TEST_CASE("loss values") {
    const auto s = spec_of(3, {4}, 10);
    const auto d = random_dataset(6, 3, 10, 2);
    CHECK(loss_mean(s, zero_params(s), d) == doctest::Approx(std::log(10.0)).epsilon(1e-14));

    // identity network on one-hot rows reproduces the one-hot targets
    const auto m = spec_of(2, {2}, 2, LossKind::mse_onehot);
    auto p = zero_params(m);
    p.group(0)[0] = 1.0;
    p.group(0)[3] = 1.0;
    p.group(2)[0] = 1.0;
    p.group(2)[3] = 1.0;
    const auto onehot = make_dataset({{1, 0}, {0, 1}, {1, 0}}, {0, 1, 0}, 2);
    CHECK(loss_mean(m, p, onehot) == 0.0);
    for (double g : grad(m, p, onehot).values) CHECK(g == 0.0);

    // one output off by 1 in one of two coordinates of one of three rows
    auto q = p;
    q.group(3)[1] = 1.0;  // output bias of class 1
    const auto single = make_dataset({{1, 0}}, {0}, 2);
    CHECK(loss_mean(m, q, single) == doctest::Approx(0.5));

    CHECK_THROWS_AS(loss_mean(s, zero_params(s), make_dataset({}, {}, 10)), DomainError);
}

TEST_CASE("duplicating the dataset leaves loss and gradient unchanged") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = spec_of(3, {5, 4}, 3, seed % 2 ? LossKind::mse_onehot : LossKind::cross_entropy);
        const auto p = init_params(s, seed);
        const auto d = random_dataset(17 + seed * 13, 3, 3, seed);
        const auto dd = testing::concat_self(d);
        CHECK(loss_mean(s, p, d) == loss_mean(s, p, dd));
        const auto g1 = grad(s, p, d), g2 = grad(s, p, dd);
        for (std::size_t j = 0; j < g1.size(); ++j) CHECK(g1.values[j] == doctest::Approx(g2.values[j]).epsilon(1e-12));
    }
}

TEST_CASE("gradient matches central differences") {
    SUBCASE("2-3-2 net on 8 samples") {
        const auto s = spec_of(2, {3}, 2);
        const auto p = init_params(s, 3);
        const auto d = random_dataset(8, 2, 2, 4);
        CHECK(worst_gradient_error(s, p, d, 1e-6) < 1e-6);
    }
    SUBCASE("random small nets") {
        int checked = 0;
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            CounterRng rng(seed, 7);
            const std::size_t in = 1 + rng.below(3);
            std::vector<std::size_t> hidden(1 + rng.below(2));
            for (auto& h : hidden) h = 1 + rng.below(4);
            const std::size_t out = 2 + rng.below(2);
            const auto s = spec_of(in, hidden, out, rng.below(2) ? LossKind::mse_onehot : LossKind::cross_entropy);
            if (s.param_count() > 50) continue;
            auto p = init_params(s, seed);
            // nonzero biases so that the check also covers them
            for (std::size_t g = 1; g < p.layout.size(); g += 2)
                for (double& v : p.group(g)) v = 0.1 * rng.normal();
            const auto d = random_dataset(6, in, out, seed + 100);
            CAPTURE(seed);
            CHECK(worst_gradient_error(s, p, d, 1e-6) < 1e-6);
            ++checked;
        }
        CHECK(checked >= 20);
    }
}

TEST_CASE("relu rescaling keeps the network function") {
    const auto s = spec_of(2, {4, 4}, 2);
    const auto p = init_params(s, 5);
    Matrix x(100, 2);
    CounterRng rng(9, 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) << 3.0 * rng.normal(), 3.0 * rng.normal();

    CHECK(rescale_layer_pair(s, p, 0, 1.0).values == p.values);
    const auto base = forward(s, p, x);
    for (std::size_t layer : {0u, 1u}) {
        for (double alpha : {0.1, 2.0, 10.0}) {
            const auto q = rescale_layer_pair(s, p, layer, alpha);
            CHECK((forward(s, q, x) - base).cwiseAbs().maxCoeff() < 1e-9);
            const auto back = rescale_layer_pair(s, q, layer, 1.0 / alpha);
            for (std::size_t j = 0; j < p.size(); ++j) CHECK(std::abs(back.values[j] - p.values[j]) < 1e-12);
        }
    }
    // the next layer's biases stay put
    const auto q = rescale_layer_pair(s, p, 0, 10.0);
    const auto next_bias = q.group(3), orig_bias = p.group(3);
    for (std::size_t j = 0; j < next_bias.size(); ++j) CHECK(next_bias[j] == orig_bias[j]);

    CHECK_THROWS_AS(rescale_layer_pair(s, p, 2, 2.0), DomainError);
    CHECK_THROWS_AS(rescale_layer_pair(s, p, 0, 0.0), DomainError);
    CHECK_THROWS_AS(rescale_layer_pair(s, p, 0, -1.0), DomainError);
}

TEST_CASE("filter norms") {
    const auto s = spec_of(2, {1}, 1);
    auto p = zero_params(s);
    p.group(0)[0] = 3.0;
    p.group(0)[1] = 4.0;
    p.group(2)[0] = -2.0;
    const auto f = filter_norms(p);
    CHECK(f.values[0] == 5.0);
    CHECK(f.values[1] == 5.0);
    CHECK(f.values[2] == 0.0);  // zero bias group
    CHECK(f.values[3] == 2.0);
    CHECK(f.values[4] == 0.0);

    // the toy anchor keeps each coordinate in its own group
    const auto toy = filter_norms(toy_anchor(2.0));
    CHECK(toy.values[0] == 2.0);
    CHECK(toy.values[1] == 0.5);

    const auto big = spec_of(5, {7, 3}, 4);
    const auto q = init_params(big, 12);
    const auto fq = filter_norms(q);
    for (std::size_t g = 0; g < q.layout.size(); ++g) {
        double sq = 0.0;
        for (double v : q.group(g)) sq += v * v;
        for (double v : fq.group(g)) {
            CHECK(v >= 0.0);
            CHECK(std::abs(v - std::sqrt(sq)) <= 1e-12);
        }
    }
}

TEST_CASE("pairwise sum doubles exactly") {
    std::vector<double> xs;
    CounterRng rng(3, 3);
    for (int n : {1, 2, 3, 7, 100, 1001}) {
        xs.resize(static_cast<std::size_t>(n));
        for (auto& x : xs) x = rng.normal() * 1e3;
        std::vector<double> twice = xs;
        twice.insert(twice.end(), xs.begin(), xs.end());
        CHECK(pairwise_sum(twice) == 2.0 * pairwise_sum(xs));
    }
}

}
