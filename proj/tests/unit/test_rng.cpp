#include <doctest.h>

#include <cmath>
#include <set>

#include "basinvol/parallel.hpp"
#include "basinvol/rng.hpp"

using namespace basinvol;

TEST_SUITE("rng") {

TEST_CASE("philox known answers") {
    // Reference vectors of the Random123 distribution (philox4x32, 10 rounds).
    const auto zero = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    CHECK(zero == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

    const auto ones = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(ones == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});

    const auto pi = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    CHECK(pi == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal_at is addressable and standard") {
    CHECK(normal_at(5, 3, 17) == normal_at(5, 3, 17));
    CHECK(normal_at(5, 3, 17) != normal_at(6, 3, 17));
    CHECK(normal_at(5, 3, 17) != normal_at(5, 4, 17));

    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = normal_at(11, 3, static_cast<std::uint64_t>(i));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);  // ~4.5 standard errors
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("counter rng streams") {
    CounterRng a(42, Stream::shuffle), b(42, Stream::shuffle), c(42, Stream::init);
    for (int i = 0; i < 10; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
    }
    CounterRng r(1, 1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("mix_seed separates neighbours") {
    CHECK(mix_seed(0, 1) != mix_seed(1, 0));
    CHECK(mix_seed(0, 0) != mix_seed(0, 1));
    CHECK(mix_seed(3, 4) == mix_seed(3, 4));
}

TEST_CASE("parallel_map keeps index order and rethrows the first failure") {
    const auto out = parallel_map(50, 4, [](std::size_t i) { return i * i; });
    REQUIRE(out.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) CHECK(out[i] == i * i);

    auto failing = [](std::size_t i) -> int {
        if (i == 7 || i == 30) throw std::runtime_error("task " + std::to_string(i));
        return 0;
    };
    try {
        parallel_map(40, 3, failing);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "task 7");
    }
}

}
