#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "cbm/parallel.hpp"
#include "cbm/rng.hpp"

using namespace cbm;

TEST_SUITE("rng") {
    TEST_CASE("stream ids depend on every component") {
        std::uint64_t base = hash64(42, "eval.episode", 0);
        CHECK(base == hash64(42, "eval.episode", 0));
        CHECK(base != hash64(43, "eval.episode", 0));
        CHECK(base != hash64(42, "eval.episode", 1));
        CHECK(base != hash64(42, "thresholds.sweep", 0));

        // distinct indices should not collide over a modest range
        std::set<std::uint64_t> seen;
        for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(hash64(42, "eval.episode", i));
        CHECK(seen.size() == 10000);
    }

    TEST_CASE("identical streams replay identically") {
        Rng a(7, "unit.test", 3);
        Rng b(7, "unit.test", 3);
        for (int i = 0; i < 1000; ++i) {
            CHECK(a.uniform() == b.uniform());
            CHECK(a.poisson(3.7) == b.poisson(3.7));
            CHECK(a.gamma(2.5, 1.5) == b.gamma(2.5, 1.5));
            CHECK(a.beta(2.0, 5.0) == b.beta(2.0, 5.0));
            CHECK(a.geometric(0.4) == b.geometric(0.4));
            CHECK(a.uniform_int(-3, 12) == b.uniform_int(-3, 12));
        }
    }

    TEST_CASE("uniform and uniform_int respect their ranges") {
        Rng rng(1, "unit.test", 0);
        bool low_seen = false;
        bool high_seen = false;
        for (int i = 0; i < 20000; ++i) {
            double u = rng.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
            long v = rng.uniform_int(2, 5);
            CHECK(v >= 2);
            CHECK(v <= 5);
            low_seen = low_seen || v == 2;
            high_seen = high_seen || v == 5;
        }
        CHECK(low_seen);
        CHECK(high_seen);
    }

    TEST_CASE("samplers match their first two moments") {
        Rng rng(11, "unit.test", 0);
        const int n = 200000;
        double sum_g = 0.0;
        double sum_b = 0.0;
        double sum_geo = 0.0;
        double sum_p = 0.0;
        for (int i = 0; i < n; ++i) {
            sum_g += rng.gamma(3.0, 2.0);
            sum_b += rng.beta(2.0, 6.0);
            sum_geo += static_cast<double>(rng.geometric(0.25));
            sum_p += static_cast<double>(rng.poisson(4.2));
        }
        // 3 sigma bands around analytic means
        CHECK(std::abs(sum_g / n - 1.5) < 3.0 * std::sqrt(3.0 / 4.0 / n));
        CHECK(std::abs(sum_b / n - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / 9.0 / n));
        CHECK(std::abs(sum_geo / n - 3.0) < 3.0 * std::sqrt(0.75 / (0.25 * 0.25) / n));
        CHECK(std::abs(sum_p / n - 4.2) < 3.0 * std::sqrt(4.2 / n));
    }

    TEST_CASE("parallel_for fills every slot identically at any worker count") {
        const std::size_t n = 4096;
        auto run = [&](int workers) {
            std::vector<double> out(n, 0.0);
            parallel_for(n, workers, [&](std::size_t i) {
                Rng rng(5, "parallel.test", i);
                out[i] = rng.uniform() + static_cast<double>(i);
            });
            return out;
        };
        auto seq = run(1);
        auto par4 = run(4);
        auto par13 = run(13);
        CHECK(seq == par4);
        CHECK(seq == par13);
    }

    TEST_CASE("parallel_for propagates exceptions") {
        CHECK_THROWS_AS(parallel_for(100, 4,
                                     [](std::size_t i) {
                                         if (i == 37) throw std::runtime_error("boom");
                                     }),
                        std::runtime_error);
    }
}
