#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <map>
#include <vector>

#include "cbm/bayes.hpp"
#include "cbm/degradation.hpp"
#include "cbm/rng.hpp"

using namespace cbm;

namespace {

AssetBelief apply_signals(const std::vector<PeriodSignal>& sigs) {
    AssetBelief b;
    for (const auto& s : sigs) {
        b.x += s.z;
        b.k += s.k;
        b.t += 1;
    }
    return b;
}

}  // namespace

TEST_SUITE("bayes") {
    TEST_CASE("batched and sequential updates agree") {
        PopulationPrior prior{2.3, 1.7, 3.1, 4.4};
        std::vector<PeriodSignal> sigs = {{2, 5}, {0, 0}, {1, 0}, {4, 9}};
        AssetBelief whole = apply_signals(sigs);
        PosteriorParams batch = posterior(prior, whole);

        AssetBelief step;
        for (const auto& s : sigs) {
            step.x += s.z;
            step.k += s.k;
            step.t += 1;
        }
        PosteriorParams seq = posterior(prior, step);
        CHECK(batch.alpha_t == seq.alpha_t);
        CHECK(batch.beta_t == seq.beta_t);
        CHECK(batch.a_t == seq.a_t);
        CHECK(batch.b_t == seq.b_t);

        CHECK(batch.alpha_t == doctest::Approx(2.3 + 7.0));
        CHECK(batch.beta_t == doctest::Approx(1.7 + 4.0));
        CHECK(batch.a_t == doctest::Approx(3.1 + 14.0));
        CHECK(batch.b_t == doctest::Approx(4.4 + 7.0));

        PointEstimates est = point_estimates(batch);
        CHECK(est.lambda_hat == doctest::Approx(9.3 / 5.7));
        CHECK(est.q_hat == doctest::Approx(17.1 / (17.1 + 11.4)));
    }

    TEST_CASE("fresh predictive matches the simulated population marginal") {
        PopulationPrior prior{2.0, 1.5, 3.0, 3.5};
        Rng rng(21, "bayes.test", 0);
        const int n = 150000;
        const long kcap = 12;
        const long zcap = 30;
        std::vector<double> observed(static_cast<std::size_t>((kcap + 2) * (zcap + 2)), 0.0);
        auto slot = [&](long k, long z) {
            return static_cast<std::size_t>(std::min(k, kcap + 1) * (zcap + 2) +
                                            std::min(z, zcap + 1));
        };
        for (int i = 0; i < n; ++i) {
            DegradationParams params = sample_params(prior, rng);
            PeriodSignal sig = sample_period(params, rng);
            observed[slot(sig.k, sig.z)] += 1.0;
        }
        std::vector<double> expected(observed.size(), 0.0);
        AssetBelief fresh;
        // independent negative-binomial count marginal for the row masses
        double pk = std::pow(prior.beta / (prior.beta + 1.0), prior.alpha);
        double count_mass = 0.0;
        for (long k = 0; k <= kcap; ++k) {
            double row = 0.0;
            for (long z = 0; z <= zcap; ++z) {
                double p = std::exp(predictive_logpmf(prior, fresh, {k, z}));
                expected[slot(k, z)] += p * n;
                row += p;
            }
            // damage overflow within this count row
            expected[slot(k, zcap + 1)] += std::max(0.0, pk - row) * n;
            count_mass += pk;
            pk *= (prior.alpha + static_cast<double>(k)) /
                  ((static_cast<double>(k) + 1.0) * (prior.beta + 1.0));
        }
        // everything remaining: counts beyond the cap
        expected[slot(kcap + 1, zcap + 1)] += std::max(0.0, 1.0 - count_mass) * n;
        auto stat_of = [](const std::vector<double>& obs, const std::vector<double>& exp) {
            double stat = 0.0;
            int bins = 0;
            double op = 0.0;
            double ep = 0.0;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                op += obs[i];
                ep += exp[i];
                if (ep >= 5.0) {
                    stat += (op - ep) * (op - ep) / ep;
                    ++bins;
                    op = ep = 0.0;
                }
            }
            if (ep > 0.0) {
                stat += (op - ep) * (op - ep) / ep;
                ++bins;
            }
            return std::pair<double, int>{stat, bins};
        };
        auto [stat, bins] = stat_of(observed, expected);
        REQUIRE(bins > 5);
        boost::math::chi_squared dist(bins - 1);
        CHECK(stat < boost::math::quantile(dist, 0.99));
    }

    TEST_CASE("posterior means are martingales under the predictive") {
        PopulationPrior prior{3.0, 2.0, 4.0, 5.0};
        Rng rng(22, "bayes.test", 1);
        const int n = 200000;
        double sum_l = 0.0;
        double sum_l2 = 0.0;
        double sum_q = 0.0;
        double sum_q2 = 0.0;
        AssetBelief fresh;
        for (int i = 0; i < n; ++i) {
            PeriodSignal sig = predictive_sample_period(prior, fresh, rng);
            AssetBelief next{sig.z, sig.k, 1};
            PointEstimates est = point_estimates(posterior(prior, next));
            sum_l += est.lambda_hat;
            sum_l2 += est.lambda_hat * est.lambda_hat;
            sum_q += est.q_hat;
            sum_q2 += est.q_hat * est.q_hat;
        }
        double mean_l = sum_l / n;
        double se_l = std::sqrt((sum_l2 / n - mean_l * mean_l) / n);
        CHECK(std::abs(mean_l - prior.mean_lambda()) < 3.0 * se_l);
        double mean_q = sum_q / n;
        double se_q = std::sqrt((sum_q2 / n - mean_q * mean_q) / n);
        CHECK(std::abs(mean_q - prior.mean_q()) < 3.0 * se_q);
    }

    TEST_CASE("zero-shock probability matches the closed form and simulation") {
        PopulationPrior prior{2.5, 3.0, 2.0, 2.0};
        AssetBelief belief{4, 2, 3};
        PosteriorParams post = posterior(prior, belief);
        double closed = predictive_p_zero_shocks(post);
        CHECK(std::log(closed) ==
              doctest::Approx(predictive_logpmf(prior, belief, {0, 0})).epsilon(1e-10));

        Rng rng(23, "bayes.test", 2);
        const int n = 100000;
        long zeros = 0;
        for (int i = 0; i < n; ++i)
            if (predictive_sample_period(prior, belief, rng).k == 0) ++zeros;
        double freq = static_cast<double>(zeros) / n;
        CHECK(std::abs(freq - closed) < 3.0 * std::sqrt(closed * (1.0 - closed) / n));
    }

    TEST_CASE("no shocks means no damage") {
        PopulationPrior prior{2.0, 2.0, 2.0, 2.0};
        AssetBelief fresh;
        CHECK(predictive_logpmf(prior, fresh, {0, 5}) ==
              -std::numeric_limits<double>::infinity());
        Rng rng(24, "bayes.test", 3);
        for (int i = 0; i < 5000; ++i) {
            PeriodSignal sig = predictive_sample_period(prior, fresh, rng);
            if (sig.k == 0) CHECK(sig.z == 0);
        }
    }

    TEST_CASE("kernel enumeration sums to one and orders cells") {
        for (PosteriorParams post : {PosteriorParams{2.0, 1.5, 3.0, 3.5},
                                     PosteriorParams{40.7, 28.8, 8.9, 9.4},
                                     PosteriorParams{230.0, 180.0, 60.0, 200.0}}) {
            auto cells = enumerate_predictive(post, 1e-8);
            double total = 0.0;
            long prev_k = -1;
            long prev_z = -1;
            for (const auto& c : cells) {
                REQUIRE(c.p >= 0.0);
                if (c.k == prev_k) {
                    REQUIRE(c.z > prev_z);
                } else {
                    REQUIRE(c.k > prev_k);
                }
                prev_k = c.k;
                prev_z = c.z;
                total += c.p;
            }
            CHECK(std::abs(total - 1.0) < 1e-10);
        }
    }

    TEST_CASE("interior enumerated cells match the direct log-pmf") {
        PopulationPrior prior{2.0, 1.5, 3.0, 3.5};
        AssetBelief belief{6, 3, 4};
        PosteriorParams post = posterior(prior, belief);
        auto cells = enumerate_predictive(post, 1e-14);
        int compared = 0;
        for (const auto& c : cells) {
            if (c.p < 1e-4) continue;  // tails can hold lumped remainders
            double direct = std::exp(predictive_logpmf(prior, belief, {c.k, c.z}));
            CHECK(c.p == doctest::Approx(direct).epsilon(1e-8));
            ++compared;
        }
        CHECK(compared > 10);
    }

    TEST_CASE("damage caps merge tail cells without losing mass") {
        PosteriorParams post{2.0, 1.5, 3.0, 3.5};
        const long cap = 4;
        auto cells = enumerate_predictive(post, 1e-10, cap);
        double total = 0.0;
        for (const auto& c : cells) {
            CHECK(c.z <= cap);
            total += c.p;
        }
        CHECK(std::abs(total - 1.0) < 1e-10);

        // capped cells absorb exactly the mass of everything at or beyond the cap
        auto full = enumerate_predictive(post, 1e-12);
        double beyond_full = 0.0;
        for (const auto& c : full)
            if (c.z >= cap) beyond_full += c.p;
        double at_cap = 0.0;
        for (const auto& c : cells)
            if (c.z == cap) at_cap += c.p;
        CHECK(at_cap == doctest::Approx(beyond_full).epsilon(1e-6));
    }

    TEST_CASE("unit-shock predictive degenerates to the known-rate sampler") {
        PopulationPrior prior{5.0, 1.0, 2.0, 2.0};
        AssetBelief belief{3, 7, 2};
        Rng a(25, "bayes.test", 4);
        for (int i = 0; i < 2000; ++i) {
            PeriodSignal sig = predictive_sample_period(prior, belief, a, ShockModel::unit);
            CHECK(sig.z == sig.k);
        }
    }
}
