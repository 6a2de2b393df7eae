#include <doctest.h>

#include <cstdint>
#include <vector>

#include "cbm/threshold.hpp"

using namespace cbm;

namespace {

NetworkConfig small_net(int assets, long xi) {
    AssetConfig asset;
    asset.xi = xi;
    asset.c_pm = 1.0;
    asset.c_cm = 5.0;
    asset.prior = PopulationPrior{50.0, 50.0, 50.0, 50.0};
    NetworkConfig cfg;
    cfg.assets.assign(static_cast<std::size_t>(assets), asset);
    cfg.c_st = 0.5;
    cfg.gamma = 0.9;
    return cfg;
}

NetworkState levels(const std::vector<long>& x) {
    NetworkState st;
    st.mode = Mode::L2;
    st.assets.resize(x.size());
    for (std::size_t m = 0; m < x.size(); ++m) {
        st.assets[m].belief.x = x[m];
        st.assets[m].params = DegradationParams{1.0, 0.5};
    }
    return st;
}

ActionVector act(const ThresholdPolicy& pol, const NetworkConfig& cfg, const std::vector<long>& x) {
    Rng rng(1, "thr.act", 0);
    return pol.decide(levels(x), cfg, rng).action;
}

}  // namespace

TEST_SUITE("threshold") {

TEST_CASE("thresholds trigger preventive, corrective and opportunistic work") {
    NetworkConfig cfg = small_net(2, 20);
    ThresholdPolicy pol = ThresholdPolicy::symmetric(cfg, 15, 9);

    CHECK(act(pol, cfg, {14, 8}) == ActionVector{0, 0});
    CHECK(act(pol, cfg, {14, 14}) == ActionVector{0, 0});  // below tau_pm nothing starts
    CHECK(act(pol, cfg, {15, 8}) == ActionVector{1, 0});
    CHECK(act(pol, cfg, {15, 9}) == ActionVector{1, 1});   // partner joins at tau_opm
    CHECK(act(pol, cfg, {16, 10}) == ActionVector{1, 1});
    CHECK(act(pol, cfg, {20, 3}) == ActionVector{1, 0});   // failure alone
    CHECK(act(pol, cfg, {20, 9}) == ActionVector{1, 1});
    CHECK(act(pol, cfg, {22, 20}) == ActionVector{1, 1});
    CHECK(act(pol, cfg, {9, 9}) == ActionVector{0, 0});    // tau_opm needs an initiator

    // opportunities flow forward through the ordered pass only: an asset
    // decided before the initiator does not join retroactively
    CHECK(act(pol, cfg, {9, 15}) == ActionVector{0, 1});
    CHECK(act(pol, cfg, {9, 20}) == ActionVector{0, 1});
}

TEST_CASE("raising a damage level never shrinks the replace set") {
    NetworkConfig cfg = small_net(2, 8);
    ThresholdPolicy pol = ThresholdPolicy::symmetric(cfg, 5, 3);
    for (long x1 = 0; x1 <= 8; ++x1) {
        for (long x2 = 0; x2 <= 8; ++x2) {
            ActionVector base = act(pol, cfg, {x1, x2});
            if (x1 < 8) {
                ActionVector up = act(pol, cfg, {x1 + 1, x2});
                CHECK(up[0] >= base[0]);
                CHECK(up[1] >= base[1]);
            }
            if (x2 < 8) {
                ActionVector up = act(pol, cfg, {x1, x2 + 1});
                CHECK(up[0] >= base[0]);
                CHECK(up[1] >= base[1]);
            }
        }
    }
}

TEST_CASE("single-asset decisions honor partner commitments") {
    NetworkConfig cfg = small_net(2, 20);
    ThresholdPolicy pol = ThresholdPolicy::symmetric(cfg, 15, 9);
    Rng rng(2, "thr.one", 0);
    NetworkState st = levels({10, 10});
    CHECK(pol.decide_one(st, cfg, 0, true, rng));    // 10 >= tau_opm with work under way
    CHECK_FALSE(pol.decide_one(st, cfg, 0, false, rng));
    NetworkState low = levels({8, 8});
    CHECK_FALSE(pol.decide_one(low, cfg, 0, true, rng));
    NetworkState down = levels({20, 0});
    CHECK(pol.decide_one(down, cfg, 0, false, rng)); // failure replaces regardless

    // the committed flag is the only carrier of opportunity; an uncommitted
    // partner above tau_pm does not count yet
    NetworkState pending = levels({10, 16});
    CHECK_FALSE(pol.decide_one(pending, cfg, 0, false, rng));
    CHECK(pol.decide_one(pending, cfg, 1, false, rng));
}

TEST_CASE("reactive policy waits for failure") {
    NetworkConfig cfg = small_net(2, 20);
    ThresholdPolicy pol = ThresholdPolicy::reactive(cfg);
    CHECK(pol.tau_pm() == std::vector<long>{20, 20});
    CHECK(pol.tau_opm() == std::vector<long>{20, 20});
    CHECK(act(pol, cfg, {19, 19}) == ActionVector{0, 0});
    CHECK(act(pol, cfg, {20, 19}) == ActionVector{1, 0});
    CHECK(act(pol, cfg, {20, 20}) == ActionVector{1, 1});
}

TEST_CASE("threshold validation enforces the control-limit ordering") {
    NetworkConfig cfg = small_net(2, 20);
    CHECK_NOTHROW(ThresholdPolicy::symmetric(cfg, 20, 1).validate(cfg));
    CHECK_THROWS_AS(ThresholdPolicy({15}, {9}).validate(cfg), ConfigError);          // M mismatch
    CHECK_THROWS_AS(ThresholdPolicy::symmetric(cfg, 15, 0).validate(cfg), ConfigError);
    CHECK_THROWS_AS(ThresholdPolicy::symmetric(cfg, 9, 15).validate(cfg), ConfigError);
    CHECK_THROWS_AS(ThresholdPolicy::symmetric(cfg, 21, 9).validate(cfg), ConfigError);
}

TEST_CASE("two-step search is deterministic and resolves ties upward") {
    NetworkConfig cfg = small_net(1, 6);
    ThresholdSearchOptions opts;
    opts.reps = 2000;
    opts.horizon = 120;
    opts.mode = Mode::L2;

    ThresholdSearchReport r1 = optimize_thresholds(cfg, opts, 404);
    ThresholdSearchReport r2 = optimize_thresholds(cfg, opts, 404);
    REQUIRE(r1.tau_pm.size() == 1);
    CHECK(r1.tau_pm == r2.tau_pm);
    CHECK(r1.tau_opm == r2.tau_opm);
    CHECK(r1.best_mean == r2.best_mean);

    // the sweep walks every candidate level once
    CHECK(r1.pm_sweep.size() == 6);
    for (std::size_t i = 0; i < r1.pm_sweep.size(); ++i)
        CHECK(r1.pm_sweep[i].threshold == static_cast<long>(i) + 1);

    // with one asset the opportunistic limit never fires, every candidate
    // ties and the tie rule keeps the largest
    CHECK(r1.tau_opm[0] == r1.tau_pm[0]);
    for (const SweepPoint& p : r1.opm_sweep) CHECK(p.mean == r1.best_mean);

    // the reactive candidate sits in the sweep, so the winner cannot be worse
    CHECK(r1.best_mean <= r1.pm_sweep.back().mean + 1e-12);
    CHECK(r1.tau_pm[0] >= 1);
    CHECK(r1.tau_pm[0] <= 6);
}

TEST_CASE("search output reconstructs the winning policy") {
    NetworkConfig cfg = small_net(2, 6);
    ThresholdSearchOptions opts;
    opts.reps = 800;
    opts.horizon = 80;
    ThresholdSearchReport r = optimize_thresholds(cfg, opts, 505);
    ThresholdPolicy pol = r.policy();
    CHECK_NOTHROW(pol.validate(cfg));
    CHECK(pol.tau_pm() == r.tau_pm);
    CHECK(pol.tau_opm() == r.tau_opm);
    CHECK(r.tau_opm[0] <= r.tau_pm[0]);
}

}  // TEST_SUITE
