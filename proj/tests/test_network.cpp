#include <doctest.h>

#include <cmath>
#include <vector>

#include "cbm/network.hpp"
#include "cbm/rng.hpp"

using namespace cbm;

namespace {

NetworkConfig two_asset_net() {
    AssetConfig asset;
    asset.xi = 20;
    asset.c_pm = 1.0;
    asset.c_cm = 5.0;
    asset.prior = PopulationPrior{11.11, 11.11, 4999.5, 4999.5};
    NetworkConfig cfg;
    cfg.assets = {asset, asset};
    cfg.c_st = 1.0;
    cfg.gamma = 0.99;
    cfg.shock_model = ShockModel::geometric;
    return cfg;
}

NetworkState state_with_levels(const NetworkConfig& cfg, const std::vector<long>& levels) {
    NetworkState st;
    st.mode = Mode::L2;
    st.assets.resize(levels.size());
    for (std::size_t m = 0; m < levels.size(); ++m) {
        st.assets[m].belief.x = levels[m];
        st.assets[m].params = DegradationParams{1.0, 0.5};
    }
    (void)cfg;
    return st;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("initial state starts fresh and L2 installs components") {
    NetworkConfig cfg = two_asset_net();
    Rng rng(7, "net.init", 0);
    NetworkState st = initial_state(cfg, Mode::L2, rng);
    REQUIRE(st.assets.size() == 2);
    for (const auto& a : st.assets) {
        CHECK(a.belief.x == 0);
        CHECK(a.belief.k == 0);
        CHECK(a.belief.t == 0);
        CHECK_NOTHROW(a.params.validate());
    }
    // components are drawn independently, identical draws would be a bug
    CHECK(st.assets[0].params.lambda != st.assets[1].params.lambda);

    Rng rng2(7, "net.init", 0);
    NetworkState st2 = initial_state(cfg, Mode::L2, rng2);
    CHECK(st2.assets[0].params.lambda == st.assets[0].params.lambda);
    CHECK(st2.assets[1].params.q == st.assets[1].params.q);

    NetworkState l1 = initial_state(cfg, Mode::L1, rng);
    CHECK(l1.mode == Mode::L1);
    CHECK(l1.assets[0].belief.t == 0);
}

TEST_CASE("failed assets lose the postpone action") {
    NetworkConfig cfg = two_asset_net();
    NetworkState st = state_with_levels(cfg, {19, 20});
    CHECK_FALSE(st.failed(0, cfg));
    CHECK(st.failed(1, cfg));
    CHECK(st.any_failed(cfg));
    auto flags = action_set(st, cfg);
    CHECK(flags[0].allow_postpone);
    CHECK(flags[0].allow_replace);
    CHECK_FALSE(flags[1].allow_postpone);
    CHECK(flags[1].allow_replace);

    NetworkState healthy = state_with_levels(cfg, {0, 19});
    CHECK_FALSE(healthy.any_failed(cfg));
}

TEST_CASE("epoch cost charges setup once plus the replacement type") {
    NetworkConfig cfg = two_asset_net();
    NetworkState healthy = state_with_levels(cfg, {5, 7});
    CHECK(cost(healthy, cfg, {0, 0}) == 0.0);
    CHECK(cost(healthy, cfg, {1, 0}) == doctest::Approx(1.0 + 1.0));
    CHECK(cost(healthy, cfg, {1, 1}) == doctest::Approx(1.0 + 2.0));

    NetworkState one_down = state_with_levels(cfg, {25, 7});  // overshoot past xi still fails
    CHECK(cost(one_down, cfg, {1, 0}) == doctest::Approx(1.0 + 5.0));
    CHECK(cost(one_down, cfg, {1, 1}) == doctest::Approx(1.0 + 5.0 + 1.0));

    CHECK_THROWS_AS((void)cost(one_down, cfg, {0, 0}), ConfigError);
    CHECK_THROWS_AS((void)cost(one_down, cfg, {0, 1}), ConfigError);
    CHECK_THROWS_AS((void)cost(healthy, cfg, {1}), ConfigError);
}

TEST_CASE("replacement resets the belief and installs a new component") {
    NetworkConfig cfg = two_asset_net();
    Rng rng(11, "net.replace", 0);
    NetworkState st = initial_state(cfg, Mode::L2, rng);
    st.assets[0].belief = AssetBelief{14, 9, 6};
    st.assets[1].belief = AssetBelief{3, 2, 6};
    double old_lambda = st.assets[0].params.lambda;
    DegradationParams partner = st.assets[1].params;

    apply_actions(st, cfg, {1, 0}, rng);
    CHECK(st.assets[0].belief.x == 0);
    CHECK(st.assets[0].belief.k == 0);
    CHECK(st.assets[0].belief.t == 0);
    CHECK(st.assets[0].params.lambda != old_lambda);
    // postponement touches nothing
    CHECK(st.assets[1].belief.x == 3);
    CHECK(st.assets[1].belief.t == 6);
    CHECK(st.assets[1].params.lambda == partner.lambda);
    CHECK(st.assets[1].params.q == partner.q);
}

TEST_CASE("advance accumulates one observed period per asset") {
    NetworkConfig cfg = two_asset_net();
    Rng rng(13, "net.advance", 0);
    for (Mode mode : {Mode::L2, Mode::L1}) {
        NetworkState st = initial_state(cfg, mode, rng);
        long prev_x0 = 0, prev_k0 = 0;
        for (int t = 1; t <= 25; ++t) {
            advance(st, cfg, rng);
            for (const auto& a : st.assets) {
                CHECK(a.belief.t == t);
                CHECK(a.belief.x >= 0);
                CHECK(a.belief.k >= 0);
            }
            CHECK(st.assets[0].belief.x >= prev_x0);
            CHECK(st.assets[0].belief.k >= prev_k0);
            prev_x0 = st.assets[0].belief.x;
            prev_k0 = st.assets[0].belief.k;
        }
    }
}

TEST_CASE("unit shocks leave damage equal to the shock count") {
    NetworkConfig cfg = two_asset_net();
    cfg.shock_model = ShockModel::unit;
    Rng rng(17, "net.unit", 0);
    NetworkState st = initial_state(cfg, Mode::L2, rng);
    CHECK(st.assets[0].params.lambda == doctest::Approx(1.0));  // alpha/beta
    for (int t = 0; t < 50; ++t) {
        advance(st, cfg, rng);
        for (const auto& a : st.assets) CHECK(a.belief.x == a.belief.k);
    }
}

TEST_CASE("replay states cannot advance without recorded signals") {
    NetworkConfig cfg = two_asset_net();
    Rng rng(19, "net.replay", 0);
    NetworkState st = initial_state(cfg, Mode::replay, rng);
    CHECK_THROWS_AS(advance(st, cfg, rng), ConfigError);

    apply_signal(st, 0, PeriodSignal{2, 5});
    apply_signal(st, 0, PeriodSignal{1, 0});
    CHECK(st.assets[0].belief.x == 5);
    CHECK(st.assets[0].belief.k == 3);
    CHECK(st.assets[0].belief.t == 2);
    CHECK(st.assets[1].belief.t == 0);
}

TEST_CASE("posterior predictive advance matches the analytic mean") {
    // flat prior plus a long history pins the posterior means:
    // E[lambda] = 201/101, E[q/(1-q)] = a_t/(b_t - 1) = 301/200
    AssetConfig asset;
    asset.xi = 1000000;  // never interferes
    asset.c_pm = 1.0;
    asset.c_cm = 2.0;
    asset.prior = PopulationPrior{1.0, 1.0, 1.0, 1.0};
    NetworkConfig cfg;
    cfg.assets = {asset};
    cfg.c_st = 0.0;

    AssetBelief history{300, 200, 100};
    double want = (201.0 / 101.0) * (301.0 / 200.0);

    Rng rng(23, "net.predictive", 0);
    const int n = 60000;
    double sum = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        NetworkState st;
        st.mode = Mode::L1;
        st.assets.resize(1);
        st.assets[0].belief = history;
        advance(st, cfg, rng);
        double z = static_cast<double>(st.assets[0].belief.x - history.x);
        sum += z;
        ss += z * z;
    }
    double mean = sum / n;
    double sd = std::sqrt((ss - n * mean * mean) / (n - 1));
    CHECK(std::abs(mean - want) < 4.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("concentrated pools make the L1 and L2 period laws agree") {
    // population spread ~1e-4, so the predictive and the true-parameter draws
    // should give the same damage mean: lambda = 1, E[Y] = 1
    AssetConfig asset;
    asset.xi = 1000000;
    asset.c_pm = 1.0;
    asset.c_cm = 2.0;
    asset.prior = PopulationPrior{1e8, 1e8, 1e8, 1e8};
    NetworkConfig cfg;
    cfg.assets = {asset};

    const int n = 40000;
    double means[2];
    double sds[2];
    int slot = 0;
    for (Mode mode : {Mode::L1, Mode::L2}) {
        Rng rng(29, "net.pool", slot);
        double sum = 0.0, ss = 0.0;
        for (int i = 0; i < n; ++i) {
            NetworkState st = initial_state(cfg, mode, rng);
            advance(st, cfg, rng);
            double z = static_cast<double>(st.assets[0].belief.x);
            sum += z;
            ss += z * z;
        }
        means[slot] = sum / n;
        double var = (ss - n * means[slot] * means[slot]) / (n - 1);
        sds[slot] = std::sqrt(var / n);
        ++slot;
    }
    CHECK(std::abs(means[0] - 1.0) < 4.0 * sds[0]);
    CHECK(std::abs(means[1] - 1.0) < 4.0 * sds[1]);
    CHECK(std::abs(means[0] - means[1]) < 4.0 * (sds[0] + sds[1]));
}

TEST_CASE("network validation rejects inconsistent inventories") {
    NetworkConfig cfg = two_asset_net();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.symmetric());

    NetworkConfig skew = two_asset_net();
    skew.assets[1].c_cm = 6.0;
    CHECK(skew.symmetric() == false);
    CHECK_NOTHROW(skew.validate());

    NetworkConfig bad = two_asset_net();
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = two_asset_net();
    bad.c_st = -0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = two_asset_net();
    bad.assets.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = two_asset_net();
    bad.assets[0].c_pm = 5.0;  // needs c_pm < c_cm
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}  // TEST_SUITE
