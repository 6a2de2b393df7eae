#include "cbm/network.hpp"

namespace cbm {

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::L1: return "L1";
        case Mode::L2: return "L2";
        case Mode::replay: return "replay";
    }
    return "?";
}

bool NetworkConfig::symmetric() const {
    const AssetConfig& first = assets.front();
    for (const auto& a : assets) {
        if (a.xi != first.xi || a.c_pm != first.c_pm || a.c_cm != first.c_cm ||
            a.prior.alpha != first.prior.alpha || a.prior.beta != first.prior.beta ||
            a.prior.a != first.prior.a || a.prior.b != first.prior.b)
            return false;
    }
    return true;
}

NetworkState initial_state(const NetworkConfig& cfg, Mode mode, Rng& rng) {
    NetworkState state;
    state.mode = mode;
    state.assets.resize(cfg.assets.size());
    if (mode == Mode::L2) {
        for (std::size_t m = 0; m < cfg.assets.size(); ++m)
            state.assets[m].params = sample_params(cfg.assets[m].prior, rng, cfg.shock_model);
    }
    return state;
}

std::vector<ActionFlags> action_set(const NetworkState& state, const NetworkConfig& cfg) {
    std::vector<ActionFlags> flags(state.assets.size());
    for (int m = 0; m < static_cast<int>(state.assets.size()); ++m)
        if (state.failed(m, cfg)) flags[static_cast<std::size_t>(m)].allow_postpone = false;
    return flags;
}

double cost(const NetworkState& state, const NetworkConfig& cfg, const ActionVector& action) {
    if (action.size() != state.assets.size())
        throw ConfigError("action vector length does not match asset count");
    double total = 0.0;
    bool any = false;
    for (int m = 0; m < static_cast<int>(action.size()); ++m) {
        bool failed = state.failed(m, cfg);
        if (action[static_cast<std::size_t>(m)]) {
            any = true;
            total += failed ? cfg.assets[static_cast<std::size_t>(m)].c_cm
                            : cfg.assets[static_cast<std::size_t>(m)].c_pm;
        } else if (failed) {
            throw ConfigError("inadmissible action: failed asset must be replaced");
        }
    }
    return any ? total + cfg.c_st : 0.0;
}

void apply_one(NetworkState& state, const NetworkConfig& cfg, int m, bool replace, Rng& rng) {
    if (!replace) return;
    AssetState& asset = state.assets[static_cast<std::size_t>(m)];
    asset.belief = AssetBelief{};
    if (state.mode == Mode::L2)
        asset.params = sample_params(cfg.assets[static_cast<std::size_t>(m)].prior, rng,
                                     cfg.shock_model);
}

void apply_actions(NetworkState& state, const NetworkConfig& cfg, const ActionVector& action,
                   Rng& rng) {
    for (int m = 0; m < static_cast<int>(action.size()); ++m)
        apply_one(state, cfg, m, action[static_cast<std::size_t>(m)] != 0, rng);
}

void advance(NetworkState& state, const NetworkConfig& cfg, Rng& rng) {
    if (state.mode == Mode::replay)
        throw ConfigError("replay states advance by consuming recorded trajectories");
    for (std::size_t m = 0; m < state.assets.size(); ++m) {
        AssetState& asset = state.assets[m];
        PeriodSignal sig;
        if (state.mode == Mode::L2)
            sig = sample_period(asset.params, rng, cfg.shock_model);
        else
            sig = predictive_sample_period(cfg.assets[m].prior, asset.belief, rng,
                                           cfg.shock_model);
        apply_signal(state, static_cast<int>(m), sig);
    }
}

void apply_signal(NetworkState& state, int m, const PeriodSignal& sig) {
    AssetBelief& belief = state.assets[static_cast<std::size_t>(m)].belief;
    belief.x += sig.z;
    belief.k += sig.k;
    belief.t += 1;
}

}  // namespace cbm
