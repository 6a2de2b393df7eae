#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbm/bayes.hpp"
#include "cbm/degradation.hpp"

namespace cbm {

// Information level the simulation runs at: L2 exposes each component's true
// parameters, L1 exposes only the conjugate belief (x, k, t), replay feeds
// recorded trajectories while tracking L1 beliefs.
enum class Mode { L1, L2, replay };

std::string mode_name(Mode m);

struct NetworkConfig {
    std::vector<AssetConfig> assets;
    double c_st = 0.0;   // shared setup cost per epoch with any replacement
    double gamma = 0.99; // discount factor
    ShockModel shock_model = ShockModel::geometric;

    int M() const { return static_cast<int>(assets.size()); }

    void validate() const {
        if (assets.empty()) throw ConfigError("network needs at least one asset");
        for (const auto& a : assets) a.validate();
        if (c_st < 0.0) throw ConfigError("c_st must be >= 0");
        if (!(gamma >= 0.0) || !(gamma < 1.0)) throw ConfigError("gamma must be in [0,1)");
    }

    // true when all assets share xi, costs and prior, so one threshold pair
    // applies to every asset
    bool symmetric() const;
};

struct AssetState {
    AssetBelief belief;
    DegradationParams params;  // meaningful only when the state is L2
};

struct NetworkState {
    Mode mode = Mode::L2;
    std::vector<AssetState> assets;

    bool failed(int m, const NetworkConfig& cfg) const {
        return assets[static_cast<std::size_t>(m)].belief.x >= cfg.assets[static_cast<std::size_t>(m)].xi;
    }
    bool any_failed(const NetworkConfig& cfg) const {
        for (int m = 0; m < static_cast<int>(assets.size()); ++m)
            if (failed(m, cfg)) return true;
        return false;
    }
};

// joint action: 1 = replace now
using ActionVector = std::vector<std::uint8_t>;

// All assets fresh (x = k = t = 0); L2 draws component parameters for each
// asset in index order.
NetworkState initial_state(const NetworkConfig& cfg, Mode mode, Rng& rng);

// Admissible per-asset actions: {1} for failed assets, {0,1} otherwise.
// Encoded as flags[m] = {postpone_allowed, replace_allowed}.
struct ActionFlags {
    bool allow_postpone = true;
    bool allow_replace = true;
};
std::vector<ActionFlags> action_set(const NetworkState& state, const NetworkConfig& cfg);

// Epoch cost: c_st if any replacement, plus c_cm per failed replacement and
// c_pm per preventive replacement. Throws on inadmissible actions.
double cost(const NetworkState& state, const NetworkConfig& cfg, const ActionVector& action);

// Stage 1 of the transition for a single asset: replacement resets the belief
// and (in L2) draws fresh component parameters; postponement is a no-op.
void apply_one(NetworkState& state, const NetworkConfig& cfg, int m, bool replace, Rng& rng);

// Stage 1 for the whole action vector, assets processed in index order.
void apply_actions(NetworkState& state, const NetworkConfig& cfg, const ActionVector& action,
                   Rng& rng);

// Stage 2: every asset degrades one period (true-parameter draw in L2,
// posterior predictive in L1), assets processed in index order. Replay states
// are advanced by the evaluator via apply_signal instead.
void advance(NetworkState& state, const NetworkConfig& cfg, Rng& rng);

// Accumulates one observed period into asset m's belief.
void apply_signal(NetworkState& state, int m, const PeriodSignal& sig);

}  // namespace cbm
