#pragma once

#include <optional>
#include <string>

#include "cbm/network.hpp"

namespace cbm {

// What a policy needs to see to decide.
enum class InfoNeed {
    damage_only,  // x per asset: works in every mode
    belief,       // (x, k, t) per asset: works in L1, L2 and replay
    true_params,  // needs DegradationParams: L2 only
};

struct DecisionResult {
    ActionVector action;
    // Policies that build the post-replacement state while deciding (the
    // sequential neural policies draw fresh parameters per committed
    // replacement) return it here so the caller does not re-apply stage 1
    // with different draws.
    std::optional<NetworkState> applied;
};

class Policy {
public:
    virtual ~Policy() = default;

    // Joint decision for one epoch. Must return an admissible action vector
    // (failed assets replaced).
    virtual DecisionResult decide(const NetworkState& state, const NetworkConfig& cfg,
                                  Rng& rng) const = 0;

    // Decision for a single asset inside a partially committed epoch: `state`
    // already reflects replacements committed earlier in the permutation and
    // `any_committed_replace` says whether any were. Used to complete epochs
    // during rollout labeling.
    virtual bool decide_one(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                            bool any_committed_replace, Rng& rng) const = 0;

    virtual InfoNeed info_need() const = 0;
    virtual std::string name() const = 0;
};

}  // namespace cbm
