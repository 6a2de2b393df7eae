#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cbm/degradation.hpp"
#include "cbm/network.hpp"
#include "cbm/policy.hpp"

namespace cbm {

// State-space truncation for the exact solvers. The joint solver collapses
// everything at or above xi into one absorbing failed band, so only the
// belief solver reads x_max / k_max / t_max: degradation saturates at x_max,
// hyperparameter updates clamp at k_max and t_max.
struct TruncationSpec {
    long x_max = -1;
    long k_max = -1;
    long t_max = -1;
    double tail_mass_eps = 1e-8;
    std::size_t cell_budget = 10000000;

    // x_max = xi; k_max and t_max sized to roughly four expected component
    // lifetimes under the prior means, so beliefs settle well before the caps.
    static TruncationSpec defaults_for(const AssetConfig& asset);

    TruncationSpec resolved_for(const AssetConfig& asset) const;
};

// A solved decision table. Two layouts share the type:
//  - joint_known_params: one cell per joint degradation level vector
//    (levels 0..xi per asset, xi = failed band); the action is the
//    replace-set bitmask, bit m = replace asset m.
//  - single_asset_belief: one cell per (x, k, t) belief with x <= x_max,
//    k <= k_max, t <= t_max; the action is 0 = postpone, 1 = replace.
// values holds the discounted cost-to-go under the stored actions.
class TabularPolicy {
  public:
    enum class Kind : std::uint8_t { joint_known_params = 0, single_asset_belief = 1 };

    Kind kind = Kind::joint_known_params;

    std::vector<long> x_dims;  // joint layout: per-asset level count (xi + 1)

    long x_max = 0;  // belief layout grid bounds
    long k_max = 0;
    long t_max = 0;
    long xi = 0;

    std::vector<std::uint8_t> actions;
    std::vector<double> values;

    struct Stats {
        long iterations = 0;
        double bellman_residual = 0.0;
        double truncation_error_bound = 0.0;
        double w_star = 0.0;  // belief solver: expected cost-to-go after a replacement
        // belief solver: |G(W) - W| per outer pass (the fixed-point defect of
        // the replacement continuation value); contracts at rate <= gamma.
        std::vector<double> residual_log;
        // policy iteration: per improvement step, sup and min over states of
        // V_old - V_new (values never increase; sup stays positive until the
        // final iteration).
        std::vector<double> sup_decrease_log;
        std::vector<double> min_decrease_log;
    } stats;

    std::size_t size() const { return values.size(); }

    std::size_t joint_index(const std::vector<long>& levels) const;
    std::size_t belief_index(long x, long k, long t) const;  // clamps to the grid

    std::uint8_t action_at(const std::vector<long>& levels) const;
    double value_at(const std::vector<long>& levels) const;
    bool replace_at(long x, long k, long t) const;
    double value_at(long x, long k, long t) const;

    // Flat binary round trip: an 8-byte magic, the layout header, then the
    // action bytes and value doubles verbatim (native endianness).
    void save(const std::string& path) const;
    static TabularPolicy load(const std::string& path);

    // Belief tables: CSV with ages t on rows, shock counts k on columns, each
    // entry the minimal degradation level at which the table replaces.
    void export_min_replace_csv(const std::string& path) const;
    // Joint two-asset tables: CSV with x1 on rows, x2 on columns, entries the
    // replace-set bitmask.
    void export_action_grid_csv(const std::string& path) const;
};

// Optimal policy for a known-parameter network by policy iteration: exact
// policy evaluation (dense LU on I - gamma * P), then greedy improvement with
// postpone-preferring tie-breaks (candidate replace sets scanned in ascending
// bitmask order; improvements must beat the incumbent by more than
// 1e-9 * (1 + |Q|)). Terminates at the first repeated policy.
TabularPolicy solve_underlying_mdp(const NetworkConfig& cfg,
                                   const std::vector<DegradationParams>& params,
                                   const TruncationSpec& trunc);

struct BmdpSolveOptions {
    // Secant-accelerated outer iteration on the replacement continuation
    // value (a scalar fixed point, since every replacement renews the asset
    // to the same fresh belief). false runs plain Picard passes, which
    // contract at exactly the discount rate; property tests rely on that.
    bool accelerate = true;
    long max_outer = 100000;
    double w_tol = 1e-9;  // relative tolerance on the continuation value
    int workers = 1;
};

// Replace/postpone table over the truncated (x, k, t) belief grid for one
// asset deciding alone (both replacement costs include c_st). Inner sweeps
// are exact layered backward inductions given the continuation value W: the
// age axis only moves forward, so layers t < t_max resolve in one pass each
// against layer t+1, and the saturated layer t_max resolves in one ordered
// pass (x descending, then k descending) with the zero-progress self-loop
// folded in closed form. The final sup-norm Bellman residual is measured
// explicitly and stored in stats.
TabularPolicy solve_single_asset_bmdp(const AssetConfig& asset, double c_st, double gamma,
                                      const TruncationSpec& trunc,
                                      const BmdpSolveOptions& opts = {});

// One monotonicity defect: the action chosen at `state` stopped being optimal
// at `comparator` even though the comparator only worsened what the action
// already repairs (levels mode) or the component parameters (params mode).
struct MonotonicityViolation {
    std::vector<long> state;
    std::vector<long> comparator;
    double q_chosen = 0.0;
    double q_best = 0.0;
};

struct MonotonicityReport {
    std::vector<MonotonicityViolation> violations;
    std::size_t pairs_checked = 0;
    bool pass() const { return violations.empty(); }
};

// Levels mode: for every state and every comparator that raises degradation
// only on the assets the table already replaces there, the chosen replace set
// must still attain the minimal one-step lookahead Q-value (ties within
// 1e-9 * (1 + |Q|)). Q-values are recomputed against the stored value table.
MonotonicityReport check_monotonicity_levels(const TabularPolicy& policy,
                                             const NetworkConfig& cfg,
                                             const std::vector<DegradationParams>& params);

// Params mode: tables solved per grid point for a single-asset config. If a
// table replaces at some level, every table with componentwise worse
// parameters (lambda and q both at least as large) must also replace there,
// up to Q ties. Violation records read state = {x, i}, comparator = {x, j}
// for grid indices i, j.
struct ParamGridEntry {
    DegradationParams params;
    TabularPolicy policy;
};

MonotonicityReport check_monotonicity_params(const NetworkConfig& single_asset_cfg,
                                             const std::vector<ParamGridEntry>& grid);

// Runs a solved joint table as a simulation policy. Reads only degradation
// levels, so it is well defined in every mode; decide_one returns the asset's
// bit of the joint decision regardless of commitments made for other assets.
class JointTablePolicy final : public Policy {
  public:
    JointTablePolicy(std::shared_ptr<const TabularPolicy> table, const NetworkConfig& cfg);

    DecisionResult decide(const NetworkState& state, const NetworkConfig& cfg,
                          Rng& rng) const override;
    bool decide_one(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                    bool any_committed_replace, Rng& rng) const override;
    InfoNeed info_need() const override { return InfoNeed::damage_only; }
    std::string name() const override { return "exact_table"; }

  private:
    std::shared_ptr<const TabularPolicy> table_;
};

// Runs a solved single-asset belief table on each asset of a network
// independently, ignoring the economic dependence between assets.
class BeliefTablePolicy final : public Policy {
  public:
    explicit BeliefTablePolicy(std::shared_ptr<const TabularPolicy> table);

    DecisionResult decide(const NetworkState& state, const NetworkConfig& cfg,
                          Rng& rng) const override;
    bool decide_one(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                    bool any_committed_replace, Rng& rng) const override;
    InfoNeed info_need() const override { return InfoNeed::belief; }
    std::string name() const override { return "integrated_bayes"; }

  private:
    std::shared_ptr<const TabularPolicy> table_;
};

}  // namespace cbm
