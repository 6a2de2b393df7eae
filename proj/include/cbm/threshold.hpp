#pragma once

#include <vector>

#include "cbm/policy.hpp"

namespace cbm {

// Two-threshold control limit: asset m triggers maintenance when x_m >= tau_pm
// (or on failure), and joins an intervention already committed by an earlier
// asset in index order when x_m >= tau_opm, sharing the setup cost. The joint
// decision is one ordered pass, so an opportunistic join never propagates
// backwards to lower-indexed assets. tau_opm = tau_pm = xi encodes the
// reactive policy.
class ThresholdPolicy : public Policy {
public:
    ThresholdPolicy(std::vector<long> tau_pm, std::vector<long> tau_opm);

    // same pair for all assets
    static ThresholdPolicy symmetric(const NetworkConfig& cfg, long tau_pm, long tau_opm);
    static ThresholdPolicy reactive(const NetworkConfig& cfg);

    DecisionResult decide(const NetworkState& state, const NetworkConfig& cfg,
                          Rng& rng) const override;
    bool decide_one(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                    bool any_committed_replace, Rng& rng) const override;
    InfoNeed info_need() const override { return InfoNeed::damage_only; }
    std::string name() const override;

    const std::vector<long>& tau_pm() const { return tau_pm_; }
    const std::vector<long>& tau_opm() const { return tau_opm_; }
    void validate(const NetworkConfig& cfg) const;

private:
    std::vector<long> tau_pm_;
    std::vector<long> tau_opm_;
};

// One point of a threshold sweep.
struct SweepPoint {
    long threshold = 0;
    double mean = 0;
    double ci_halfwidth = 0;
};

struct ThresholdSearchReport {
    std::vector<SweepPoint> pm_sweep;   // step 1: tau_opm tied to tau_pm
    std::vector<SweepPoint> opm_sweep;  // step 2: tau_pm fixed at the optimum
    std::vector<long> tau_pm;           // per asset
    std::vector<long> tau_opm;
    double best_mean = 0;
    double best_ci_halfwidth = 0;
    std::string warning;  // nonempty when the budget leaves the argmin ambiguous

    ThresholdPolicy policy() const { return ThresholdPolicy(tau_pm, tau_opm); }
};

struct ThresholdSearchOptions {
    int reps = 20000;        // evaluation episodes per candidate
    int horizon = 1000;
    Mode mode = Mode::L2;    // threshold decisions read x only, so L1 and L2
                             // give identically distributed costs; L2 is cheaper
    int workers = 1;
    std::size_t candidate_budget = 4096;  // guard for asymmetric sweeps
};

// Two-step search: sweep tau_pm with OPM disabled, then sweep tau_opm below
// the winner. Candidates share common random numbers (same episode streams),
// ties go to the larger threshold. Symmetric instances search one shared
// pair; asymmetric instances sweep the per-asset product grid, guarded by
// candidate_budget.
ThresholdSearchReport optimize_thresholds(const NetworkConfig& cfg,
                                          const ThresholdSearchOptions& opts,
                                          std::uint64_t seed);

}  // namespace cbm
