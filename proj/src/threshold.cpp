#include "cbm/threshold.hpp"

#include <algorithm>
#include <limits>

#include "cbm/evaluator.hpp"

namespace cbm {

ThresholdPolicy::ThresholdPolicy(std::vector<long> tau_pm, std::vector<long> tau_opm)
    : tau_pm_(std::move(tau_pm)), tau_opm_(std::move(tau_opm)) {
    if (tau_pm_.size() != tau_opm_.size() || tau_pm_.empty())
        throw ConfigError("threshold policy needs matching per-asset threshold lists");
}

ThresholdPolicy ThresholdPolicy::symmetric(const NetworkConfig& cfg, long tau_pm, long tau_opm) {
    std::size_t m = cfg.assets.size();
    return ThresholdPolicy(std::vector<long>(m, tau_pm), std::vector<long>(m, tau_opm));
}

ThresholdPolicy ThresholdPolicy::reactive(const NetworkConfig& cfg) {
    std::vector<long> pm, opm;
    for (const auto& a : cfg.assets) {
        pm.push_back(a.xi);
        opm.push_back(a.xi);
    }
    return ThresholdPolicy(std::move(pm), std::move(opm));
}

void ThresholdPolicy::validate(const NetworkConfig& cfg) const {
    if (static_cast<int>(tau_pm_.size()) != cfg.M())
        throw ConfigError("threshold policy asset count mismatch");
    for (std::size_t m = 0; m < tau_pm_.size(); ++m)
        if (!(0 < tau_opm_[m] && tau_opm_[m] <= tau_pm_[m] && tau_pm_[m] <= cfg.assets[m].xi))
            throw ConfigError("thresholds must satisfy 0 < tau_opm <= tau_pm <= xi");
}

DecisionResult ThresholdPolicy::decide(const NetworkState& state, const NetworkConfig& cfg,
                                       Rng& rng) const {
    const std::size_t M = state.assets.size();
    ActionVector action(M, 0);
    bool committed = false;
    for (std::size_t m = 0; m < M; ++m) {
        if (decide_one(state, cfg, m, committed, rng)) {
            action[m] = 1;
            committed = true;
        }
    }
    return DecisionResult{std::move(action), std::nullopt};
}

bool ThresholdPolicy::decide_one(const NetworkState& state, const NetworkConfig& cfg,
                                 std::size_t m,
                                 bool any_committed_replace, Rng&) const {
    long x = state.assets[m].belief.x;
    if (state.failed(static_cast<int>(m), cfg) || x >= tau_pm_[m]) return true;
    return any_committed_replace && x >= tau_opm_[m];
}

std::string ThresholdPolicy::name() const {
    bool shared = true;
    for (std::size_t m = 1; m < tau_pm_.size(); ++m)
        if (tau_pm_[m] != tau_pm_[0] || tau_opm_[m] != tau_opm_[0]) shared = false;
    if (shared)
        return "two_threshold(" + std::to_string(tau_pm_[0]) + "," + std::to_string(tau_opm_[0]) +
               ")";
    return "two_threshold(per-asset)";
}

namespace {

// enumerate the product grid of per-asset candidate values
bool next_combination(std::vector<long>& value, const std::vector<long>& lo,
                      const std::vector<long>& hi) {
    for (std::size_t m = 0; m < value.size(); ++m) {
        if (value[m] < hi[m]) {
            value[m] += 1;
            for (std::size_t j = 0; j < m; ++j) value[j] = lo[j];
            return true;
        }
    }
    return false;
}

std::size_t grid_size(const std::vector<long>& lo, const std::vector<long>& hi,
                      std::size_t budget) {
    std::size_t n = 1;
    for (std::size_t m = 0; m < lo.size(); ++m) {
        n *= static_cast<std::size_t>(hi[m] - lo[m] + 1);
        if (n > budget) return n;
    }
    return n;
}

}  // namespace

ThresholdSearchReport optimize_thresholds(const NetworkConfig& cfg,
                                          const ThresholdSearchOptions& opts,
                                          std::uint64_t seed) {
    const int M = cfg.M();
    const bool symmetric = cfg.symmetric();
    ThresholdSearchReport report;

    EvalOptions eval_opts;
    eval_opts.reps = opts.reps;
    eval_opts.horizon = opts.horizon;
    eval_opts.workers = opts.workers;
    eval_opts.stream_tag = "thresholds.sweep";  // shared across candidates: CRN

    auto eval_candidate = [&](const std::vector<long>& pm, const std::vector<long>& opm) {
        ThresholdPolicy cand(pm, opm);
        cand.validate(cfg);
        return evaluate(cand, cfg, opts.mode, eval_opts, seed);
    };

    std::vector<long> lo(static_cast<std::size_t>(M), 1);
    std::vector<long> hi(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) hi[static_cast<std::size_t>(m)] = cfg.assets[static_cast<std::size_t>(m)].xi;
    if (symmetric) {
        // shared pair: collapse the grid to one dimension
        lo.assign(1, 1);
        hi.assign(1, cfg.assets[0].xi);
    }
    if (grid_size(lo, hi, opts.candidate_budget) > opts.candidate_budget)
        throw ConfigError("threshold sweep grid exceeds the candidate budget");

    auto expand = [&](const std::vector<long>& v) {
        if (!symmetric) return v;
        return std::vector<long>(static_cast<std::size_t>(M), v[0]);
    };

    // step 1: sweep tau_pm with OPM disabled (tau_opm = tau_pm)
    std::vector<long> cursor = lo;
    std::vector<long> best_pm;
    double best_mean = std::numeric_limits<double>::infinity();
    double best_ci = 0.0;
    double second_mean = std::numeric_limits<double>::infinity();
    bool more = true;
    while (more) {
        std::vector<long> pm = expand(cursor);
        EvalReport r = eval_candidate(pm, pm);
        if (symmetric) report.pm_sweep.push_back({cursor[0], r.mean, r.ci_halfwidth});
        else report.pm_sweep.push_back({static_cast<long>(report.pm_sweep.size()), r.mean, r.ci_halfwidth});
        if (r.mean <= best_mean) {  // ties to the larger (later) threshold
            second_mean = best_mean;
            best_mean = r.mean;
            best_ci = r.ci_halfwidth;
            best_pm = pm;
        } else if (r.mean < second_mean) {
            second_mean = r.mean;
        }
        more = next_combination(cursor, lo, hi);
    }

    // step 2: fix tau_pm, sweep tau_opm below it
    std::vector<long> lo2(best_pm.size(), 1);
    std::vector<long> hi2 = best_pm;
    if (symmetric) {
        lo2.assign(1, 1);
        hi2.assign(1, best_pm[0]);
    }
    cursor = lo2;
    std::vector<long> best_opm;
    double best_mean2 = std::numeric_limits<double>::infinity();
    double best_ci2 = 0.0;
    double second_mean2 = std::numeric_limits<double>::infinity();
    more = true;
    while (more) {
        std::vector<long> opm = expand(cursor);
        EvalReport r = eval_candidate(best_pm, opm);
        if (symmetric) report.opm_sweep.push_back({cursor[0], r.mean, r.ci_halfwidth});
        else report.opm_sweep.push_back({static_cast<long>(report.opm_sweep.size()), r.mean, r.ci_halfwidth});
        if (r.mean <= best_mean2) {
            second_mean2 = best_mean2;
            best_mean2 = r.mean;
            best_ci2 = r.ci_halfwidth;
            best_opm = opm;
        } else if (r.mean < second_mean2) {
            second_mean2 = r.mean;
        }
        more = next_combination(cursor, lo2, hi2);
    }

    report.tau_pm = best_pm;
    report.tau_opm = best_opm;
    report.best_mean = best_mean2;
    report.best_ci_halfwidth = best_ci2;
    double gap1 = second_mean - best_mean;
    double gap2 = second_mean2 - best_mean2;
    if (gap1 < 2.0 * best_ci || gap2 < 2.0 * best_ci2)
        report.warning = "argmin gap below the CI width; increase reps to disambiguate";
    return report;
}

}  // namespace cbm
