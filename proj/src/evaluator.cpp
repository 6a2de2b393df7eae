#include "cbm/evaluator.hpp"

#include <cmath>
#include <vector>

#include "cbm/parallel.hpp"

namespace cbm {

namespace {

struct ReplayCursor {
    const PeriodizedSeries* traj = nullptr;
    std::size_t pos = 0;
};

void check_compatibility(const Policy& policy, Mode mode) {
    if (policy.info_need() == InfoNeed::true_params && mode != Mode::L2)
        throw ConfigError("policy '" + policy.name() + "' needs true parameters; mode " +
                          mode_name(mode) + " does not provide them");
}

}  // namespace

double episode_cost(const Policy& policy, const NetworkConfig& cfg, Mode mode, int horizon,
                    Rng& rng, const ReplayPool* replay) {
    bool is_replay = mode == Mode::replay;
    if (is_replay && replay == nullptr)
        throw MissingInputError("replay evaluation requires a trajectory pool");
    NetworkState state = initial_state(cfg, mode, rng);
    std::vector<ReplayCursor> cursors;
    if (is_replay) {
        cursors.resize(state.assets.size());
        for (auto& c : cursors) c.traj = &replay->draw(rng);
    }
    double total = 0.0;
    double disc = 1.0;
    for (int epoch = 0; epoch < horizon; ++epoch) {
        DecisionResult dr = policy.decide(state, cfg, rng);
        total += disc * cost(state, cfg, dr.action);
        if (dr.applied.has_value())
            state = std::move(*dr.applied);
        else
            apply_actions(state, cfg, dr.action, rng);
        if (is_replay) {
            for (std::size_t m = 0; m < dr.action.size(); ++m) {
                if (dr.action[m]) {
                    cursors[m].traj = &replay->draw(rng);
                    cursors[m].pos = 0;
                }
            }
            for (std::size_t m = 0; m < state.assets.size(); ++m) {
                if (cursors[m].pos >= cursors[m].traj->periods.size())
                    throw NumericalError("replay trajectory exhausted before replacement; "
                                         "pool trajectories must end at failure");
                apply_signal(state, static_cast<int>(m), cursors[m].traj->periods[cursors[m].pos]);
                cursors[m].pos += 1;
            }
        } else {
            advance(state, cfg, rng);
        }
        disc *= cfg.gamma;
    }
    return total;
}

EvalReport evaluate(const Policy& policy, const NetworkConfig& cfg, Mode mode,
                    const EvalOptions& opts, std::uint64_t seed, const ReplayPool* replay) {
    check_compatibility(policy, mode);
    if (opts.reps < 1) throw ConfigError("evaluate needs reps >= 1");
    if (opts.horizon < 1) throw ConfigError("evaluate needs horizon >= 1");

    std::vector<double> costs(static_cast<std::size_t>(opts.reps));
    parallel_for(static_cast<std::size_t>(opts.reps), opts.workers, [&](std::size_t e) {
        Rng rng(seed, opts.stream_tag, e);
        costs[e] = episode_cost(policy, cfg, mode, opts.horizon, rng, replay);
    });

    double sum = 0.0;
    for (double c : costs) sum += c;
    double mean = sum / static_cast<double>(opts.reps);
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    double sd = opts.reps > 1 ? std::sqrt(ss / static_cast<double>(opts.reps - 1)) : 0.0;

    EvalReport report;
    report.mean = mean;
    report.sample_sd = sd;
    report.ci_halfwidth = 1.96 * sd / std::sqrt(static_cast<double>(opts.reps));
    report.reps = opts.reps;
    report.horizon = opts.horizon;
    report.mode = mode;
    report.seed = seed;
    report.stream_tag = opts.stream_tag;
    report.policy_name = policy.name();
    if (std::pow(cfg.gamma, opts.horizon) > opts.truncation_tol)
        report.warning = "gamma^horizon exceeds the truncation tolerance";
    return report;
}

}  // namespace cbm
