#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cbm/policy.hpp"
#include "cbm/replay.hpp"

namespace cbm {

struct EvalReport {
    double mean = 0;
    double ci_halfwidth = 0;  // asymptotic 95%: 1.96 * sd / sqrt(reps)
    double sample_sd = 0;
    long reps = 0;
    int horizon = 0;
    Mode mode = Mode::L2;
    std::uint64_t seed = 0;
    std::string stream_tag;
    std::string policy_name;
    std::string warning;
};

struct EvalOptions {
    long reps = 10000;
    int horizon = 1000;
    int workers = 1;
    // episode e draws from stream hash64(seed, stream_tag, e); sweeps reuse
    // one tag across candidates for common random numbers
    std::string stream_tag = "eval.episode";
    double truncation_tol = 1e-4;  // warn when gamma^horizon exceeds this
};

// Monte Carlo estimate of the discounted cost J(policy) from the all-fresh
// initial state. Episodes are independent and indexed, so the report is
// bit-identical for any worker count. Replay mode requires a pool; policies
// needing true parameters are rejected outside L2.
EvalReport evaluate(const Policy& policy, const NetworkConfig& cfg, Mode mode,
                    const EvalOptions& opts, std::uint64_t seed,
                    const ReplayPool* replay = nullptr);

// One episode's discounted cost (exposed for calibration tests).
double episode_cost(const Policy& policy, const NetworkConfig& cfg, Mode mode, int horizon,
                    Rng& rng, const ReplayPool* replay = nullptr);

}  // namespace cbm
