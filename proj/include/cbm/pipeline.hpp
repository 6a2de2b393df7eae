#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cbm/degradation.hpp"
#include "cbm/replay.hpp"

namespace cbm {

// One recorded degradation sample: raw-clock timestamp and cumulative damage.
struct RawSample {
    double t = 0;
    double x = 0;
};

// A component's recorded life. An optional leading (0, 0) row anchors the
// series; every later sample is one shock event.
struct RawSeries {
    std::string component_id;
    std::vector<RawSample> samples;
};

struct IngestReport {
    std::vector<RawSeries> series;
    std::string warning;  // set for an empty file
};

// CSV with the mandatory header component_id,t,x; rows per component in
// chronological order (components may interleave). Lines starting with '#'
// before the header are ignored. Malformed rows, decreasing damage and
// duplicate timestamps are rejected with their line numbers.
IngestReport ingest(const std::string& path);

struct PreprocessOptions {
    // interarrivals above this empirical quantile (nearest-rank) are treated
    // as idle gaps: the clock skips them, the shock and its damage stay
    double outlier_quantile = 0.99;
    double period_length = 1.0;  // raw time per decision period
    // events whose rescaled interarrival falls below this are dropped
    // entirely (0 keeps everything)
    double min_duration = 0.0;
    long xi = 50;  // failure threshold on the damage scale
};

// Differences the series into interarrivals and damage increments, removes
// idle gaps, rescales the clock, and bins shocks into unit periods: a shock
// at operational time s lands in the period p with s in (p, p+1]. The series
// is cut at the end of the period in which cumulative damage first reaches
// xi, so the failure period keeps its full signal.
PeriodizedSeries preprocess(const RawSeries& raw, const PreprocessOptions& opts);

struct FitDiagnostics {
    double log_likelihood = 0;    // at the returned hyperparameters
    double start_log_likelihood = 0;  // at the method-of-moments start
    PopulationPrior start;        // method-of-moments initialization
    long evaluations = 0;
    bool converged = true;
    std::string warning;
    std::vector<double> component_loglik;  // per component at the optimum
};

struct PriorFit {
    PopulationPrior prior;
    FitDiagnostics diagnostics;
};

// Empirical-Bayes fit of (alpha, beta, a, b) on per-component totals
// (k_i shocks, z_i damage over T_i periods): counts contribute the
// Gamma-Poisson marginal with exposure T_i, sizes the Beta-geometric
// marginal given k_i. Maximized by Nelder-Mead in log-hyperparameter space
// from a method-of-moments start, so the reported optimum never falls below
// the start value.
PriorFit fit_priors(const std::vector<PeriodizedSeries>& training);

// Uniform-with-replacement trajectory source for replay evaluation.
ReplayPool build_replay(std::vector<PeriodizedSeries> test);

struct SyntheticOptions {
    long components = 52;
    long xi = 50;
    ShockModel model = ShockModel::geometric;
};

// One component's life drawn from the prior: one data point per shock, the
// shocks of period p timestamped p plus sorted uniforms, emitted through the
// end of the period in which cumulative damage reaches xi. Starts with the
// (0, 0) anchor row.
RawSeries synthesize_series(const PopulationPrior& prior, const SyntheticOptions& opts,
                            std::string id, Rng& rng);

// Pool of independent components on streams derived from (seed, index).
std::vector<RawSeries> synthesize_pool(const PopulationPrior& prior, const SyntheticOptions& opts,
                                       std::uint64_t seed);

// A nonempty stamp is written as a '#' comment line above the header.
void write_raw_csv(const std::string& path, const std::vector<RawSeries>& pool,
                   const std::string& stamp = "");

}  // namespace cbm
