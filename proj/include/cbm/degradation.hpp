#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/rng.hpp"

namespace cbm {

// Shock size model. `geometric` draws sizes from P(Y=y) = q^y (1-q) on
// {0,1,2,...}; `unit` is the deterministic variant Y = 1 with the shock rate
// fixed at the prior mean (no parameter heterogeneity, no learning).
enum class ShockModel { geometric, unit };

// Hyperparameters of the population heterogeneity distributions for one
// asset's component pool: shock rate lambda ~ Gamma(alpha, rate beta),
// per-shock geometric parameter q ~ Beta(a, b).
struct PopulationPrior {
    double alpha = 1.0;
    double beta = 1.0;
    double a = 1.0;
    double b = 1.0;

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0) || !(a > 0.0) || !(b > 0.0))
            throw ConfigError("population prior requires alpha, beta, a, b > 0");
    }

    double mean_lambda() const { return alpha / beta; }
    double cv_lambda() const { return 1.0 / std::sqrt(alpha); }
    double mean_q() const { return a / (a + b); }
};

// One installed component's true degradation parameters.
struct DegradationParams {
    double lambda = 1.0;  // expected shocks per period
    double q = 0.5;       // geometric parameter, mean damage per shock q/(1-q)

    void validate() const {
        if (!(lambda > 0.0) || !(q > 0.0) || !(q < 1.0))
            throw ConfigError("degradation params require lambda > 0 and q in (0,1)");
    }

    double mean_damage_per_shock() const { return q / (1.0 - q); }
};

// Observed signal for one unit period: shock count k and total damage z.
// k = 0 forces z = 0; zero-size shocks (k > 0, z = 0) are legal.
struct PeriodSignal {
    long k = 0;
    long z = 0;
};

// Static description of one asset: failure threshold, replacement costs and
// the component pool it draws from.
struct AssetConfig {
    long xi = 1;      // failure at x >= xi
    double c_pm = 1;  // preventive replacement cost
    double c_cm = 2;  // corrective replacement cost
    PopulationPrior prior;

    void validate() const {
        prior.validate();
        if (xi < 1) throw ConfigError("xi must be >= 1");
        if (!(c_pm > 0.0) || !(c_pm < c_cm))
            throw ConfigError("costs must satisfy 0 < c_pm < c_cm");
    }
};

// Draws a component's parameters from the population distributions. Under
// ShockModel::unit the draw degenerates to (alpha/beta, q irrelevant).
DegradationParams sample_params(const PopulationPrior& prior, Rng& rng,
                                ShockModel model = ShockModel::geometric);

// Simulates one unit period: k ~ Poisson(lambda), z = sum of k geometric
// sizes (or z = k under ShockModel::unit).
PeriodSignal sample_period(const DegradationParams& params, Rng& rng,
                           ShockModel model = ShockModel::geometric);

// Same draw, but also reports the individual shock sizes (used by the
// synthetic raw-series generator).
PeriodSignal sample_period_sizes(const DegradationParams& params, Rng& rng,
                                 ShockModel model, std::vector<long>& sizes_out);

// log P(k, z | params): Poisson count times negative-binomial total size
// (k successes, success probability 1-q). Returns -inf for impossible
// signals (k = 0 with z > 0; z != k under ShockModel::unit).
double period_signal_logpmf(const DegradationParams& params, const PeriodSignal& sig,
                            ShockModel model = ShockModel::geometric);

// Marginal pmf of one period's total damage Z for known params, returned for
// z = 0..max_z. Entries are bare probabilities (no tail lump); callers that
// need P(Z >= d) take 1 minus the partial sums. The Poisson count mixture is
// truncated once its own tail mass drops below k_tail_eps.
std::vector<double> damage_pmf(const DegradationParams& params, ShockModel model, long max_z,
                               double k_tail_eps = 1e-15);

}  // namespace cbm
