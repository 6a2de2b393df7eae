#include "cbm/degradation.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cbm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

DegradationParams sample_params(const PopulationPrior& prior, Rng& rng, ShockModel model) {
    if (model == ShockModel::unit) {
        // point mass at the prior mean; q is unused in this mode
        return DegradationParams{prior.mean_lambda(), 0.5};
    }
    DegradationParams p;
    p.lambda = rng.gamma(prior.alpha, prior.beta);
    p.q = rng.beta(prior.a, prior.b);
    return p;
}

PeriodSignal sample_period(const DegradationParams& params, Rng& rng, ShockModel model) {
    PeriodSignal sig;
    sig.k = rng.poisson(params.lambda);
    if (model == ShockModel::unit) {
        sig.z = sig.k;
        return sig;
    }
    long z = 0;
    for (long i = 0; i < sig.k; ++i) z += rng.geometric(1.0 - params.q);
    sig.z = z;
    return sig;
}

PeriodSignal sample_period_sizes(const DegradationParams& params, Rng& rng, ShockModel model,
                                 std::vector<long>& sizes_out) {
    PeriodSignal sig;
    sig.k = rng.poisson(params.lambda);
    sizes_out.clear();
    sizes_out.reserve(static_cast<std::size_t>(sig.k));
    long z = 0;
    for (long i = 0; i < sig.k; ++i) {
        long y = model == ShockModel::unit ? 1 : rng.geometric(1.0 - params.q);
        sizes_out.push_back(y);
        z += y;
    }
    sig.z = z;
    return sig;
}

std::vector<double> damage_pmf(const DegradationParams& params, ShockModel model, long max_z,
                               double k_tail_eps) {
    if (max_z < 0) throw ConfigError("damage_pmf requires max_z >= 0");
    std::vector<double> g(static_cast<std::size_t>(max_z) + 1, 0.0);
    double pk = std::exp(-params.lambda);  // Poisson(k = 0)
    if (model == ShockModel::unit) {
        for (long z = 0; z <= max_z; ++z) {
            g[static_cast<std::size_t>(z)] = pk;
            pk *= params.lambda / (static_cast<double>(z) + 1.0);
        }
        return g;
    }
    double cum = 0.0;
    constexpr long kMaxCount = 100000;
    for (long k = 0; k <= kMaxCount; ++k) {
        if (k == 0) {
            g[0] += pk;
        } else {
            // Z | k is negative binomial: P(z+1)/P(z) = (z+k)/(z+1) * q
            double pz = pk * std::pow(1.0 - params.q, static_cast<double>(k));
            for (long z = 0; z <= max_z; ++z) {
                g[static_cast<std::size_t>(z)] += pz;
                pz *= (static_cast<double>(z) + static_cast<double>(k)) /
                      (static_cast<double>(z) + 1.0) * params.q;
            }
        }
        cum += pk;
        if (1.0 - cum <= k_tail_eps) return g;
        pk *= params.lambda / (static_cast<double>(k) + 1.0);
    }
    throw NumericalError("damage_pmf failed to accumulate the count mixture");
}

double period_signal_logpmf(const DegradationParams& params, const PeriodSignal& sig,
                            ShockModel model) {
    if (sig.k < 0 || sig.z < 0) return kNegInf;
    double log_count = static_cast<double>(sig.k) * std::log(params.lambda) - params.lambda -
                       std::lgamma(static_cast<double>(sig.k) + 1.0);
    if (model == ShockModel::unit) return sig.z == sig.k ? log_count : kNegInf;
    if (sig.k == 0) return sig.z == 0 ? log_count : kNegInf;
    double k = static_cast<double>(sig.k);
    double z = static_cast<double>(sig.z);
    double log_size = std::lgamma(z + k) - std::lgamma(k) - std::lgamma(z + 1.0) +
                      z * std::log(params.q) + k * std::log1p(-params.q);
    return log_count + log_size;
}

}  // namespace cbm
