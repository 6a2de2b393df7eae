#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cbm/degradation.hpp"
#include "cbm/errors.hpp"

namespace cbm {

// Per-asset observable state since the last replacement: cumulative damage x,
// cumulative shock count k, operational age t (periods). Together with the
// population prior this indexes the conjugate posterior exactly.
struct AssetBelief {
    long x = 0;
    long k = 0;
    long t = 0;
};

struct PosteriorParams {
    double alpha_t = 0;
    double beta_t = 0;
    double a_t = 0;
    double b_t = 0;
};

// Conjugate update: (alpha + k, beta + t, a + x, b + k).
PosteriorParams posterior(const PopulationPrior& prior, const AssetBelief& belief);

struct PointEstimates {
    double lambda_hat = 0;
    double q_hat = 0;
};

// Posterior means: lambda_hat = alpha_t/beta_t, q_hat = a_t/(a_t+b_t).
PointEstimates point_estimates(const PosteriorParams& post);

// Draws one period from the posterior predictive: (lambda, q) are redrawn
// from the current posterior on every call, then one period is simulated.
// This is the exact one-step predictive, not a frozen parameter draw, so
// successive periods are exchangeable rather than independent.
PeriodSignal predictive_sample_period(const PopulationPrior& prior, const AssetBelief& belief,
                                      Rng& rng, ShockModel model = ShockModel::geometric);

// log P(k, z | belief): counts are negative-binomial from the Gamma-Poisson
// mixture (shape alpha_t, success prob beta_t/(beta_t+1)); sizes given k >= 1
// are beta-negative-binomial, P(z|k) = C(z+k-1, z) B(a_t+z, b_t+k)/B(a_t, b_t).
// Convention P(Z=0 | K=0) = 1. Log-domain throughout; -inf for impossible
// signals.
double predictive_logpmf(const PopulationPrior& prior, const AssetBelief& belief,
                         const PeriodSignal& sig);

// Closed-form probability of a shock-free period.
double predictive_p_zero_shocks(const PosteriorParams& post);

// One cell of an enumerated predictive kernel.
struct PredictiveCell {
    long k = 0;
    long z = 0;
    double p = 0;
};

// Enumerates the predictive kernel in increasing (k, then z) order until the
// cumulative mass reaches 1 - tail_eps, lumping all remaining mass onto the
// last emitted cell, so the visited cells always sum to 1. If z_cap >= 0,
// cells with z >= z_cap are merged into a single cell at z = z_cap per k
// (used by solvers whose damage axis saturates). Multiplicative recurrences
// only; no lgamma in the loop. visit(k, z, p) is called per cell.
template <class Visit>
void visit_predictive(const PosteriorParams& post, double tail_eps, long z_cap, Visit&& visit) {
    const double eps_half = 0.5 * tail_eps;  // half for size tails, half for the count tail
    const double alpha = post.alpha_t;
    const double beta = post.beta_t;
    const double a = post.a_t;
    const double b = post.b_t;
    // Floors below which the remaining tail is folded into the lump cell
    // outright; extended-precision accumulators would otherwise freeze before
    // a very small eps_half is reached.
    constexpr double kCountFloor = 1e-30;
    constexpr double kSizeFloor = 1e-19;

    double pk = std::exp(alpha * std::log(beta / (beta + 1.0)));  // P(K=0)
    double w0 = 1.0;                                              // P(Z=0 | K=k)
    long double cum = 0.0L;
    constexpr long kMaxCount = 1000000;
    for (long k = 0;; ++k) {
        if (k > kMaxCount)
            throw NumericalError("predictive kernel enumeration failed to accumulate mass");
        long last_k = 0;
        long last_z = 0;
        double carry = 0.0;  // mass to merge into the cell emitted last
        if (k == 0) {
            last_k = 0;
            last_z = 0;
            carry = pk;
            cum += pk;
        } else {
            w0 *= (b + static_cast<double>(k) - 1.0) / (a + b + static_cast<double>(k) - 1.0);
            double pz = pk * w0;  // joint P(K=k, Z=z)
            long double emitted = 0.0L;
            for (long z = 0;; ++z) {
                if (z_cap >= 0 && z >= z_cap) {
                    last_k = k;
                    last_z = z_cap;
                    carry = std::max(0.0, static_cast<double>(pk - emitted));
                    cum += carry;
                    break;
                }
                emitted += pz;
                cum += pz;
                double rem = std::max(0.0, static_cast<double>(pk - emitted));
                if (rem <= eps_half * pk || pz <= kSizeFloor * pk) {
                    last_k = k;
                    last_z = z;
                    carry = pz + rem;
                    cum += rem;
                    break;
                }
                visit(k, z, pz);
                double zd = static_cast<double>(z);
                double kd = static_cast<double>(k);
                pz *= (zd + kd) / (zd + 1.0) * (a + zd) / (a + b + zd + kd);
            }
        }
        double outer_rem = std::max(0.0, static_cast<double>(1.0L - cum));
        if (outer_rem <= eps_half || pk <= kCountFloor) {
            visit(last_k, last_z, carry + outer_rem);
            return;
        }
        visit(last_k, last_z, carry);
        double kd = static_cast<double>(k);
        pk *= (alpha + kd) / ((kd + 1.0) * (beta + 1.0));
    }
}

// Vector form of visit_predictive.
std::vector<PredictiveCell> enumerate_predictive(const PosteriorParams& post, double tail_eps,
                                                 long z_cap = -1);

}  // namespace cbm
