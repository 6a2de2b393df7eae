#include "cbm/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbm/errors.hpp"

namespace cbm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lbeta(double x, double y) {
    return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
}
}  // namespace

PosteriorParams posterior(const PopulationPrior& prior, const AssetBelief& belief) {
    PosteriorParams post;
    post.alpha_t = prior.alpha + static_cast<double>(belief.k);
    post.beta_t = prior.beta + static_cast<double>(belief.t);
    post.a_t = prior.a + static_cast<double>(belief.x);
    post.b_t = prior.b + static_cast<double>(belief.k);
    return post;
}

PointEstimates point_estimates(const PosteriorParams& post) {
    return PointEstimates{post.alpha_t / post.beta_t, post.a_t / (post.a_t + post.b_t)};
}

PeriodSignal predictive_sample_period(const PopulationPrior& prior, const AssetBelief& belief,
                                      Rng& rng, ShockModel model) {
    if (model == ShockModel::unit) {
        // degenerate pool: rate is known, nothing to learn
        return sample_period(DegradationParams{prior.mean_lambda(), 0.5}, rng, model);
    }
    PosteriorParams post = posterior(prior, belief);
    DegradationParams params;
    params.lambda = rng.gamma(post.alpha_t, post.beta_t);
    params.q = rng.beta(post.a_t, post.b_t);
    return sample_period(params, rng, model);
}

double predictive_logpmf(const PopulationPrior& prior, const AssetBelief& belief,
                         const PeriodSignal& sig) {
    if (sig.k < 0 || sig.z < 0) return kNegInf;
    PosteriorParams post = posterior(prior, belief);
    double k = static_cast<double>(sig.k);
    double z = static_cast<double>(sig.z);
    double log_count = std::lgamma(post.alpha_t + k) - std::lgamma(post.alpha_t) -
                       std::lgamma(k + 1.0) + post.alpha_t * std::log(post.beta_t / (post.beta_t + 1.0)) -
                       k * std::log(post.beta_t + 1.0);
    if (sig.k == 0) return sig.z == 0 ? log_count : kNegInf;
    double log_size = std::lgamma(z + k) - std::lgamma(k) - std::lgamma(z + 1.0) +
                      lbeta(post.a_t + z, post.b_t + k) - lbeta(post.a_t, post.b_t);
    return log_count + log_size;
}

double predictive_p_zero_shocks(const PosteriorParams& post) {
    return std::exp(post.alpha_t * std::log(post.beta_t / (post.beta_t + 1.0)));
}

std::vector<PredictiveCell> enumerate_predictive(const PosteriorParams& post, double tail_eps,
                                                 long z_cap) {
    std::vector<PredictiveCell> cells;
    visit_predictive(post, tail_eps, z_cap,
                     [&cells](long k, long z, double p) { cells.push_back({k, z, p}); });
    return cells;
}

}  // namespace cbm
