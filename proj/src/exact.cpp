#include "cbm/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <Eigen/Dense>

#include "cbm/bayes.hpp"
#include "cbm/parallel.hpp"

namespace cbm {

namespace {

constexpr long kDenseStateCap = 2048;
constexpr double kCountTailEps = 1e-15;
constexpr char kTableMagic[8] = {'C', 'B', 'M', 'T', 'B', 'L', '1', '\0'};

double tie_band(double q) { return 1e-9 * (1.0 + std::abs(q)); }

// Per-asset level transition rows under postpone: row x holds the pmf of
// min(x + Z, xi) over columns 0..xi. Row xi is a self-loop placeholder that
// the solvers never read (failed assets must be replaced).
std::vector<double> level_rows(const AssetConfig& asset, const DegradationParams& params,
                               ShockModel model) {
    const long xi = asset.xi;
    const long w = xi + 1;
    std::vector<double> rows(static_cast<std::size_t>(w) * static_cast<std::size_t>(w), 0.0);
    std::vector<double> g = damage_pmf(params, model, xi - 1, kCountTailEps);
    for (long x = 0; x < xi; ++x) {
        double cum = 0.0;
        for (long d = 0; x + d < xi; ++d) {
            rows[static_cast<std::size_t>(x * w + x + d)] = g[static_cast<std::size_t>(d)];
            cum += g[static_cast<std::size_t>(d)];
        }
        rows[static_cast<std::size_t>(x * w + xi)] = std::max(0.0, 1.0 - cum);
    }
    rows[static_cast<std::size_t>(xi * w + xi)] = 1.0;
    return rows;
}

// Joint level grid with decoded per-state levels and the one-step model
// shared by policy iteration and the Theorem-1 checker.
struct JointModel {
    const NetworkConfig* cfg = nullptr;
    std::size_t m_count = 0;
    std::size_t n = 1;
    std::vector<long> dims;
    std::vector<std::size_t> strides;
    std::vector<long> levels;              // n x m_count
    std::vector<std::uint8_t> failed_set;  // per state
    std::vector<std::vector<double>> rows;

    void build(const NetworkConfig& config, const std::vector<DegradationParams>& params) {
        cfg = &config;
        m_count = config.M();
        dims.resize(m_count);
        strides.resize(m_count);
        n = 1;
        for (std::size_t m = 0; m < m_count; ++m) {
            dims[m] = config.assets[m].xi + 1;
            strides[m] = n;
            n *= static_cast<std::size_t>(dims[m]);
        }
        levels.resize(n * m_count);
        failed_set.assign(n, 0);
        for (std::size_t s = 0; s < n; ++s) {
            std::size_t rem = s;
            std::uint8_t fm = 0;
            for (std::size_t m = 0; m < m_count; ++m) {
                long lvl = static_cast<long>(rem % static_cast<std::size_t>(dims[m]));
                rem /= static_cast<std::size_t>(dims[m]);
                levels[s * m_count + m] = lvl;
                if (lvl >= config.assets[m].xi) fm |= static_cast<std::uint8_t>(1u << m);
            }
            failed_set[s] = fm;
        }
        rows.clear();
        rows.reserve(m_count);
        for (std::size_t m = 0; m < m_count; ++m)
            rows.push_back(level_rows(config.assets[m], params[m], config.shock_model));
    }

    double epoch_cost(std::size_t s, std::uint8_t act) const {
        if (act == 0) return 0.0;
        double total = cfg->c_st;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (!(act >> m & 1u)) continue;
            bool failed = levels[s * m_count + m] >= cfg->assets[m].xi;
            total += failed ? cfg->assets[m].c_cm : cfg->assets[m].c_pm;
        }
        return total;
    }

    double q_value(std::size_t s, std::uint8_t act, const double* v) const {
        double acc = 0.0;
        for (std::size_t s2 = 0; s2 < n; ++s2) {
            const long* l2 = &levels[s2 * m_count];
            double wgt = 1.0;
            for (std::size_t m = 0; m < m_count; ++m) {
                long src = (act >> m & 1u) ? 0 : levels[s * m_count + m];
                wgt *= rows[m][static_cast<std::size_t>(src * dims[m] + l2[m])];
                if (wgt == 0.0) break;
            }
            acc += wgt * v[s2];
        }
        return epoch_cost(s, act) + cfg->gamma * acc;
    }

    // Minimal Q over admissible replace sets, scanning in ascending bitmask
    // order so postponement wins ties.
    std::pair<std::uint8_t, double> best_action(std::size_t s, const double* v) const {
        const unsigned fm = failed_set[s];
        std::uint8_t best_a = 0;
        double best_q = std::numeric_limits<double>::infinity();
        bool have = false;
        const unsigned a_count = 1u << m_count;
        for (unsigned a = 0; a < a_count; ++a) {
            if ((a & fm) != fm) continue;
            double q = q_value(s, static_cast<std::uint8_t>(a), v);
            if (!have || q < best_q - tie_band(best_q)) {
                best_q = q;
                best_a = static_cast<std::uint8_t>(a);
                have = true;
            }
        }
        return {best_a, best_q};
    }
};

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("policy table file truncated");
    return v;
}

}  // namespace

TruncationSpec TruncationSpec::defaults_for(const AssetConfig& asset) {
    return TruncationSpec{}.resolved_for(asset);
}

TruncationSpec TruncationSpec::resolved_for(const AssetConfig& asset) const {
    TruncationSpec r = *this;
    const double mu_q = asset.prior.mean_q();
    const double mu_lambda = asset.prior.mean_lambda();
    const double xi = static_cast<double>(asset.xi);
    if (r.x_max < 0) r.x_max = asset.xi;
    if (r.k_max < 0) r.k_max = static_cast<long>(std::ceil(4.0 * xi * mu_q / (1.0 - mu_q)));
    if (r.t_max < 0)
        r.t_max = static_cast<long>(std::ceil(4.0 * xi * (1.0 - mu_q) / (mu_lambda * mu_q)));
    if (r.x_max < asset.xi) throw ConfigError("x_max must be at least xi");
    if (r.k_max < 0 || r.t_max < 1) throw ConfigError("k_max must be >= 0 and t_max >= 1");
    if (!(r.tail_mass_eps > 0.0) || !(r.tail_mass_eps < 1.0))
        throw ConfigError("tail_mass_eps must lie in (0,1)");
    return r;
}

std::size_t TabularPolicy::joint_index(const std::vector<long>& lvls) const {
    if (kind != Kind::joint_known_params) throw ConfigError("joint_index on a belief table");
    if (lvls.size() != x_dims.size()) throw ConfigError("level vector length mismatch");
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t m = 0; m < x_dims.size(); ++m) {
        long lvl = std::clamp(lvls[m], 0L, x_dims[m] - 1);
        idx += static_cast<std::size_t>(lvl) * stride;
        stride *= static_cast<std::size_t>(x_dims[m]);
    }
    return idx;
}

std::size_t TabularPolicy::belief_index(long x, long k, long t) const {
    if (kind != Kind::single_asset_belief) throw ConfigError("belief_index on a joint table");
    x = std::clamp(x, 0L, x_max);
    k = std::clamp(k, 0L, k_max);
    t = std::clamp(t, 0L, t_max);
    return (static_cast<std::size_t>(t) * static_cast<std::size_t>(k_max + 1) +
            static_cast<std::size_t>(k)) *
               static_cast<std::size_t>(x_max + 1) +
           static_cast<std::size_t>(x);
}

std::uint8_t TabularPolicy::action_at(const std::vector<long>& lvls) const {
    return actions[joint_index(lvls)];
}

double TabularPolicy::value_at(const std::vector<long>& lvls) const {
    return values[joint_index(lvls)];
}

bool TabularPolicy::replace_at(long x, long k, long t) const {
    return actions[belief_index(x, k, t)] != 0;
}

double TabularPolicy::value_at(long x, long k, long t) const {
    return values[belief_index(x, k, t)];
}

void TabularPolicy::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingInputError("cannot open " + path + " for writing");
    out.write(kTableMagic, sizeof(kTableMagic));
    write_pod<std::int64_t>(out, static_cast<std::int64_t>(kind));
    if (kind == Kind::joint_known_params) {
        write_pod<std::int64_t>(out, static_cast<std::int64_t>(x_dims.size()));
        for (long d : x_dims) write_pod<std::int64_t>(out, d);
    } else {
        write_pod<std::int64_t>(out, x_max);
        write_pod<std::int64_t>(out, k_max);
        write_pod<std::int64_t>(out, t_max);
        write_pod<std::int64_t>(out, xi);
    }
    write_pod<std::int64_t>(out, static_cast<std::int64_t>(values.size()));
    out.write(reinterpret_cast<const char*>(actions.data()),
              static_cast<std::streamsize>(actions.size()));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    write_pod<double>(out, stats.bellman_residual);
    write_pod<double>(out, stats.truncation_error_bound);
    write_pod<double>(out, stats.w_star);
    write_pod<std::int64_t>(out, stats.iterations);
    if (!out) throw MissingInputError("write to " + path + " failed");
}

TabularPolicy TabularPolicy::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kTableMagic, sizeof(magic)) != 0)
        throw ConfigError(path + " is not a policy table file");
    TabularPolicy p;
    auto kind_raw = read_pod<std::int64_t>(in);
    if (kind_raw != 0 && kind_raw != 1) throw ConfigError("unknown policy table kind");
    p.kind = static_cast<Kind>(kind_raw);
    std::size_t expect = 1;
    if (p.kind == Kind::joint_known_params) {
        auto m = read_pod<std::int64_t>(in);
        if (m < 1 || m > 8) throw ConfigError("corrupt policy table header");
        p.x_dims.resize(static_cast<std::size_t>(m));
        for (auto& d : p.x_dims) {
            d = static_cast<long>(read_pod<std::int64_t>(in));
            if (d < 2 || d > 100000) throw ConfigError("corrupt policy table header");
            expect *= static_cast<std::size_t>(d);
        }
    } else {
        p.x_max = static_cast<long>(read_pod<std::int64_t>(in));
        p.k_max = static_cast<long>(read_pod<std::int64_t>(in));
        p.t_max = static_cast<long>(read_pod<std::int64_t>(in));
        p.xi = static_cast<long>(read_pod<std::int64_t>(in));
        if (p.x_max < 1 || p.k_max < 0 || p.t_max < 1 || p.xi < 1 || p.xi > p.x_max)
            throw ConfigError("corrupt policy table header");
        expect = static_cast<std::size_t>(p.x_max + 1) * static_cast<std::size_t>(p.k_max + 1) *
                 static_cast<std::size_t>(p.t_max + 1);
    }
    auto n = read_pod<std::int64_t>(in);
    if (n <= 0 || static_cast<std::size_t>(n) != expect)
        throw ConfigError("corrupt policy table header");
    p.actions.resize(static_cast<std::size_t>(n));
    p.values.resize(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(p.actions.data()), static_cast<std::streamsize>(n));
    in.read(reinterpret_cast<char*>(p.values.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(n) * sizeof(double)));
    if (!in) throw ConfigError("policy table file truncated");
    p.stats.bellman_residual = read_pod<double>(in);
    p.stats.truncation_error_bound = read_pod<double>(in);
    p.stats.w_star = read_pod<double>(in);
    p.stats.iterations = static_cast<long>(read_pod<std::int64_t>(in));
    return p;
}

void TabularPolicy::export_min_replace_csv(const std::string& path) const {
    if (kind != Kind::single_asset_belief)
        throw ConfigError("min-replace export needs a belief table");
    std::ofstream out(path);
    if (!out) throw MissingInputError("cannot open " + path + " for writing");
    out << "t\\k";
    for (long k = 0; k <= k_max; ++k) out << ',' << k;
    out << '\n';
    for (long t = 0; t <= t_max; ++t) {
        out << t;
        for (long k = 0; k <= k_max; ++k) {
            long level = xi;
            for (long x = 0; x <= xi; ++x) {
                if (actions[belief_index(x, k, t)] != 0) {
                    level = x;
                    break;
                }
            }
            out << ',' << level;
        }
        out << '\n';
    }
    if (!out) throw MissingInputError("write to " + path + " failed");
}

void TabularPolicy::export_action_grid_csv(const std::string& path) const {
    if (kind != Kind::joint_known_params || x_dims.size() != 2)
        throw ConfigError("action-grid export needs a two-asset joint table");
    std::ofstream out(path);
    if (!out) throw MissingInputError("cannot open " + path + " for writing");
    out << "x1\\x2";
    for (long x2 = 0; x2 < x_dims[1]; ++x2) out << ',' << x2;
    out << '\n';
    for (long x1 = 0; x1 < x_dims[0]; ++x1) {
        out << x1;
        for (long x2 = 0; x2 < x_dims[1]; ++x2)
            out << ',' << static_cast<int>(action_at({x1, x2}));
        out << '\n';
    }
    if (!out) throw MissingInputError("write to " + path + " failed");
}

TabularPolicy solve_underlying_mdp(const NetworkConfig& cfg,
                                   const std::vector<DegradationParams>& params,
                                   const TruncationSpec& trunc) {
    const std::size_t m_count = cfg.M();
    if (m_count == 0 || params.size() != m_count)
        throw ConfigError("need one parameter set per asset");
    if (m_count > 8) throw ConfigError("joint solver supports at most 8 assets");
    if (!(cfg.gamma >= 0.0) || !(cfg.gamma < 1.0))
        throw ConfigError("joint solver requires gamma in [0,1)");

    JointModel model;
    model.build(cfg, params);
    if (model.n > trunc.cell_budget)
        throw ConfigError("joint state space exceeds the cell budget");
    if (model.n > static_cast<std::size_t>(kDenseStateCap))
        throw ConfigError("joint state space exceeds the dense evaluation cap");

    const auto n = static_cast<Eigen::Index>(model.n);
    std::vector<std::uint8_t> pi(model.failed_set.begin(), model.failed_set.end());
    Eigen::MatrixXd a_mat(n, n);
    Eigen::VectorXd cost_vec(n);
    Eigen::VectorXd v_prev;
    Eigen::VectorXd v_cur;

    TabularPolicy out;
    out.kind = TabularPolicy::Kind::joint_known_params;
    out.x_dims = model.dims;
    double residual = 0.0;

    constexpr long kMaxIterations = 500;
    long it = 0;
    for (;; ++it) {
        if (it >= kMaxIterations)
            throw NumericalError("policy iteration failed to terminate");
        for (std::size_t s = 0; s < model.n; ++s) {
            const std::uint8_t act = pi[s];
            for (std::size_t s2 = 0; s2 < model.n; ++s2) {
                const long* l2 = &model.levels[s2 * m_count];
                double wgt = 1.0;
                for (std::size_t m = 0; m < m_count; ++m) {
                    long src = (act >> m & 1u) ? 0 : model.levels[s * m_count + m];
                    wgt *= model.rows[m][static_cast<std::size_t>(src * model.dims[m] + l2[m])];
                    if (wgt == 0.0) break;
                }
                a_mat(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) =
                    -cfg.gamma * wgt;
            }
            a_mat(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) += 1.0;
            cost_vec(static_cast<Eigen::Index>(s)) = model.epoch_cost(s, act);
        }
        v_cur = a_mat.partialPivLu().solve(cost_vec);
        if (it > 0) {
            double sup_dec = -std::numeric_limits<double>::infinity();
            double min_dec = std::numeric_limits<double>::infinity();
            for (Eigen::Index s = 0; s < n; ++s) {
                double d = v_prev(s) - v_cur(s);
                sup_dec = std::max(sup_dec, d);
                min_dec = std::min(min_dec, d);
            }
            out.stats.sup_decrease_log.push_back(sup_dec);
            out.stats.min_decrease_log.push_back(min_dec);
        }
        v_prev = v_cur;

        bool changed = false;
        residual = 0.0;
        std::vector<std::uint8_t> pi_next(model.n);
        for (std::size_t s = 0; s < model.n; ++s) {
            auto [best_a, best_q] = model.best_action(s, v_cur.data());
            pi_next[s] = best_a;
            if (best_a != pi[s]) changed = true;
            residual = std::max(residual, std::abs(v_cur(static_cast<Eigen::Index>(s)) - best_q));
        }
        if (!changed) break;
        pi = std::move(pi_next);
    }

    out.actions = std::move(pi);
    out.values.assign(v_cur.data(), v_cur.data() + model.n);
    out.stats.iterations = it + 1;
    out.stats.bellman_residual = residual;
    double c_max = cfg.c_st;
    for (const auto& a : cfg.assets) c_max += a.c_cm;
    double denom = (1.0 - cfg.gamma) * (1.0 - cfg.gamma);
    out.stats.truncation_error_bound = kCountTailEps * c_max / denom;
    return out;
}

TabularPolicy solve_single_asset_bmdp(const AssetConfig& asset, double c_st, double gamma,
                                      const TruncationSpec& trunc,
                                      const BmdpSolveOptions& opts) {
    if (!(gamma >= 0.0) || !(gamma < 1.0))
        throw ConfigError("belief solver requires gamma in [0,1)");
    const TruncationSpec tr = trunc.resolved_for(asset);
    const long x_cap = tr.x_max;
    const long k_cap = tr.k_max;
    const long t_cap = tr.t_max;
    const long xi = asset.xi;
    const std::size_t sx = static_cast<std::size_t>(x_cap) + 1;
    const std::size_t sk = static_cast<std::size_t>(k_cap) + 1;
    const std::size_t st = static_cast<std::size_t>(t_cap) + 1;
    const std::size_t layer = sx * sk;
    const std::size_t cells = layer * st;
    if (cells > tr.cell_budget) throw ConfigError("belief state space exceeds the cell budget");

    const double eps = tr.tail_mass_eps;
    const PopulationPrior& prior = asset.prior;
    std::vector<double> v(cells, 0.0);
    std::vector<std::uint8_t> acts(cells, 0);

    // One exact pass at a fixed replacement continuation value w: the age
    // layers resolve strictly backward, and the saturated top layer resolves
    // in (x desc, k desc) order with the zero-progress self-loop in closed
    // form. Returns the refreshed continuation value implied by the table.
    const auto sweep = [&](double w) -> double {
        const double v_fail = asset.c_cm + c_st + gamma * w;
        const double v_rep = asset.c_pm + c_st + gamma * w;

        const std::size_t base_top = static_cast<std::size_t>(t_cap) * layer;
        for (long x = x_cap; x >= 0; --x) {
            if (x >= xi) {
                for (long k = 0; k <= k_cap; ++k) {
                    std::size_t i = base_top + static_cast<std::size_t>(k) * sx +
                                    static_cast<std::size_t>(x);
                    v[i] = v_fail;
                    acts[i] = 1;
                }
                continue;
            }
            for (long k = k_cap; k >= 0; --k) {
                PosteriorParams post{prior.alpha + static_cast<double>(k),
                                     prior.beta + static_cast<double>(t_cap),
                                     prior.a + static_cast<double>(x),
                                     prior.b + static_cast<double>(k)};
                double flow = 0.0;
                double p_self = 0.0;
                visit_predictive(post, eps, x_cap - x, [&](long kap, long z, double p) {
                    long k2 = std::min(k + kap, k_cap);
                    long x2 = x + z;
                    if (x2 == x && k2 == k)
                        p_self += p;
                    else
                        flow += p * v[base_top + static_cast<std::size_t>(k2) * sx +
                                      static_cast<std::size_t>(x2)];
                });
                const double denom = 1.0 - gamma * p_self;
                if (denom < 1e-12)
                    throw NumericalError("degenerate zero-progress mass in the top age layer");
                const double v_post = gamma * flow / denom;
                std::size_t i =
                    base_top + static_cast<std::size_t>(k) * sx + static_cast<std::size_t>(x);
                v[i] = std::min(v_rep, v_post);
                acts[i] = v_rep < v_post - tie_band(std::min(v_rep, v_post)) ? 1 : 0;
            }
        }

        for (long t = t_cap - 1; t >= 0; --t) {
            const std::size_t base = static_cast<std::size_t>(t) * layer;
            const std::size_t base_next = base + layer;
            parallel_for(sk, opts.workers, [&](std::size_t krow) {
                const long k = static_cast<long>(krow);
                for (long x = 0; x <= x_cap; ++x) {
                    std::size_t i = base + krow * sx + static_cast<std::size_t>(x);
                    if (x >= xi) {
                        v[i] = v_fail;
                        acts[i] = 1;
                        continue;
                    }
                    PosteriorParams post{prior.alpha + static_cast<double>(k),
                                         prior.beta + static_cast<double>(t),
                                         prior.a + static_cast<double>(x),
                                         prior.b + static_cast<double>(k)};
                    double flow = 0.0;
                    visit_predictive(post, eps, x_cap - x, [&](long kap, long z, double p) {
                        long k2 = std::min(k + kap, k_cap);
                        flow += p * v[base_next + static_cast<std::size_t>(k2) * sx +
                                      static_cast<std::size_t>(x + z)];
                    });
                    const double v_post = gamma * flow;
                    v[i] = std::min(v_rep, v_post);
                    acts[i] = v_rep < v_post - tie_band(std::min(v_rep, v_post)) ? 1 : 0;
                }
            });
        }

        PosteriorParams post0{prior.alpha, prior.beta, prior.a, prior.b};
        double w_next = 0.0;
        visit_predictive(post0, eps, x_cap, [&](long kap, long z, double p) {
            w_next += p * v[layer + static_cast<std::size_t>(std::min(kap, k_cap)) * sx +
                            static_cast<std::size_t>(z)];
        });
        return w_next;
    };

    TabularPolicy out;
    out.kind = TabularPolicy::Kind::single_asset_belief;
    out.x_max = x_cap;
    out.k_max = k_cap;
    out.t_max = t_cap;
    out.xi = xi;

    double w = 0.0;
    double gw = sweep(w);
    long sweeps = 1;
    out.stats.residual_log.push_back(std::abs(gw - w));
    double w_prev = 0.0;
    double gw_prev = 0.0;
    bool have_prev = false;
    bool force_plain = false;
    while (std::abs(gw - w) > opts.w_tol * (1.0 + std::abs(w))) {
        if (sweeps >= opts.max_outer)
            throw NumericalError("continuation-value iteration did not converge");
        double w_next;
        const bool secant =
            opts.accelerate && !force_plain && have_prev && w != w_prev;
        if (!secant) {
            // No measured slope yet, or the previous secant step misfired:
            // take the plain Picard step.
            w_next = gw;
        } else {
            // Secant step on the scalar fixed point, clamped into the
            // contraction envelope [G(w), w + (G(w)-w)/(1-gamma)] that is
            // guaranteed to bracket the solution.
            const double slope = std::clamp((gw - gw_prev) / (w - w_prev), 0.0, gamma);
            const double defect = gw - w;
            double cand = w + defect / (1.0 - slope);
            double reach = w + defect / (1.0 - gamma);
            double lo = std::min(gw, reach);
            double hi = std::max(gw, reach);
            w_next = std::clamp(cand, lo, hi);
        }
        const double defect_old = std::abs(gw - w);
        w_prev = w;
        gw_prev = gw;
        have_prev = true;
        w = w_next;
        gw = sweep(w);
        ++sweeps;
        const double defect_new = std::abs(gw - w);
        out.stats.residual_log.push_back(defect_new);
        force_plain = secant && defect_new > 0.5 * defect_old;
    }

    // Explicit residual pass against the final table, with the replacement
    // continuation re-read from the table itself.
    const double w_check = gw;
    const double rep_fail = asset.c_cm + c_st + gamma * w_check;
    const double rep_healthy = asset.c_pm + c_st + gamma * w_check;
    double residual = 0.0;
    for (long t = t_cap; t >= 0; --t) {
        const std::size_t base = static_cast<std::size_t>(t) * layer;
        const std::size_t base_next = std::min(static_cast<std::size_t>(t_cap), // saturate
                                               static_cast<std::size_t>(t) + 1) *
                                      layer;
        for (long k = 0; k <= k_cap; ++k) {
            for (long x = 0; x <= x_cap; ++x) {
                std::size_t i = base + static_cast<std::size_t>(k) * sx + static_cast<std::size_t>(x);
                double rhs;
                if (x >= xi) {
                    rhs = rep_fail;
                } else {
                    PosteriorParams post{prior.alpha + static_cast<double>(k),
                                         prior.beta + static_cast<double>(t),
                                         prior.a + static_cast<double>(x),
                                         prior.b + static_cast<double>(k)};
                    double flow = 0.0;
                    visit_predictive(post, eps, x_cap - x, [&](long kap, long z, double p) {
                        long k2 = std::min(k + kap, k_cap);
                        flow += p * v[base_next + static_cast<std::size_t>(k2) * sx +
                                      static_cast<std::size_t>(x + z)];
                    });
                    rhs = std::min(rep_healthy, gamma * flow);
                }
                residual = std::max(residual, std::abs(rhs - v[i]));
            }
        }
    }
    if (residual > 1e-6)
        throw NumericalError("belief solver Bellman residual failed to reach tolerance");

    out.actions = std::move(acts);
    out.values = std::move(v);
    out.stats.iterations = sweeps;
    out.stats.bellman_residual = residual;
    out.stats.w_star = w_check;
    out.stats.truncation_error_bound =
        eps * (asset.c_cm + c_st) / ((1.0 - gamma) * (1.0 - gamma));
    return out;
}

MonotonicityReport check_monotonicity_levels(const TabularPolicy& policy,
                                             const NetworkConfig& cfg,
                                             const std::vector<DegradationParams>& params) {
    if (policy.kind != TabularPolicy::Kind::joint_known_params)
        throw ConfigError("levels checker needs a joint table");
    const std::size_t m_count = cfg.M();
    if (params.size() != m_count || policy.x_dims.size() != m_count)
        throw ConfigError("levels checker: asset count mismatch");
    for (std::size_t m = 0; m < m_count; ++m)
        if (policy.x_dims[m] != cfg.assets[m].xi + 1)
            throw ConfigError("levels checker: grid does not match the config");

    JointModel model;
    model.build(cfg, params);
    MonotonicityReport report;
    const double* v = policy.values.data();

    std::vector<long> comp(m_count);
    for (std::size_t s = 0; s < model.n; ++s) {
        const std::uint8_t act = policy.actions[s];
        if (act == 0) continue;
        const long* lvl = &model.levels[s * m_count];
        for (std::size_t m = 0; m < m_count; ++m) comp[m] = lvl[m];
        // walk every comparator that raises levels only on the replaced set
        for (;;) {
            std::size_t y = 0;
            for (std::size_t m = 0; m < m_count; ++m)
                y += static_cast<std::size_t>(comp[m]) * model.strides[m];
            auto [best_a, best_q] = model.best_action(y, v);
            double q_act = model.q_value(y, act, v);
            ++report.pairs_checked;
            if (q_act > best_q + tie_band(best_q)) {
                MonotonicityViolation viol;
                viol.state.assign(lvl, lvl + m_count);
                viol.comparator = comp;
                viol.q_chosen = q_act;
                viol.q_best = best_q;
                report.violations.push_back(std::move(viol));
            }
            std::size_t m = 0;
            for (; m < m_count; ++m) {
                if (!(act >> m & 1u)) continue;
                if (comp[m] < cfg.assets[m].xi) {
                    ++comp[m];
                    break;
                }
                comp[m] = lvl[m];
            }
            if (m == m_count) break;
        }
    }
    return report;
}

MonotonicityReport check_monotonicity_params(const NetworkConfig& single_asset_cfg,
                                             const std::vector<ParamGridEntry>& grid) {
    if (single_asset_cfg.M() != 1) throw ConfigError("params checker needs a one-asset config");
    const AssetConfig& asset = single_asset_cfg.assets[0];
    const long xi = asset.xi;
    MonotonicityReport report;

    std::vector<std::vector<double>> rows;
    rows.reserve(grid.size());
    for (const auto& entry : grid) {
        if (entry.policy.kind != TabularPolicy::Kind::joint_known_params ||
            entry.policy.x_dims.size() != 1 || entry.policy.x_dims[0] != xi + 1)
            throw ConfigError("params checker: table does not match the config");
        rows.push_back(level_rows(asset, entry.params, single_asset_cfg.shock_model));
    }

    const double gamma = single_asset_cfg.gamma;
    const double rep_cost = asset.c_pm + single_asset_cfg.c_st;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (i == j) continue;
            if (!(grid[j].params.lambda >= grid[i].params.lambda &&
                  grid[j].params.q >= grid[i].params.q))
                continue;
            const double* vj = grid[j].policy.values.data();
            const std::vector<double>& row_j = rows[j];
            for (long x = 0; x < xi; ++x) {
                if (grid[i].policy.actions[static_cast<std::size_t>(x)] == 0) continue;
                double q_rep = rep_cost;
                double q_post = 0.0;
                for (long x2 = 0; x2 <= xi; ++x2) {
                    q_rep += gamma * row_j[static_cast<std::size_t>(x2)] *
                             vj[static_cast<std::size_t>(x2)];
                    q_post += gamma * row_j[static_cast<std::size_t>(x * (xi + 1) + x2)] *
                              vj[static_cast<std::size_t>(x2)];
                }
                ++report.pairs_checked;
                double best = std::min(q_rep, q_post);
                if (q_rep > best + tie_band(best)) {
                    MonotonicityViolation viol;
                    viol.state = {x, static_cast<long>(i)};
                    viol.comparator = {x, static_cast<long>(j)};
                    viol.q_chosen = q_rep;
                    viol.q_best = best;
                    report.violations.push_back(std::move(viol));
                }
            }
        }
    }
    return report;
}

JointTablePolicy::JointTablePolicy(std::shared_ptr<const TabularPolicy> table,
                                   const NetworkConfig& cfg)
    : table_(std::move(table)) {
    if (!table_ || table_->kind != TabularPolicy::Kind::joint_known_params)
        throw ConfigError("joint table policy needs a joint table");
    if (table_->x_dims.size() != cfg.M()) throw ConfigError("joint table: asset count mismatch");
    for (std::size_t m = 0; m < cfg.M(); ++m)
        if (table_->x_dims[m] != cfg.assets[m].xi + 1)
            throw ConfigError("joint table: level grid does not match the config");
}

DecisionResult JointTablePolicy::decide(const NetworkState& state, const NetworkConfig& cfg,
                                        Rng&) const {
    std::vector<long> lvls(cfg.M());
    for (std::size_t m = 0; m < cfg.M(); ++m)
        lvls[m] = std::min(state.assets[m].belief.x, cfg.assets[m].xi);
    const std::uint8_t mask = table_->action_at(lvls);
    DecisionResult result;
    result.action.resize(cfg.M());
    for (std::size_t m = 0; m < cfg.M(); ++m)
        result.action[m] = static_cast<std::uint8_t>(mask >> m & 1u);
    return result;
}

bool JointTablePolicy::decide_one(const NetworkState& state, const NetworkConfig& cfg,
                                  std::size_t m, bool, Rng&) const {
    std::vector<long> lvls(cfg.M());
    for (std::size_t i = 0; i < cfg.M(); ++i)
        lvls[i] = std::min(state.assets[i].belief.x, cfg.assets[i].xi);
    return (table_->action_at(lvls) >> m & 1u) != 0;
}

BeliefTablePolicy::BeliefTablePolicy(std::shared_ptr<const TabularPolicy> table)
    : table_(std::move(table)) {
    if (!table_ || table_->kind != TabularPolicy::Kind::single_asset_belief)
        throw ConfigError("belief table policy needs a belief table");
}

DecisionResult BeliefTablePolicy::decide(const NetworkState& state, const NetworkConfig& cfg,
                                         Rng&) const {
    DecisionResult result;
    result.action.resize(cfg.M());
    for (std::size_t m = 0; m < cfg.M(); ++m) {
        if (cfg.assets[m].xi != table_->xi)
            throw ConfigError("belief table was solved for a different failure level");
        const AssetBelief& b = state.assets[m].belief;
        result.action[m] = state.failed(m, cfg) || table_->replace_at(b.x, b.k, b.t) ? 1 : 0;
    }
    return result;
}

bool BeliefTablePolicy::decide_one(const NetworkState& state, const NetworkConfig& cfg,
                                   std::size_t m, bool, Rng&) const {
    if (cfg.assets[m].xi != table_->xi)
        throw ConfigError("belief table was solved for a different failure level");
    const AssetBelief& b = state.assets[m].belief;
    return state.failed(m, cfg) || table_->replace_at(b.x, b.k, b.t);
}

}  // namespace cbm
