#include "cbm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cbm/errors.hpp"

namespace cbm {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& field, const std::string& path, long lineno,
                    const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing characters");
        if (!std::isfinite(v)) throw std::invalid_argument("not finite");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path + " line " + std::to_string(lineno) + ": bad " + what + " '" +
                          field + "'");
    }
}

// marginal log-likelihood of one component's shock count total: lambda
// integrated out of Poisson(lambda * T) against Gamma(alpha, beta)
double counts_loglik(double alpha, double beta, double k, double T) {
    return std::lgamma(alpha + k) - std::lgamma(alpha) - std::lgamma(k + 1.0) +
           alpha * std::log(beta / (beta + T)) + k * std::log(T / (beta + T));
}

// marginal log-likelihood of one component's damage total given its shock
// count: q integrated out of the k-fold geometric sum against Beta(a, b)
double sizes_loglik(double a, double b, double k, double z) {
    if (k < 1.0) return 0.0;
    return std::lgamma(z + k) - std::lgamma(z + 1.0) - std::lgamma(k) + std::lgamma(a + z) +
           std::lgamma(b + k) - std::lgamma(a + b + z + k) + std::lgamma(a + b) -
           std::lgamma(a) - std::lgamma(b);
}

struct Totals {
    double T = 0;
    double k = 0;
    double z = 0;
};

double pool_loglik(const PopulationPrior& prior, const std::vector<Totals>& totals) {
    double ll = 0.0;
    for (const Totals& t : totals)
        ll += counts_loglik(prior.alpha, prior.beta, t.k, t.T) +
              sizes_loglik(prior.a, prior.b, t.k, t.z);
    return ll;
}

PopulationPrior from_log(const std::vector<double>& y) {
    return PopulationPrior{std::exp(y[0]), std::exp(y[1]), std::exp(y[2]), std::exp(y[3])};
}

struct NmResult {
    std::vector<double> best;
    double fbest = 0;
    long evals = 0;
    bool converged = false;
};

// standard Nelder-Mead on R^n (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5), minimizing f
template <typename F>
NmResult nelder_mead(const F& f, std::vector<double> y0, double step, long maxeval) {
    const std::size_t n = y0.size();
    std::vector<std::vector<double>> pts(n + 1, y0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
    std::vector<double> fv(n + 1);
    long evals = 0;
    auto eval = [&](const std::vector<double>& y) {
        ++evals;
        return f(y);
    };
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(pts[i]);

    std::vector<std::size_t> order(n + 1);
    NmResult out;
    while (true) {
        for (std::size_t i = 0; i <= n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t u, std::size_t v) { return fv[u] < fv[v]; });
        const std::size_t best = order[0];
        const std::size_t worst = order[n];
        const std::size_t second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t d = 0; d < n; ++d)
                diameter = std::max(diameter, std::abs(pts[i][d] - pts[best][d]));
        const bool fdone = fv[worst] - fv[best] <= 1e-10 * (1.0 + std::abs(fv[best]));
        if ((fdone && diameter < 1e-7) || evals >= maxeval) {
            out.best = pts[best];
            out.fbest = fv[best];
            out.evals = evals;
            out.converged = fdone && diameter < 1e-7;
            return out;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double coef) {
            std::vector<double> y(n);
            for (std::size_t d = 0; d < n; ++d)
                y[d] = centroid[d] + coef * (centroid[d] - pts[worst][d]);
            return y;
        };

        std::vector<double> xr = blend(1.0);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            std::vector<double> xe = blend(2.0);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = std::move(xe);
                fv[worst] = fe;
            } else {
                pts[worst] = std::move(xr);
                fv[worst] = fr;
            }
        } else if (fr < fv[second]) {
            pts[worst] = std::move(xr);
            fv[worst] = fr;
        } else {
            const bool outside = fr < fv[worst];
            std::vector<double> xc = blend(outside ? 0.5 : -0.5);
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[worst])) {
                pts[worst] = std::move(xc);
                fv[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
                    fv[i] = eval(pts[i]);
                }
            }
        }
    }
}

double population_var(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace

IngestReport ingest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open " + path);

    IngestReport out;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] == '#') continue;
        if (line != "component_id,t,x")
            throw ConfigError(path + " line " + std::to_string(lineno) +
                              ": expected header 'component_id,t,x'");
        have_header = true;
        break;
    }
    if (!have_header) {
        out.warning = path + " is empty";
        return out;
    }

    std::unordered_map<std::string, std::size_t> slot;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 3)
            throw ConfigError(path + " line " + std::to_string(lineno) +
                              ": expected 3 fields, got " + std::to_string(fields.size()));
        const std::string& id = fields[0];
        if (id.empty())
            throw ConfigError(path + " line " + std::to_string(lineno) + ": empty component_id");
        const double t = parse_double(fields[1], path, lineno, "timestamp");
        const double x = parse_double(fields[2], path, lineno, "damage");
        if (t < 0.0 || x < 0.0)
            throw ConfigError(path + " line " + std::to_string(lineno) +
                              ": t and x must be >= 0");

        auto found = slot.find(id);
        if (found == slot.end()) {
            found = slot.emplace(id, out.series.size()).first;
            out.series.push_back(RawSeries{id, {}});
        }
        RawSeries& s = out.series[found->second];
        if (!s.samples.empty()) {
            const RawSample& prev = s.samples.back();
            if (t <= prev.t)
                throw ConfigError(path + " line " + std::to_string(lineno) +
                                  ": timestamps must be strictly increasing within component '" +
                                  id + "'");
            if (x < prev.x)
                throw ConfigError(path + " line " + std::to_string(lineno) +
                                  ": cumulative damage decreases within component '" + id + "'");
        }
        s.samples.push_back(RawSample{t, x});
    }
    if (out.series.empty()) out.warning = path + " has no data rows";
    return out;
}

PeriodizedSeries preprocess(const RawSeries& raw, const PreprocessOptions& opts) {
    if (!(opts.outlier_quantile > 0.0) || opts.outlier_quantile > 1.0)
        throw ConfigError("outlier_quantile must be in (0,1]");
    if (!(opts.period_length > 0.0)) throw ConfigError("period_length must be positive");
    if (opts.min_duration < 0.0) throw ConfigError("min_duration must be >= 0");
    if (opts.xi < 1) throw ConfigError("xi must be >= 1");
    if (raw.samples.empty()) throw ConfigError(raw.component_id + ": empty series");

    // difference into shock events, skipping a leading (0, 0) anchor row
    struct Event {
        double dt = 0;
        double dz = 0;
    };
    std::vector<Event> events;
    double prev_t = 0.0;
    double prev_x = 0.0;
    std::size_t first = 0;
    if (raw.samples[0].t == 0.0 && raw.samples[0].x == 0.0) first = 1;
    for (std::size_t j = first; j < raw.samples.size(); ++j) {
        const RawSample& s = raw.samples[j];
        if (s.t < prev_t || (j > first && s.t == prev_t))
            throw ConfigError(raw.component_id + ": timestamps must be strictly increasing");
        if (s.x < prev_x)
            throw ConfigError(raw.component_id + ": cumulative damage decreases");
        events.push_back(Event{s.t - prev_t, s.x - prev_x});
        prev_t = s.t;
        prev_x = s.x;
    }
    if (events.empty())
        throw ConfigError(raw.component_id + ": shorter than one period after cleaning");

    // idle-gap cut: nearest-rank quantile of the series' own interarrivals
    double cut = std::numeric_limits<double>::infinity();
    if (opts.outlier_quantile < 1.0) {
        std::vector<double> dts;
        dts.reserve(events.size());
        for (const Event& e : events) dts.push_back(e.dt);
        std::sort(dts.begin(), dts.end());
        const double n = static_cast<double>(dts.size());
        auto idx = static_cast<std::size_t>(
            std::min(n - 1.0, std::max(0.0, std::ceil(opts.outlier_quantile * n) - 1.0)));
        cut = dts[idx];
    }

    double s_time = 0.0;  // operational clock in periods
    std::vector<long> counts;
    std::vector<double> damage;
    long kept = 0;
    for (const Event& e : events) {
        double dt = e.dt > cut ? 0.0 : e.dt;
        dt /= opts.period_length;
        if (opts.min_duration > 0.0 && dt < opts.min_duration) continue;
        s_time += dt;
        const auto p =
            static_cast<std::size_t>(std::max<long>(0, static_cast<long>(std::ceil(s_time)) - 1));
        if (counts.size() <= p) {
            counts.resize(p + 1, 0);
            damage.resize(p + 1, 0.0);
        }
        counts[p] += 1;
        damage[p] += e.dz;
        ++kept;
    }
    if (kept == 0)
        throw ConfigError(raw.component_id + ": shorter than one period after cleaning");

    PeriodizedSeries out;
    out.component_id = raw.component_id;
    out.periods.resize(counts.size());
    long cum = 0;
    long fail = -1;
    for (std::size_t p = 0; p < counts.size(); ++p) {
        out.periods[p].k = counts[p];
        out.periods[p].z = std::llround(damage[p]);
        cum += out.periods[p].z;
        if (cum >= opts.xi) {
            fail = static_cast<long>(p);
            break;
        }
    }
    if (fail < 0)
        throw ConfigError(raw.component_id + ": cumulative damage never reaches the failure threshold");
    out.periods.resize(static_cast<std::size_t>(fail) + 1);
    return out;
}

PriorFit fit_priors(const std::vector<PeriodizedSeries>& training) {
    if (training.size() < 2) throw ConfigError("prior fitting needs at least two components");
    std::vector<Totals> totals;
    totals.reserve(training.size());
    bool any_shocks = false;
    for (const PeriodizedSeries& s : training) {
        if (s.periods.empty()) throw ConfigError(s.component_id + ": empty trajectory");
        Totals t;
        t.T = static_cast<double>(s.periods.size());
        t.k = static_cast<double>(s.total_shocks());
        t.z = static_cast<double>(s.total_damage());
        any_shocks = any_shocks || t.k > 0;
        totals.push_back(t);
    }
    if (!any_shocks) throw ConfigError("every component has zero shocks; rates unidentifiable");

    // method-of-moments start. Rates: moment-match k/T with the Poisson
    // sampling part of the variance removed. Sizes: moment-match the
    // per-component mean damage per shock mapped through q = y/(1+y).
    std::vector<double> rates;
    std::vector<double> qhat;
    double mean_inv_t = 0.0;
    for (const Totals& t : totals) {
        rates.push_back(t.k / t.T);
        mean_inv_t += 1.0 / t.T;
        if (t.k >= 1.0) {
            const double y = t.z / t.k;
            qhat.push_back(y / (1.0 + y));
        }
    }
    mean_inv_t /= static_cast<double>(totals.size());
    double rm = 0.0;
    for (double r : rates) rm += r;
    rm /= static_cast<double>(rates.size());
    double rv = population_var(rates) - rm * mean_inv_t;
    rv = std::max({rv, rm * rm * 0.01, 1e-12});
    double qm = 0.0;
    for (double q : qhat) qm += q;
    qm = qhat.empty() ? 0.5 : qm / static_cast<double>(qhat.size());
    qm = std::clamp(qm, 1e-3, 1.0 - 1e-3);
    double qv = population_var(qhat);
    double strength = qv > 1e-12 ? qm * (1.0 - qm) / qv - 1.0 : 0.0;
    if (!(strength > 0.2)) strength = 2.0;

    auto box = [](double v) { return std::clamp(v, 1e-3, 1e6); };
    PopulationPrior start{box(rm * rm / rv), box(rm / rv), box(qm * strength),
                          box((1.0 - qm) * strength)};

    auto objective = [&](const std::vector<double>& y) {
        for (double v : y)
            if (std::abs(v) > 30.0) return 1e100;
        const double ll = pool_loglik(from_log(y), totals);
        return std::isfinite(ll) ? -ll : 1e100;
    };
    const std::vector<double> y0{std::log(start.alpha), std::log(start.beta),
                                 std::log(start.a), std::log(start.b)};
    NmResult nm = nelder_mead(objective, y0, 0.25, 4000);
    if (!std::isfinite(nm.fbest))
        throw NumericalError("prior fit objective is not finite at the optimum");

    PriorFit out;
    out.prior = from_log(nm.best);
    out.prior.validate();
    out.diagnostics.log_likelihood = -nm.fbest;
    out.diagnostics.start_log_likelihood = pool_loglik(start, totals);
    out.diagnostics.start = start;
    out.diagnostics.evaluations = nm.evals;
    out.diagnostics.converged = nm.converged;
    for (const Totals& t : totals)
        out.diagnostics.component_loglik.push_back(
            counts_loglik(out.prior.alpha, out.prior.beta, t.k, t.T) +
            sizes_loglik(out.prior.a, out.prior.b, t.k, t.z));
    if (training.size() < 5)
        out.diagnostics.warning = "only " + std::to_string(training.size()) +
                                  " components; hyperparameters are weakly identified";
    else if (!nm.converged)
        out.diagnostics.warning = "fit stopped at the evaluation budget before the simplex collapsed";
    return out;
}

ReplayPool build_replay(std::vector<PeriodizedSeries> test) {
    return ReplayPool(std::move(test));
}

RawSeries synthesize_series(const PopulationPrior& prior, const SyntheticOptions& opts,
                            std::string id, Rng& rng) {
    prior.validate();
    if (opts.xi < 1) throw ConfigError("xi must be >= 1");
    RawSeries out;
    out.component_id = std::move(id);
    out.samples.push_back(RawSample{0.0, 0.0});

    const DegradationParams params = sample_params(prior, rng, opts.model);
    double x = 0.0;
    const long guard = 2000000;
    for (long p = 0; p < guard; ++p) {
        std::vector<long> sizes;
        sample_period_sizes(params, rng, opts.model, sizes);
        std::vector<double> us(sizes.size());
        for (double& u : us) u = rng.uniform();
        std::sort(us.begin(), us.end());
        for (std::size_t j = 0; j < sizes.size(); ++j) {
            x += static_cast<double>(sizes[j]);
            out.samples.push_back(RawSample{static_cast<double>(p) + us[j], x});
        }
        if (x >= static_cast<double>(opts.xi)) return out;
    }
    throw NumericalError(out.component_id + " never failed within the period guard");
}

std::vector<RawSeries> synthesize_pool(const PopulationPrior& prior, const SyntheticOptions& opts,
                                       std::uint64_t seed) {
    if (opts.components < 1) throw ConfigError("components must be >= 1");
    std::vector<RawSeries> pool;
    pool.reserve(static_cast<std::size_t>(opts.components));
    for (long i = 0; i < opts.components; ++i) {
        Rng rng(seed, "synth.series", static_cast<std::uint64_t>(i));
        pool.push_back(synthesize_series(prior, opts, "comp" + std::to_string(i), rng));
    }
    return pool;
}

void write_raw_csv(const std::string& path, const std::vector<RawSeries>& pool,
                   const std::string& stamp) {
    std::ofstream os(path);
    if (!os) throw MissingInputError("cannot open " + path + " for writing");
    if (!stamp.empty()) os << "# " << stamp << '\n';
    os << "component_id,t,x\n";
    for (const RawSeries& s : pool)
        for (const RawSample& r : s.samples)
            os << s.component_id << ',' << fmt_double(r.t) << ',' << fmt_double(r.x) << '\n';
    if (!os) throw MissingInputError("failed writing " + path);
}

}  // namespace cbm
