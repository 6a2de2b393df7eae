#include "cbm/dcl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <utility>

#include "cbm/errors.hpp"
#include "cbm/parallel.hpp"

namespace cbm {

namespace {

std::vector<std::size_t> fresh_permutation(int n, Rng& rng) {
    std::vector<std::size_t> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = p.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

// Cost-to-go of taking `candidate` for asset m, completing the epoch under
// `base` and following it for `horizon` more epochs. Costs incurred before
// asset m's slot are omitted: they are identical across candidates. The
// setup cost enters only when the tail from m onward commits the epoch's
// first replacement; an earlier commitment already sank it.
double rollout_value(const NetworkState& start, const NetworkConfig& cfg, std::size_t m,
                     bool any_committed, const std::vector<std::size_t>& rest, int candidate,
                     const Policy& base, int horizon, Rng& rng) {
    NetworkState s = start;
    bool any = any_committed;
    double epoch_cost = 0.0;
    if (candidate == 1) {
        epoch_cost += s.failed(static_cast<int>(m), cfg) ? cfg.assets[m].c_cm : cfg.assets[m].c_pm;
        apply_one(s, cfg, static_cast<int>(m), true, rng);
        any = true;
    }
    for (std::size_t j : rest) {
        bool rep = s.failed(static_cast<int>(j), cfg) || base.decide_one(s, cfg, j, any, rng);
        if (rep) {
            epoch_cost += s.failed(static_cast<int>(j), cfg) ? cfg.assets[j].c_cm : cfg.assets[j].c_pm;
            apply_one(s, cfg, static_cast<int>(j), true, rng);
            any = true;
        }
    }
    if (any && !any_committed) epoch_cost += cfg.c_st;
    double total = epoch_cost;
    advance(s, cfg, rng);
    double disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
        disc *= cfg.gamma;
        DecisionResult d = base.decide(s, cfg, rng);
        total += disc * cost(s, cfg, d.action);
        if (d.applied)
            s = std::move(*d.applied);
        else
            apply_actions(s, cfg, d.action, rng);
        advance(s, cfg, rng);
    }
    return total;
}

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

std::string feature_header(FeatureVariant v, int assets) {
    std::string h;
    for (int j = 0; j < assets; ++j) {
        std::string s = std::to_string(j);
        h += "x" + s + ",lambda" + s + ",p" + s + ",";
        if (v == FeatureVariant::f3_L1) h += "k" + s + ",t" + s + ",";
        h += "iota" + s + ",";
    }
    h += "eta";
    return h;
}

double parse_double(const std::string& field, const std::string& path, long lineno) {
    try {
        std::size_t used = 0;
        double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path + " line " + std::to_string(lineno) + ": bad number '" + field +
                          "'");
    }
}

long parse_long(const std::string& field, const std::string& path, long lineno) {
    try {
        std::size_t used = 0;
        long v = std::stol(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path + " line " + std::to_string(lineno) + ": bad integer '" + field +
                          "'");
    }
}

void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ConfigError("truncated model data");
    return v;
}

constexpr char kModelMagic[8] = {'C', 'B', 'M', 'P', 'O', 'L', '1', '\0'};

}  // namespace

std::string variant_name(FeatureVariant v) {
    switch (v) {
        case FeatureVariant::f1_L2: return "f1_L2";
        case FeatureVariant::f2_L1: return "f2_L1";
        case FeatureVariant::f3_L1: return "f3_L1";
    }
    throw ConfigError("unknown feature variant");
}

FeatureVariant variant_from_name(const std::string& name) {
    if (name == "f1_L2") return FeatureVariant::f1_L2;
    if (name == "f2_L1") return FeatureVariant::f2_L1;
    if (name == "f3_L1") return FeatureVariant::f3_L1;
    throw ConfigError("unknown feature variant '" + name + "'");
}

int feature_dim(FeatureVariant v, int assets) {
    if (assets < 1) throw ConfigError("feature layout needs at least one asset");
    return (v == FeatureVariant::f3_L1 ? 6 : 4) * assets + 1;
}

Eigen::VectorXd extract_features(const NetworkState& state, const NetworkConfig& cfg,
                                 std::size_t m, bool any_committed_replace, FeatureVariant v) {
    const auto M = state.assets.size();
    if (M != cfg.assets.size())
        throw ConfigError("state and config disagree on the number of assets");
    if (m >= M) throw ConfigError("asset index out of range");
    if (v == FeatureVariant::f1_L2 && state.mode != Mode::L2)
        throw ConfigError("f1_L2 features read true parameters, which only L2 states carry");

    const int block = v == FeatureVariant::f3_L1 ? 6 : 4;
    Eigen::VectorXd f(static_cast<Eigen::Index>(block * M + 1));
    for (std::size_t j = 0; j < M; ++j) {
        const AssetState& a = state.assets[j];
        double lam, p;
        if (v == FeatureVariant::f1_L2) {
            lam = a.params.lambda;
            p = a.params.q;
        } else {
            PointEstimates est = point_estimates(posterior(cfg.assets[j].prior, a.belief));
            lam = est.lambda_hat;
            p = est.q_hat;
        }
        auto off = static_cast<Eigen::Index>(j) * block;
        f(off + 0) = static_cast<double>(a.belief.x);
        f(off + 1) = lam;
        f(off + 2) = p;
        if (v == FeatureVariant::f3_L1) {
            f(off + 3) = static_cast<double>(a.belief.k);
            f(off + 4) = static_cast<double>(a.belief.t);
            f(off + 5) = j == m ? 1.0 : 0.0;
        } else {
            f(off + 3) = j == m ? 1.0 : 0.0;
        }
    }
    f(static_cast<Eigen::Index>(block * M)) =
        (any_committed_replace || state.any_failed(cfg)) ? 1.0 : 0.0;
    return f;
}

ActionFlags restricted_actions(long x, long tau_pm, long tau_opm, double delta, double zeta,
                               bool failed) {
    if (failed) return ActionFlags{false, true};
    if (static_cast<double>(x) >= zeta * static_cast<double>(tau_pm))
        return ActionFlags{false, true};
    if (static_cast<double>(x) <= delta * static_cast<double>(tau_opm))
        return ActionFlags{true, false};
    return ActionFlags{true, true};
}

void DclOptions::validate() const {
    if (max_samples < 1) throw ConfigError("max_samples must be positive");
    if (!(epsilon >= 0.0) || epsilon > 1.0) throw ConfigError("epsilon must be in [0,1]");
    if (episode_length < 1) throw ConfigError("episode_length must be positive");
    if (r_max < 2) throw ConfigError("r_max must cover at least one rollout per candidate");
    if (warmup < 1) throw ConfigError("warmup must be positive");
    if (!(bandit_k >= 0.0)) throw ConfigError("bandit_k must be >= 0");
    if (horizon_roll < 1) throw ConfigError("horizon_roll must be positive");
    if (!(delta >= 0.0) || delta > 1.0) throw ConfigError("delta must be in [0,1]");
    if (!(zeta >= 1.0)) throw ConfigError("zeta must be >= 1");
    if (hidden.empty()) throw ConfigError("the classifier needs at least one hidden layer");
    for (int h : hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
    if (workers < 1) throw ConfigError("workers must be positive");
}

Eigen::MatrixXd Dataset::feature_matrix() const {
    const int dim = feature_dim(variant, assets);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), dim);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].feature.size() != dim)
            throw ConfigError("sample " + std::to_string(i) + " has " +
                              std::to_string(samples[i].feature.size()) + " features, expected " +
                              std::to_string(dim));
        X.row(static_cast<Eigen::Index>(i)) = samples[i].feature.transpose();
    }
    return X;
}

std::vector<int> Dataset::labels() const {
    std::vector<int> y(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].label;
    return y;
}

long Dataset::count_label(int action) const {
    long n = 0;
    for (const auto& s : samples)
        if (s.label == action) ++n;
    return n;
}

void Dataset::save_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw MissingInputError("cannot open " + path + " for writing");
    os << "# variant=" << variant_name(variant) << " assets=" << assets << "\n";
    os << feature_header(variant, assets)
       << ",label,rolls_postpone,rolls_replace,q_postpone,q_replace,se_postpone,se_replace,"
          "forced,low_confidence\n";
    const int dim = feature_dim(variant, assets);
    for (const auto& s : samples) {
        if (s.feature.size() != dim) throw ConfigError("sample feature length does not match");
        for (Eigen::Index i = 0; i < s.feature.size(); ++i) os << fmt_double(s.feature(i)) << ',';
        os << s.label << ',' << s.rolls[0] << ',' << s.rolls[1] << ',' << fmt_double(s.q_mean[0])
           << ',' << fmt_double(s.q_mean[1]) << ',' << fmt_double(s.q_se[0]) << ','
           << fmt_double(s.q_se[1]) << ',' << (s.forced ? 1 : 0) << ','
           << (s.low_confidence ? 1 : 0) << '\n';
    }
    if (!os) throw MissingInputError("failed writing " + path);
}

Dataset Dataset::load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open dataset " + path);
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(path + ": empty dataset file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    Dataset ds;
    {
        std::istringstream head(line);
        std::string hash, vfield, afield;
        head >> hash >> vfield >> afield;
        const std::string vp = "variant=";
        const std::string ap = "assets=";
        if (hash != "#" || vfield.rfind(vp, 0) != 0 || afield.rfind(ap, 0) != 0)
            throw ConfigError(path + " line 1: expected '# variant=<name> assets=<count>'");
        ds.variant = variant_from_name(vfield.substr(vp.size()));
        ds.assets = static_cast<int>(parse_long(afield.substr(ap.size()), path, 1));
    }
    const int dim = feature_dim(ds.variant, ds.assets);

    if (!std::getline(is, line)) throw ConfigError(path + ": missing column header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string expected =
        feature_header(ds.variant, ds.assets) +
        ",label,rolls_postpone,rolls_replace,q_postpone,q_replace,se_postpone,se_replace,"
        "forced,low_confidence";
    if (line != expected)
        throw ConfigError(path + " line 2: column header does not match the declared layout");

    long lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv(line);
        if (static_cast<int>(fields.size()) != dim + 9)
            throw ConfigError(path + " line " + std::to_string(lineno) + ": expected " +
                              std::to_string(dim + 9) + " fields, got " +
                              std::to_string(fields.size()));
        LabeledSample s;
        s.feature.resize(dim);
        for (int i = 0; i < dim; ++i)
            s.feature(i) = parse_double(fields[static_cast<std::size_t>(i)], path, lineno);
        auto at = [&](int i) -> const std::string& {
            return fields[static_cast<std::size_t>(dim + i)];
        };
        long label = parse_long(at(0), path, lineno);
        if (label != 0 && label != 1)
            throw ConfigError(path + " line " + std::to_string(lineno) + ": label must be 0 or 1");
        s.label = static_cast<int>(label);
        s.rolls[0] = parse_long(at(1), path, lineno);
        s.rolls[1] = parse_long(at(2), path, lineno);
        s.q_mean[0] = parse_double(at(3), path, lineno);
        s.q_mean[1] = parse_double(at(4), path, lineno);
        s.q_se[0] = parse_double(at(5), path, lineno);
        s.q_se[1] = parse_double(at(6), path, lineno);
        long forced = parse_long(at(7), path, lineno);
        long low = parse_long(at(8), path, lineno);
        if ((forced != 0 && forced != 1) || (low != 0 && low != 1))
            throw ConfigError(path + " line " + std::to_string(lineno) + ": flags must be 0 or 1");
        s.forced = forced == 1;
        s.low_confidence = low == 1;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

LabeledSample label_state(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                          bool any_committed_replace, const std::vector<std::size_t>& rest,
                          const Policy& base, const ThresholdPolicy& restriction,
                          const DclOptions& opts, FeatureVariant variant,
                          std::uint64_t task_seed) {
    opts.validate();
    restriction.validate(cfg);
    if (state.mode == Mode::replay)
        throw ConfigError("rollout labeling needs a generative mode (L1 or L2)");
    if (m >= state.assets.size()) throw ConfigError("asset index out of range");
    for (std::size_t j : rest)
        if (j >= state.assets.size()) throw ConfigError("permutation tail index out of range");

    LabeledSample out;
    out.feature = extract_features(state, cfg, m, any_committed_replace, variant);

    const bool failed = state.failed(static_cast<int>(m), cfg);
    const ActionFlags flags =
        restricted_actions(state.assets[m].belief.x, restriction.tau_pm()[m],
                           restriction.tau_opm()[m], opts.delta, opts.zeta, failed);
    if (!flags.allow_postpone || !flags.allow_replace) {
        out.label = flags.allow_replace ? 1 : 0;
        out.forced = true;
        return out;
    }

    // paired rollouts under common random numbers: rollout r of either
    // candidate runs on the stream derived from (task_seed, r)
    std::array<long, 2> n{0, 0};
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 2> m2{0.0, 0.0};
    auto push = [&](int c, double v) {
        ++n[c];
        const double d = v - mean[c];
        mean[c] += d / static_cast<double>(n[c]);
        m2[c] += d * (v - mean[c]);
    };
    auto se = [&](int c) {
        if (n[c] < 2) return std::numeric_limits<double>::infinity();
        const double var = m2[c] / static_cast<double>(n[c] - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n[c]));
    };
    auto run = [&](int c) {
        Rng rng(task_seed, "dcl.roll", static_cast<std::uint64_t>(n[c]));
        push(c, rollout_value(state, cfg, m, any_committed_replace, rest, c, base,
                              opts.horizon_roll, rng));
    };
    auto separated = [&] {
        if (n[0] < 2 || n[1] < 2) return false;
        const int best = mean[0] <= mean[1] ? 0 : 1;
        return mean[best] + opts.bandit_k * se(best) <= mean[1 - best] - opts.bandit_k * se(1 - best);
    };

    long total = 0;
    for (int r = 0; r < opts.warmup && total + 2 <= opts.r_max; ++r) {
        run(0);
        run(1);
        total += 2;
    }
    while (total < opts.r_max && !separated()) {
        // optimistic allocation: next rollout goes to the candidate whose
        // lower confidence bound is smallest
        const double lb0 = mean[0] - opts.bandit_k * se(0);
        const double lb1 = mean[1] - opts.bandit_k * se(1);
        run(lb0 <= lb1 ? 0 : 1);
        ++total;
    }

    out.label = mean[0] <= mean[1] ? 0 : 1;
    out.low_confidence = !separated();
    out.rolls = n;
    out.q_mean = mean;
    out.q_se = {se(0), se(1)};
    return out;
}

Dataset collect_samples(const Policy& base, const NetworkConfig& cfg, Mode mode,
                        const ThresholdPolicy& restriction, const DclOptions& opts,
                        FeatureVariant variant, std::uint64_t seed) {
    cfg.validate();
    opts.validate();
    restriction.validate(cfg);
    if (mode == Mode::replay)
        throw ConfigError("sample collection needs a generative mode (L1 or L2)");
    if (variant == FeatureVariant::f1_L2 && mode != Mode::L2)
        throw ConfigError("f1_L2 features need L2 trajectories");
    if (variant == FeatureVariant::f2_L1)
        throw ConfigError("f2_L1 is applied at decision time; train f1_L2 instead");
    if (base.info_need() == InfoNeed::true_params && mode != Mode::L2)
        throw ConfigError("the base policy needs true parameters, which only L2 exposes");

    const int M = cfg.M();
    struct Task {
        NetworkState state;
        std::size_t m = 0;
        bool any = false;
        std::vector<std::size_t> rest;
    };
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(opts.max_samples));

    const std::uint64_t episode_cap =
        64 + 4 * static_cast<std::uint64_t>(opts.max_samples);
    std::uint64_t episode = 0;
    while (static_cast<long>(tasks.size()) < opts.max_samples) {
        if (episode >= episode_cap)
            throw ConfigError("collected " + std::to_string(tasks.size()) + " of " +
                              std::to_string(opts.max_samples) +
                              " samples after " + std::to_string(episode) +
                              " episodes; the restriction leaves almost no choice states");
        Rng rng(seed, "dcl.traj", episode);
        NetworkState s = initial_state(cfg, mode, rng);
        for (int step = 0; step < opts.episode_length &&
                           static_cast<long>(tasks.size()) < opts.max_samples;
             ++step) {
            const std::vector<std::size_t> perm = fresh_permutation(M, rng);
            bool any = false;
            for (std::size_t pos = 0; pos < perm.size(); ++pos) {
                const std::size_t m = perm[pos];
                const bool failed = s.failed(static_cast<int>(m), cfg);
                const ActionFlags flags =
                    restricted_actions(s.assets[m].belief.x, restriction.tau_pm()[m],
                                       restriction.tau_opm()[m], opts.delta, opts.zeta, failed);
                bool rep;
                if (!flags.allow_postpone) {
                    rep = true;
                } else if (!flags.allow_replace) {
                    rep = false;
                } else {
                    tasks.push_back(Task{
                        s, m, any, std::vector<std::size_t>(perm.begin() + pos + 1, perm.end())});
                    if (opts.epsilon > 0.0 && rng.uniform() < opts.epsilon)
                        rep = rng.uniform() < 0.5;
                    else
                        rep = base.decide_one(s, cfg, m, any, rng);
                }
                if (rep) {
                    apply_one(s, cfg, static_cast<int>(m), true, rng);
                    any = true;
                }
            }
            advance(s, cfg, rng);
        }
        ++episode;
    }

    Dataset ds;
    ds.variant = variant;
    ds.assets = M;
    ds.samples.resize(tasks.size());
    parallel_for(tasks.size(), opts.workers, [&](std::size_t i) {
        const Task& t = tasks[i];
        ds.samples[i] = label_state(t.state, cfg, t.m, t.any, t.rest, base, restriction, opts,
                                    variant, hash64(seed, "dcl.task", i));
    });
    return ds;
}

ClassifierModel train_classifier(const Dataset& data, const DclOptions& opts,
                                 TrainReport* report) {
    opts.validate();
    if (data.samples.empty()) throw ConfigError("cannot train on an empty dataset");
    if (data.assets < 1) throw ConfigError("dataset is missing the asset count");

    ClassifierModel model;
    model.variant = data.variant;
    model.assets = data.assets;

    const Eigen::MatrixXd X = data.feature_matrix();
    model.standardizer = Standardizer::fit(X);
    const Eigen::MatrixXd Xs = model.standardizer.apply(X);

    std::vector<int> dims;
    dims.push_back(static_cast<int>(X.cols()));
    for (int h : opts.hidden) dims.push_back(h);
    dims.push_back(2);
    Rng init(opts.train.seed, "dcl.init", 0);
    model.net = Mlp(std::move(dims), init);

    TrainReport rep = fit(model.net, Xs, data.labels(), opts.train);
    if (report) *report = rep;
    return model;
}

void ClassifierModel::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw MissingInputError("cannot open " + path + " for writing");
    os.write(kModelMagic, sizeof kModelMagic);
    write_i64(os, static_cast<std::int64_t>(variant));
    write_i64(os, assets);
    standardizer.save(os);
    net.save(os);
    if (!os) throw MissingInputError("failed writing " + path);
}

ClassifierModel ClassifierModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open model file " + path);
    char magic[sizeof kModelMagic];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kModelMagic, sizeof magic) != 0)
        throw ConfigError(path + " is not a classifier model file");
    ClassifierModel out;
    const std::int64_t code = read_i64(is);
    if (code < 0 || code > 2) throw ConfigError(path + ": unknown feature variant code");
    out.variant = static_cast<FeatureVariant>(code);
    const std::int64_t assets = read_i64(is);
    if (assets < 1 || assets > (1 << 20)) throw ConfigError(path + ": implausible asset count");
    out.assets = static_cast<int>(assets);
    out.standardizer = Standardizer::load(is);
    out.net = Mlp::load(is);
    const int dim = feature_dim(out.variant, out.assets);
    if (out.net.inputs() != dim || out.net.outputs() != 2 ||
        out.standardizer.mean.size() != dim)
        throw ConfigError(path + ": model shape does not match its declared layout");
    return out;
}

NeuralPolicy::NeuralPolicy(ClassifierModel model, ThresholdPolicy restriction, double delta,
                           double zeta, FeatureVariant applied_as, std::string name)
    : model_(std::move(model)),
      restriction_(std::move(restriction)),
      delta_(delta),
      zeta_(zeta),
      applied_(applied_as),
      name_(std::move(name)) {
    if (applied_ != model_.variant) {
        const bool open_loop =
            model_.variant == FeatureVariant::f1_L2 && applied_ == FeatureVariant::f2_L1;
        if (!open_loop)
            throw ConfigError("a " + variant_name(model_.variant) +
                              " model cannot be applied as " + variant_name(applied_));
    }
    if (!(delta_ >= 0.0) || delta_ > 1.0) throw ConfigError("delta must be in [0,1]");
    if (!(zeta_ >= 1.0)) throw ConfigError("zeta must be >= 1");
    if (model_.net.inputs() != feature_dim(model_.variant, model_.assets))
        throw ConfigError("model input width does not match its feature layout");
    if (name_.empty()) name_ = variant_name(applied_) + "_policy";
}

bool NeuralPolicy::decide_one(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                              bool any_committed_replace, Rng&) const {
    if (static_cast<int>(cfg.assets.size()) != model_.assets)
        throw ConfigError("model was trained for " + std::to_string(model_.assets) +
                          " assets, the network has " + std::to_string(cfg.assets.size()));
    if (restriction_.tau_pm().size() != cfg.assets.size())
        throw ConfigError("restriction thresholds do not match the network");
    const bool failed = state.failed(static_cast<int>(m), cfg);
    const ActionFlags flags =
        restricted_actions(state.assets[m].belief.x, restriction_.tau_pm()[m],
                           restriction_.tau_opm()[m], delta_, zeta_, failed);
    if (!flags.allow_postpone) return true;
    if (!flags.allow_replace) return false;
    const Eigen::VectorXd f = extract_features(state, cfg, m, any_committed_replace, applied_);
    const Eigen::VectorXd z = model_.net.logits(model_.standardizer.apply(f));
    return z(1) > z(0);
}

DecisionResult NeuralPolicy::decide(const NetworkState& state, const NetworkConfig& cfg,
                                    Rng& rng) const {
    const int M = cfg.M();
    NetworkState work = state;
    ActionVector act(static_cast<std::size_t>(M), 0);
    bool any = false;
    for (std::size_t m : fresh_permutation(M, rng)) {
        if (decide_one(work, cfg, m, any, rng)) {
            act[m] = 1;
            apply_one(work, cfg, static_cast<int>(m), true, rng);
            any = true;
        }
    }
    return DecisionResult{std::move(act), std::move(work)};
}

InfoNeed NeuralPolicy::info_need() const {
    return applied_ == FeatureVariant::f1_L2 ? InfoNeed::true_params : InfoNeed::belief;
}

DclRunReport run_dcl(const Policy& initial, const NetworkConfig& cfg,
                     const ThresholdPolicy& restriction, const DclOptions& opts,
                     FeatureVariant variant, int generations, std::uint64_t seed) {
    if (generations < 1) throw ConfigError("need at least one generation");
    if (variant == FeatureVariant::f2_L1)
        throw ConfigError("f2_L1 is applied at decision time; train f1_L2 instead");
    const Mode mode = variant == FeatureVariant::f1_L2 ? Mode::L2 : Mode::L1;

    DclRunReport out;
    std::unique_ptr<NeuralPolicy> current;
    const Policy* base = &initial;
    for (int g = 1; g <= generations; ++g) {
        DclOptions gen_opts = opts;
        gen_opts.train.seed = hash64(seed, "dcl.train", static_cast<std::uint64_t>(g));
        const Dataset ds = collect_samples(*base, cfg, mode, restriction, gen_opts, variant,
                                           hash64(seed, "dcl.gen", static_cast<std::uint64_t>(g)));
        GenerationResult res;
        res.model = train_classifier(ds, gen_opts, &res.train);
        res.samples = static_cast<long>(ds.samples.size());
        res.replace_labels = ds.count_label(1);
        double rolls = 0.0;
        for (const auto& s : ds.samples) {
            res.low_confidence += s.low_confidence ? 1 : 0;
            rolls += static_cast<double>(s.rolls[0] + s.rolls[1]);
        }
        res.mean_rollouts = rolls / static_cast<double>(ds.samples.size());
        current = std::make_unique<NeuralPolicy>(
            res.model, restriction, opts.delta, opts.zeta, variant,
            variant_name(variant) + "_gen" + std::to_string(g));
        base = current.get();
        out.generations.push_back(std::move(res));
    }
    return out;
}

}  // namespace cbm
