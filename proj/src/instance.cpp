#include "cbm/instance.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "cbm/errors.hpp"
#include "cbm/rng.hpp"

namespace cbm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& msg) {
    throw ConfigError(origin + ": " + path + " " + msg);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& origin,
                const std::string& path) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            fail(origin, path + "." + item.key(), "is not a recognized field");
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const char* key, const std::string& origin,
                    const std::string& path) {
    const json* p = find(j, key);
    if (!p) fail(origin, path, "is missing required field '" + std::string(key) + "'");
    return *p;
}

double as_double(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number()) fail(origin, path, "must be a number");
    return j.get<double>();
}

long as_long(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number_integer()) fail(origin, path, "must be an integer");
    return j.get<long>();
}

std::uint64_t as_u64(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        fail(origin, path, "must be a non-negative integer");
    return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_string()) fail(origin, path, "must be a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_boolean()) fail(origin, path, "must be a boolean");
    return j.get<bool>();
}

template <typename T, typename F>
void maybe(const json& j, const char* key, T& out, const F& conv, const std::string& origin,
           const std::string& path) {
    if (const json* p = find(j, key)) out = conv(*p, origin, path + "." + std::string(key));
}

Mode parse_mode(const json& j, const std::string& origin, const std::string& path) {
    const std::string s = as_string(j, origin, path);
    if (s == "L1") return Mode::L1;
    if (s == "L2") return Mode::L2;
    if (s == "replay") return Mode::replay;
    fail(origin, path, "must be one of L1, L2, replay");
}

ShockModel parse_shock_model(const json& j, const std::string& origin, const std::string& path) {
    const std::string s = as_string(j, origin, path);
    if (s == "geometric") return ShockModel::geometric;
    if (s == "unit") return ShockModel::unit;
    fail(origin, path, "must be geometric or unit");
}

std::vector<long> parse_levels(const json& j, const std::string& origin, const std::string& path) {
    std::vector<long> out;
    if (j.is_number_integer()) {
        out.push_back(j.get<long>());
        return out;
    }
    if (!j.is_array() || j.empty()) fail(origin, path, "must be an integer or integer array");
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_long(j[i], origin, path + "[" + std::to_string(i) + "]"));
    return out;
}

AssetConfig parse_asset(const json& j, const std::string& origin, const std::string& path) {
    check_keys(j, {"xi", "c_pm", "c_cm", "prior"}, origin, path);
    AssetConfig asset;
    asset.xi = as_long(require(j, "xi", origin, path), origin, path + ".xi");
    asset.c_pm = as_double(require(j, "c_pm", origin, path), origin, path + ".c_pm");
    asset.c_cm = as_double(require(j, "c_cm", origin, path), origin, path + ".c_cm");
    const json& prior = require(j, "prior", origin, path);
    check_keys(prior, {"alpha", "beta", "a", "b"}, origin, path + ".prior");
    asset.prior.alpha =
        as_double(require(prior, "alpha", origin, path + ".prior"), origin, path + ".prior.alpha");
    asset.prior.beta =
        as_double(require(prior, "beta", origin, path + ".prior"), origin, path + ".prior.beta");
    asset.prior.a = as_double(require(prior, "a", origin, path + ".prior"), origin, path + ".prior.a");
    asset.prior.b = as_double(require(prior, "b", origin, path + ".prior"), origin, path + ".prior.b");
    return asset;
}

NetworkConfig parse_network(const json& j, const std::string& origin) {
    const std::string path = "network";
    check_keys(j, {"assets", "asset", "count", "c_st", "gamma", "shock_model"}, origin, path);
    NetworkConfig net;
    if (const json* assets = find(j, "assets")) {
        if (find(j, "asset") || find(j, "count"))
            fail(origin, path, "uses either 'assets' or 'asset'+'count', not both");
        if (!assets->is_array() || assets->empty())
            fail(origin, path + ".assets", "must be a non-empty array");
        for (std::size_t i = 0; i < assets->size(); ++i)
            net.assets.push_back(
                parse_asset((*assets)[i], origin, path + ".assets[" + std::to_string(i) + "]"));
    } else {
        const json& tmpl = require(j, "asset", origin, path);
        const long count = as_long(require(j, "count", origin, path), origin, path + ".count");
        if (count < 1) fail(origin, path + ".count", "must be >= 1");
        const AssetConfig asset = parse_asset(tmpl, origin, path + ".asset");
        net.assets.assign(static_cast<std::size_t>(count), asset);
    }
    net.c_st = as_double(require(j, "c_st", origin, path), origin, path + ".c_st");
    net.gamma = as_double(require(j, "gamma", origin, path), origin, path + ".gamma");
    maybe(j, "shock_model", net.shock_model, parse_shock_model, origin, path);
    try {
        net.validate();
    } catch (const ConfigError& e) {
        fail(origin, path, std::string("is invalid: ") + e.what());
    }
    return net;
}

PolicySpec parse_policy(const json& j, const std::string& origin, const std::string& path) {
    check_keys(j, {"type", "tau_pm", "tau_opm", "table", "model", "applied_as", "delta", "zeta"},
               origin, path);
    PolicySpec spec;
    spec.type = as_string(require(j, "type", origin, path), origin, path + ".type");
    maybe(j, "tau_pm", spec.tau_pm, parse_levels, origin, path);
    maybe(j, "tau_opm", spec.tau_opm, parse_levels, origin, path);
    maybe(j, "table", spec.table, as_string, origin, path);
    maybe(j, "model", spec.model, as_string, origin, path);
    maybe(j, "applied_as", spec.applied_as, as_string, origin, path);
    maybe(j, "delta", spec.delta, as_double, origin, path);
    maybe(j, "zeta", spec.zeta, as_double, origin, path);
    const std::set<std::string> known{"reactive", "threshold", "integrated_bayes", "joint_table",
                                      "dcl_model"};
    if (!known.count(spec.type))
        fail(origin, path + ".type",
             "must be one of reactive, threshold, integrated_bayes, joint_table, dcl_model");
    return spec;
}

SimulateSpec parse_simulate(const json& j, const std::string& origin) {
    const std::string path = "simulate";
    check_keys(j, {"kind", "periods", "components"}, origin, path);
    SimulateSpec spec;
    maybe(j, "kind", spec.kind, as_string, origin, path);
    maybe(j, "periods", spec.periods, as_long, origin, path);
    maybe(j, "components", spec.components, as_long, origin, path);
    if (spec.kind != "trajectory" && spec.kind != "pool")
        fail(origin, path + ".kind", "must be trajectory or pool");
    if (spec.periods < 1) fail(origin, path + ".periods", "must be >= 1");
    if (spec.components < 1) fail(origin, path + ".components", "must be >= 1");
    return spec;
}

ThresholdSearchOptions parse_thresholds(const json& j, const std::string& origin, Mode fallback) {
    const std::string path = "thresholds";
    check_keys(j, {"reps", "horizon", "mode", "candidate_budget"}, origin, path);
    ThresholdSearchOptions opts;
    opts.mode = fallback;
    long reps = opts.reps;
    long horizon = opts.horizon;
    long budget = static_cast<long>(opts.candidate_budget);
    maybe(j, "reps", reps, as_long, origin, path);
    maybe(j, "horizon", horizon, as_long, origin, path);
    maybe(j, "mode", opts.mode, parse_mode, origin, path);
    maybe(j, "candidate_budget", budget, as_long, origin, path);
    if (reps < 1) fail(origin, path + ".reps", "must be >= 1");
    if (horizon < 1) fail(origin, path + ".horizon", "must be >= 1");
    if (budget < 1) fail(origin, path + ".candidate_budget", "must be >= 1");
    opts.reps = static_cast<int>(reps);
    opts.horizon = static_cast<int>(horizon);
    opts.candidate_budget = static_cast<std::size_t>(budget);
    return opts;
}

SolveExactSpec parse_solve_exact(const json& j, const std::string& origin) {
    const std::string path = "solve_exact";
    check_keys(j, {"kind", "params", "truncation", "w_tol", "accelerate", "max_outer"}, origin,
               path);
    SolveExactSpec spec;
    maybe(j, "kind", spec.kind, as_string, origin, path);
    if (spec.kind != "single_asset_bmdp" && spec.kind != "joint_known_params")
        fail(origin, path + ".kind", "must be single_asset_bmdp or joint_known_params");
    if (const json* params = find(j, "params")) {
        if (params->is_string()) {
            if (params->get<std::string>() != "prior_mean")
                fail(origin, path + ".params", "must be 'prior_mean' or {lambda, q}");
            spec.params_from_prior_mean = true;
        } else {
            check_keys(*params, {"lambda", "q"}, origin, path + ".params");
            spec.params_from_prior_mean = false;
            spec.params.lambda = as_double(require(*params, "lambda", origin, path + ".params"),
                                           origin, path + ".params.lambda");
            spec.params.q = as_double(require(*params, "q", origin, path + ".params"), origin,
                                      path + ".params.q");
            try {
                spec.params.validate();
            } catch (const ConfigError& e) {
                fail(origin, path + ".params", std::string("is invalid: ") + e.what());
            }
        }
    }
    if (const json* trunc = find(j, "truncation")) {
        check_keys(*trunc, {"x_max", "k_max", "t_max", "tail_mass_eps", "cell_budget"}, origin,
                   path + ".truncation");
        maybe(*trunc, "x_max", spec.truncation.x_max, as_long, origin, path + ".truncation");
        maybe(*trunc, "k_max", spec.truncation.k_max, as_long, origin, path + ".truncation");
        maybe(*trunc, "t_max", spec.truncation.t_max, as_long, origin, path + ".truncation");
        maybe(*trunc, "tail_mass_eps", spec.truncation.tail_mass_eps, as_double, origin,
              path + ".truncation");
        maybe(*trunc, "cell_budget", spec.truncation.cell_budget, as_double, origin,
              path + ".truncation");
    }
    maybe(j, "w_tol", spec.options.w_tol, as_double, origin, path);
    maybe(j, "accelerate", spec.options.accelerate, as_bool, origin, path);
    long max_outer = spec.options.max_outer;
    maybe(j, "max_outer", max_outer, as_long, origin, path);
    if (max_outer < 1) fail(origin, path + ".max_outer", "must be >= 1");
    spec.options.max_outer = max_outer;
    return spec;
}

DclSpec parse_dcl(const json& j, const std::string& origin) {
    const std::string path = "dcl";
    check_keys(j,
               {"base", "variant", "generations", "max_samples", "epsilon", "episode_length",
                "r_max", "warmup", "bandit_k", "horizon_roll", "delta", "zeta", "hidden", "train"},
               origin, path);
    DclSpec spec;
    spec.base = parse_policy(require(j, "base", origin, path), origin, path + ".base");
    if (spec.base.type != "threshold")
        fail(origin, path + ".base.type",
             "must be threshold (the base policy doubles as the action restriction)");
    if (const json* v = find(j, "variant")) {
        const std::string name = as_string(*v, origin, path + ".variant");
        try {
            spec.variant = variant_from_name(name);
        } catch (const ConfigError&) {
            fail(origin, path + ".variant", "must be one of f1_L2, f2_L1, f3_L1");
        }
    }
    long generations = spec.generations;
    maybe(j, "generations", generations, as_long, origin, path);
    if (generations < 1) fail(origin, path + ".generations", "must be >= 1");
    spec.generations = static_cast<int>(generations);

    DclOptions& o = spec.options;
    maybe(j, "max_samples", o.max_samples, as_long, origin, path);
    maybe(j, "epsilon", o.epsilon, as_double, origin, path);
    maybe(j, "episode_length", o.episode_length, as_long, origin, path);
    maybe(j, "r_max", o.r_max, as_long, origin, path);
    maybe(j, "warmup", o.warmup, as_long, origin, path);
    maybe(j, "bandit_k", o.bandit_k, as_double, origin, path);
    maybe(j, "horizon_roll", o.horizon_roll, as_long, origin, path);
    maybe(j, "delta", o.delta, as_double, origin, path);
    maybe(j, "zeta", o.zeta, as_double, origin, path);
    if (const json* hidden = find(j, "hidden")) {
        if (!hidden->is_array() || hidden->empty())
            fail(origin, path + ".hidden", "must be a non-empty integer array");
        o.hidden.clear();
        for (std::size_t i = 0; i < hidden->size(); ++i)
            o.hidden.push_back(static_cast<int>(
                as_long((*hidden)[i], origin, path + ".hidden[" + std::to_string(i) + "]")));
    }
    if (const json* train = find(j, "train")) {
        check_keys(*train, {"learning_rate", "batch_size", "max_epochs", "patience",
                            "val_fraction"},
                   origin, path + ".train");
        maybe(*train, "learning_rate", o.train.learning_rate, as_double, origin, path + ".train");
        long batch = o.train.batch_size;
        long epochs = o.train.max_epochs;
        long patience = o.train.patience;
        maybe(*train, "batch_size", batch, as_long, origin, path + ".train");
        maybe(*train, "max_epochs", epochs, as_long, origin, path + ".train");
        maybe(*train, "patience", patience, as_long, origin, path + ".train");
        maybe(*train, "val_fraction", o.train.val_fraction, as_double, origin, path + ".train");
        o.train.batch_size = static_cast<int>(batch);
        o.train.max_epochs = static_cast<int>(epochs);
        o.train.patience = static_cast<int>(patience);
    }
    try {
        o.validate();
    } catch (const ConfigError& e) {
        fail(origin, path, std::string("is invalid: ") + e.what());
    }
    return spec;
}

EvaluateSpec parse_evaluate(const json& j, const std::string& origin, Mode fallback) {
    const std::string path = "evaluate";
    check_keys(j, {"policy", "reps", "horizon", "mode", "replay_csv", "heatmap"}, origin, path);
    EvaluateSpec spec;
    spec.mode = fallback;
    spec.policy = parse_policy(require(j, "policy", origin, path), origin, path + ".policy");
    maybe(j, "reps", spec.reps, as_long, origin, path);
    long horizon = spec.horizon;
    maybe(j, "horizon", horizon, as_long, origin, path);
    maybe(j, "mode", spec.mode, parse_mode, origin, path);
    maybe(j, "replay_csv", spec.replay_csv, as_string, origin, path);
    if (spec.reps < 1) fail(origin, path + ".reps", "must be >= 1");
    if (horizon < 1) fail(origin, path + ".horizon", "must be >= 1");
    spec.horizon = static_cast<int>(horizon);
    if (spec.mode == Mode::replay && spec.replay_csv.empty())
        fail(origin, path + ".replay_csv", "is required in replay mode");
    if (const json* hm = find(j, "heatmap")) {
        check_keys(*hm, {"k_max", "t_max", "companion"}, origin, path + ".heatmap");
        HeatmapSpec h;
        maybe(*hm, "k_max", h.k_max, as_long, origin, path + ".heatmap");
        maybe(*hm, "t_max", h.t_max, as_long, origin, path + ".heatmap");
        maybe(*hm, "companion", h.companion, as_string, origin, path + ".heatmap");
        if (h.k_max < 0 || h.t_max < 0)
            fail(origin, path + ".heatmap", "grid bounds must be >= 0");
        if (h.companion != "fresh" && h.companion != "failed")
            fail(origin, path + ".heatmap.companion", "must be fresh or failed");
        spec.heatmap = h;
    }
    return spec;
}

FitSpec parse_fit(const json& j, const std::string& origin, long default_xi) {
    const std::string path = "fit";
    check_keys(j, {"csv", "outlier_quantile", "period_length", "min_duration", "xi"}, origin,
               path);
    FitSpec spec;
    spec.csv = as_string(require(j, "csv", origin, path), origin, path + ".csv");
    spec.preprocess.xi = default_xi;
    maybe(j, "outlier_quantile", spec.preprocess.outlier_quantile, as_double, origin, path);
    maybe(j, "period_length", spec.preprocess.period_length, as_double, origin, path);
    maybe(j, "min_duration", spec.preprocess.min_duration, as_double, origin, path);
    maybe(j, "xi", spec.preprocess.xi, as_long, origin, path);
    return spec;
}

json levels_json(const std::vector<long>& v) {
    if (v.size() == 1) return json(v[0]);
    return json(v);
}

json policy_json(const PolicySpec& spec) {
    json j;
    j["type"] = spec.type;
    if (!spec.tau_pm.empty()) j["tau_pm"] = levels_json(spec.tau_pm);
    if (!spec.tau_opm.empty()) j["tau_opm"] = levels_json(spec.tau_opm);
    if (!spec.table.empty()) j["table"] = spec.table;
    if (!spec.model.empty()) j["model"] = spec.model;
    if (!spec.applied_as.empty()) j["applied_as"] = spec.applied_as;
    if (spec.type == "dcl_model") {
        j["delta"] = spec.delta;
        j["zeta"] = spec.zeta;
    }
    return j;
}

std::string mode_string(Mode mode) { return mode_name(mode); }

json config_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["mode"] = mode_string(c.mode);
    json net;
    net["c_st"] = c.network.c_st;
    net["gamma"] = c.network.gamma;
    net["shock_model"] = c.network.shock_model == ShockModel::unit ? "unit" : "geometric";
    json assets = json::array();
    for (const AssetConfig& a : c.network.assets) {
        json aj;
        aj["xi"] = a.xi;
        aj["c_pm"] = a.c_pm;
        aj["c_cm"] = a.c_cm;
        aj["prior"] = {{"alpha", a.prior.alpha},
                       {"beta", a.prior.beta},
                       {"a", a.prior.a},
                       {"b", a.prior.b}};
        assets.push_back(aj);
    }
    net["assets"] = assets;
    j["network"] = net;

    if (c.simulate) {
        j["simulate"] = {{"kind", c.simulate->kind},
                         {"periods", c.simulate->periods},
                         {"components", c.simulate->components}};
    }
    if (c.thresholds) {
        j["thresholds"] = {{"reps", c.thresholds->reps},
                           {"horizon", c.thresholds->horizon},
                           {"mode", mode_string(c.thresholds->mode)},
                           {"candidate_budget", c.thresholds->candidate_budget}};
    }
    if (c.solve_exact) {
        json s;
        s["kind"] = c.solve_exact->kind;
        if (c.solve_exact->params_from_prior_mean)
            s["params"] = "prior_mean";
        else
            s["params"] = {{"lambda", c.solve_exact->params.lambda},
                           {"q", c.solve_exact->params.q}};
        s["truncation"] = {{"x_max", c.solve_exact->truncation.x_max},
                           {"k_max", c.solve_exact->truncation.k_max},
                           {"t_max", c.solve_exact->truncation.t_max},
                           {"tail_mass_eps", c.solve_exact->truncation.tail_mass_eps},
                           {"cell_budget", c.solve_exact->truncation.cell_budget}};
        s["w_tol"] = c.solve_exact->options.w_tol;
        s["accelerate"] = c.solve_exact->options.accelerate;
        s["max_outer"] = c.solve_exact->options.max_outer;
        j["solve_exact"] = s;
    }
    if (c.dcl) {
        const DclOptions& o = c.dcl->options;
        json d;
        d["base"] = policy_json(c.dcl->base);
        d["variant"] = variant_name(c.dcl->variant);
        d["generations"] = c.dcl->generations;
        d["max_samples"] = o.max_samples;
        d["epsilon"] = o.epsilon;
        d["episode_length"] = o.episode_length;
        d["r_max"] = o.r_max;
        d["warmup"] = o.warmup;
        d["bandit_k"] = o.bandit_k;
        d["horizon_roll"] = o.horizon_roll;
        d["delta"] = o.delta;
        d["zeta"] = o.zeta;
        d["hidden"] = o.hidden;
        d["train"] = {{"learning_rate", o.train.learning_rate},
                      {"batch_size", o.train.batch_size},
                      {"max_epochs", o.train.max_epochs},
                      {"patience", o.train.patience},
                      {"val_fraction", o.train.val_fraction}};
        j["dcl"] = d;
    }
    if (c.evaluate) {
        json e;
        e["policy"] = policy_json(c.evaluate->policy);
        e["reps"] = c.evaluate->reps;
        e["horizon"] = c.evaluate->horizon;
        e["mode"] = mode_string(c.evaluate->mode);
        if (!c.evaluate->replay_csv.empty()) e["replay_csv"] = c.evaluate->replay_csv;
        if (c.evaluate->heatmap) {
            e["heatmap"] = {{"k_max", c.evaluate->heatmap->k_max},
                            {"t_max", c.evaluate->heatmap->t_max},
                            {"companion", c.evaluate->heatmap->companion}};
        }
        j["evaluate"] = e;
    }
    if (c.fit) {
        j["fit"] = {{"csv", c.fit->csv},
                    {"outlier_quantile", c.fit->preprocess.outlier_quantile},
                    {"period_length", c.fit->preprocess.period_length},
                    {"min_duration", c.fit->preprocess.min_duration},
                    {"xi", c.fit->preprocess.xi}};
    }
    return j;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string resolve_against(const std::string& base_dir, const std::string& path) {
    if (path.empty() || base_dir.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open config " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    ExperimentConfig config = from_json_text(buf.str(), path);
    config.base_dir = std::filesystem::path(path).parent_path().string();
    return config;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");
    check_keys(j,
               {"name", "seed", "workers", "mode", "network", "simulate", "thresholds",
                "solve_exact", "dcl", "evaluate", "fit"},
               origin, "config");

    ExperimentConfig c;
    c.name = as_string(require(j, "name", origin, "config"), origin, "name");
    c.seed = as_u64(require(j, "seed", origin, "config"), origin, "seed");
    long workers = 1;
    maybe(j, "workers", workers, as_long, origin, "config");
    if (workers < 1) fail(origin, "workers", "must be >= 1");
    c.workers = static_cast<int>(workers);
    maybe(j, "mode", c.mode, parse_mode, origin, "config");
    c.network = parse_network(require(j, "network", origin, "config"), origin);

    if (const json* p = find(j, "simulate")) c.simulate = parse_simulate(*p, origin);
    if (const json* p = find(j, "thresholds")) c.thresholds = parse_thresholds(*p, origin, c.mode);
    if (const json* p = find(j, "solve_exact")) c.solve_exact = parse_solve_exact(*p, origin);
    if (const json* p = find(j, "dcl")) c.dcl = parse_dcl(*p, origin);
    if (const json* p = find(j, "evaluate")) c.evaluate = parse_evaluate(*p, origin, c.mode);
    if (const json* p = find(j, "fit")) c.fit = parse_fit(*p, origin, c.network.assets[0].xi);
    return c;
}

std::string ExperimentConfig::canonical_json() const { return config_json(*this).dump(2) + "\n"; }

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical_json()); }

std::unique_ptr<Policy> resolve_policy(const PolicySpec& spec, const ExperimentConfig& config) {
    const NetworkConfig& net = config.network;
    const std::size_t assets = net.assets.size();
    auto broadcast = [&](const std::vector<long>& v, const char* which) {
        if (v.size() == 1) return std::vector<long>(assets, v[0]);
        if (v.size() == assets) return v;
        throw ConfigError(std::string(which) + " needs one level or one per asset");
    };
    auto bands = [&] {
        ThresholdPolicy p(broadcast(spec.tau_pm, "tau_pm"), broadcast(spec.tau_opm, "tau_opm"));
        p.validate(net);
        return p;
    };

    if (spec.type == "reactive")
        return std::make_unique<ThresholdPolicy>(ThresholdPolicy::reactive(net));
    if (spec.type == "threshold") return std::make_unique<ThresholdPolicy>(bands());
    if (spec.type == "integrated_bayes") {
        std::shared_ptr<const TabularPolicy> table;
        if (spec.table.empty()) {
            if (!net.symmetric())
                throw ConfigError(
                    "integrated_bayes without a saved table needs a symmetric instance");
            table = std::make_shared<TabularPolicy>(
                solve_single_asset_bmdp(net.assets[0], net.c_st, net.gamma, TruncationSpec{}));
        } else {
            table = std::make_shared<TabularPolicy>(
                TabularPolicy::load(resolve_against(config.base_dir, spec.table)));
        }
        if (table->kind != TabularPolicy::Kind::single_asset_belief)
            throw ConfigError("integrated_bayes needs a single-asset belief table");
        return std::make_unique<BeliefTablePolicy>(std::move(table));
    }
    if (spec.type == "joint_table") {
        if (spec.table.empty()) throw ConfigError("joint_table needs a 'table' path");
        auto table = std::make_shared<TabularPolicy>(
            TabularPolicy::load(resolve_against(config.base_dir, spec.table)));
        if (table->kind != TabularPolicy::Kind::joint_known_params)
            throw ConfigError("joint_table needs a joint known-parameter table");
        return std::make_unique<JointTablePolicy>(std::move(table), net);
    }
    if (spec.type == "dcl_model") {
        if (spec.model.empty()) throw ConfigError("dcl_model needs a 'model' path");
        if (spec.tau_pm.empty() || spec.tau_opm.empty())
            throw ConfigError("dcl_model needs tau_pm and tau_opm restriction bands");
        ClassifierModel model =
            ClassifierModel::load(resolve_against(config.base_dir, spec.model));
        const FeatureVariant applied =
            spec.applied_as.empty() ? model.variant : variant_from_name(spec.applied_as);
        return std::make_unique<NeuralPolicy>(std::move(model), bands(), spec.delta, spec.zeta,
                                              applied, std::string{});
    }
    throw ConfigError("unknown policy type '" + spec.type + "'");
}

std::string resolve_input(const ExperimentConfig& config, const std::string& path) {
    const std::string beside_config = resolve_against(config.base_dir, path);
    if (beside_config != path && !std::filesystem::exists(beside_config) &&
        std::filesystem::exists(path))
        return path;  // fall back to the working directory for generated files
    return beside_config;
}

std::string provenance_stamp(const ExperimentConfig& config, std::uint64_t effective_seed) {
    return "config=" + config.name + " hash=" + hash_hex(config.config_hash()) +
           " seed=" + std::to_string(effective_seed);
}

std::string manifest_json(const ExperimentConfig& config, const std::string& command,
                          std::uint64_t effective_seed, int workers,
                          const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["config_name"] = config.name;
    m["config_hash"] = hash_hex(config.config_hash());
    m["seed"] = effective_seed;
    m["workers"] = workers;
    m["versions"] = {{"cbm", kLibraryVersion}, {"config_schema", kConfigSchemaVersion}};
    m["outputs"] = outputs;
    return m.dump(2) + "\n";
}

}  // namespace cbm
