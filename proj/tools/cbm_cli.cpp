#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cbm/errors.hpp"
#include "cbm/instance.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cbm;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct RunContext {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    int workers = 1;
    fs::path out;
    std::vector<std::string> outputs;

    std::string stamp() const { return provenance_stamp(config, seed); }

    void write_text(const std::string& filename, const std::string& content) {
        const fs::path path = out / filename;
        std::ofstream os(path);
        if (!os) throw MissingInputError("cannot open " + path.string() + " for writing");
        os << content;
        if (!os) throw MissingInputError("failed writing " + path.string());
        outputs.push_back(filename);
    }

    // library exports write their own files; this re-stamps them afterwards
    void stamp_file(const std::string& filename) {
        const fs::path path = out / filename;
        std::ifstream is(path);
        if (!is) throw MissingInputError("cannot reopen " + path.string());
        std::ostringstream buf;
        buf << is.rdbuf();
        is.close();
        std::ofstream os(path);
        os << "# " << stamp() << '\n' << buf.str();
        outputs.push_back(filename);
    }

    void track(const std::string& filename) { outputs.push_back(filename); }

    void finish(const std::string& command) {
        const std::string manifest = manifest_json(config, command, seed, workers, outputs);
        std::ofstream os(out / "manifest.json");
        os << manifest;
    }
};

json report_stamp(const RunContext& ctx) {
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(ctx.config.config_hash()));
    json j;
    j["config_name"] = ctx.config.name;
    j["config_hash"] = hex;
    j["seed"] = ctx.seed;
    return j;
}

void run_simulate(RunContext& ctx) {
    const SimulateSpec spec = ctx.config.simulate.value_or(SimulateSpec{});
    const NetworkConfig& net = ctx.config.network;

    if (spec.kind == "pool") {
        SyntheticOptions synth;
        synth.components = spec.components;
        synth.xi = net.assets[0].xi;
        synth.model = net.shock_model;
        const std::vector<RawSeries> pool =
            synthesize_pool(net.assets[0].prior, synth, ctx.seed);
        write_raw_csv((ctx.out / "pool.csv").string(), pool, ctx.stamp());
        ctx.track("pool.csv");
        ctx.finish("simulate");
        return;
    }

    Mode mode = ctx.config.mode;
    if (mode == Mode::replay) throw ConfigError("simulate needs mode L1 or L2");
    Rng rng(ctx.seed, "simulate.traj", 0);
    NetworkState state = initial_state(net, mode, rng);

    std::ostringstream csv;
    csv << "# " << ctx.stamp() << "\nasset,t,k,z,x\n";
    for (long t = 1; t <= spec.periods; ++t) {
        std::vector<std::array<long, 2>> before;
        before.reserve(state.assets.size());
        for (const AssetState& a : state.assets) before.push_back({a.belief.k, a.belief.x});
        advance(state, net, rng);
        for (std::size_t m = 0; m < state.assets.size(); ++m) {
            const AssetBelief& b = state.assets[m].belief;
            csv << m << ',' << t << ',' << (b.k - before[m][0]) << ',' << (b.x - before[m][1])
                << ',' << b.x << '\n';
        }
    }
    ctx.write_text("trajectory.csv", csv.str());
    ctx.finish("simulate");
}

void run_optimize_thresholds(RunContext& ctx) {
    ThresholdSearchOptions opts = ctx.config.thresholds.value_or(ThresholdSearchOptions{});
    opts.workers = ctx.workers;
    const ThresholdSearchReport rep = optimize_thresholds(ctx.config.network, opts, ctx.seed);

    json j = report_stamp(ctx);
    j["tau_pm"] = rep.tau_pm;
    j["tau_opm"] = rep.tau_opm;
    j["best_mean"] = rep.best_mean;
    j["best_ci_halfwidth"] = rep.best_ci_halfwidth;
    if (!rep.warning.empty()) j["warning"] = rep.warning;
    ctx.write_text("thresholds.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "# " << ctx.stamp() << "\nstage,threshold,mean,ci_halfwidth\n";
    for (const SweepPoint& p : rep.pm_sweep)
        csv << "pm," << p.threshold << ',' << fmt_double(p.mean) << ','
            << fmt_double(p.ci_halfwidth) << '\n';
    for (const SweepPoint& p : rep.opm_sweep)
        csv << "opm," << p.threshold << ',' << fmt_double(p.mean) << ','
            << fmt_double(p.ci_halfwidth) << '\n';
    ctx.write_text("sweep.csv", csv.str());
    ctx.finish("optimize-thresholds");
}

void run_solve_exact(RunContext& ctx) {
    SolveExactSpec spec = ctx.config.solve_exact.value_or(SolveExactSpec{});
    spec.options.workers = ctx.workers;
    const NetworkConfig& net = ctx.config.network;

    TabularPolicy table;
    if (spec.kind == "single_asset_bmdp") {
        table = solve_single_asset_bmdp(net.assets[0], net.c_st, net.gamma, spec.truncation,
                                        spec.options);
        table.save((ctx.out / "table.bin").string());
        ctx.track("table.bin");
        table.export_min_replace_csv((ctx.out / "min_replace.csv").string());
        ctx.stamp_file("min_replace.csv");
    } else {
        std::vector<DegradationParams> params;
        for (const AssetConfig& a : net.assets) {
            if (spec.params_from_prior_mean)
                params.push_back(DegradationParams{a.prior.mean_lambda(), a.prior.mean_q()});
            else
                params.push_back(spec.params);
        }
        table = solve_underlying_mdp(net, params, spec.truncation);
        table.save((ctx.out / "table.bin").string());
        ctx.track("table.bin");
        if (net.assets.size() == 2) {
            table.export_action_grid_csv((ctx.out / "action_grid.csv").string());
            ctx.stamp_file("action_grid.csv");
        }
    }

    json j = report_stamp(ctx);
    j["kind"] = spec.kind;
    j["iterations"] = table.stats.iterations;
    j["bellman_residual"] = table.stats.bellman_residual;
    j["truncation_error_bound"] = table.stats.truncation_error_bound;
    if (spec.kind == "single_asset_bmdp") {
        j["w_star"] = table.stats.w_star;
        j["x_max"] = table.x_max;
        j["k_max"] = table.k_max;
        j["t_max"] = table.t_max;
    }
    ctx.write_text("solve_report.json", j.dump(2) + "\n");
    ctx.finish("solve-exact");
}

void run_train_dcl(RunContext& ctx) {
    if (!ctx.config.dcl) throw ConfigError("config has no 'dcl' block");
    DclSpec spec = *ctx.config.dcl;
    spec.options.workers = ctx.workers;

    const std::unique_ptr<Policy> base = resolve_policy(spec.base, ctx.config);
    const auto* restriction = dynamic_cast<const ThresholdPolicy*>(base.get());
    if (!restriction) throw ConfigError("dcl base policy must be a threshold policy");

    const DclRunReport rep = run_dcl(*base, ctx.config.network, *restriction, spec.options,
                                     spec.variant, spec.generations, ctx.seed);

    json j = report_stamp(ctx);
    j["variant"] = variant_name(spec.variant);
    json gens = json::array();
    for (std::size_t g = 0; g < rep.generations.size(); ++g) {
        const GenerationResult& gen = rep.generations[g];
        const std::string file = "model_gen" + std::to_string(g + 1) + ".bin";
        gen.model.save((ctx.out / file).string());
        ctx.track(file);
        json gj;
        gj["generation"] = g + 1;
        gj["model"] = file;
        gj["samples"] = gen.samples;
        gj["replace_labels"] = gen.replace_labels;
        gj["low_confidence"] = gen.low_confidence;
        gj["mean_rollouts"] = gen.mean_rollouts;
        gj["epochs"] = gen.train.epochs;
        gj["train_loss"] = gen.train.train_loss;
        gj["val_loss"] = gen.train.val_loss;
        gj["val_accuracy"] = gen.train.val_accuracy;
        gens.push_back(gj);
    }
    j["generations"] = gens;
    ctx.write_text("dcl_report.json", j.dump(2) + "\n");
    ctx.finish("train-dcl");
}

// fixed-companion probe: minimum damage level at which the policy replaces
// asset 0, over the (k, t) belief grid
void write_heatmap(RunContext& ctx, const Policy& policy, const HeatmapSpec& spec) {
    const NetworkConfig& net = ctx.config.network;
    const std::size_t assets = net.assets.size();

    NetworkState state;
    state.mode = policy.info_need() == InfoNeed::true_params ? Mode::L2 : Mode::L1;
    state.assets.resize(assets);
    for (std::size_t m = 0; m < assets; ++m)
        state.assets[m].params = DegradationParams{net.assets[m].prior.mean_lambda(),
                                                   net.assets[m].prior.mean_q()};

    bool opportunity = false;
    if (spec.companion == "failed") {
        if (assets < 2) throw ConfigError("a failed companion needs at least two assets");
        for (std::size_t m = 1; m < assets; ++m) {
            const AssetConfig& a = net.assets[m];
            const double mu_phi = a.prior.mean_q();
            const double shocks = static_cast<double>(a.xi) * mu_phi / (1.0 - mu_phi);
            AssetBelief& b = state.assets[m].belief;
            b.x = a.xi;
            b.k = std::llround(shocks);
            b.t = std::llround(shocks / a.prior.mean_lambda());
        }
        opportunity = true;
    }

    Rng rng(ctx.seed, "heatmap.probe", 0);
    std::ostringstream csv;
    csv << "# " << ctx.stamp() << "\nk,t,min_x\n";
    const long xi = net.assets[0].xi;
    for (long k = 0; k <= spec.k_max; ++k) {
        for (long t = 0; t <= spec.t_max; ++t) {
            long min_x = -1;
            for (long x = 0; x <= xi; ++x) {
                state.assets[0].belief = AssetBelief{x, k, t};
                if (policy.decide_one(state, ctx.config.network, 0, opportunity, rng)) {
                    min_x = x;
                    break;
                }
            }
            csv << k << ',' << t << ',' << min_x << '\n';
        }
    }
    ctx.write_text("heatmap.csv", csv.str());
}

void run_evaluate(RunContext& ctx) {
    if (!ctx.config.evaluate) throw ConfigError("config has no 'evaluate' block");
    const EvaluateSpec& spec = *ctx.config.evaluate;
    const std::unique_ptr<Policy> policy = resolve_policy(spec.policy, ctx.config);

    std::unique_ptr<ReplayPool> pool;
    if (spec.mode == Mode::replay) {
        const IngestReport ing = ingest(resolve_input(ctx.config, spec.replay_csv));
        PreprocessOptions popts;
        popts.xi = ctx.config.network.assets[0].xi;
        std::vector<PeriodizedSeries> trajectories;
        for (const RawSeries& raw : ing.series) trajectories.push_back(preprocess(raw, popts));
        pool = std::make_unique<ReplayPool>(build_replay(std::move(trajectories)));
    }

    EvalOptions opts;
    opts.reps = spec.reps;
    opts.horizon = spec.horizon;
    opts.workers = ctx.workers;
    const EvalReport rep =
        evaluate(*policy, ctx.config.network, spec.mode, opts, ctx.seed, pool.get());

    json j = report_stamp(ctx);
    j["policy"] = rep.policy_name;
    j["mode"] = mode_name(rep.mode);
    j["mean"] = rep.mean;
    j["ci_halfwidth"] = rep.ci_halfwidth;
    j["sample_sd"] = rep.sample_sd;
    j["reps"] = rep.reps;
    j["horizon"] = rep.horizon;
    j["stream_tag"] = rep.stream_tag;
    if (!rep.warning.empty()) j["warning"] = rep.warning;
    ctx.write_text("eval_report.json", j.dump(2) + "\n");

    if (spec.heatmap) write_heatmap(ctx, *policy, *spec.heatmap);
    ctx.finish("evaluate");
}

void run_fit_priors(RunContext& ctx) {
    if (!ctx.config.fit) throw ConfigError("config has no 'fit' block");
    const FitSpec& spec = *ctx.config.fit;

    const IngestReport ing = ingest(resolve_input(ctx.config, spec.csv));
    std::vector<PeriodizedSeries> training;
    for (const RawSeries& raw : ing.series) training.push_back(preprocess(raw, spec.preprocess));
    const PriorFit fit = fit_priors(training);

    json j = report_stamp(ctx);
    j["alpha"] = fit.prior.alpha;
    j["beta"] = fit.prior.beta;
    j["a"] = fit.prior.a;
    j["b"] = fit.prior.b;
    j["mean_lambda"] = fit.prior.mean_lambda();
    j["cv_lambda"] = fit.prior.cv_lambda();
    j["mean_q"] = fit.prior.mean_q();
    json d;
    d["log_likelihood"] = fit.diagnostics.log_likelihood;
    d["start_log_likelihood"] = fit.diagnostics.start_log_likelihood;
    d["evaluations"] = fit.diagnostics.evaluations;
    d["converged"] = fit.diagnostics.converged;
    d["components"] = training.size();
    if (!fit.diagnostics.warning.empty()) d["warning"] = fit.diagnostics.warning;
    j["diagnostics"] = d;
    ctx.write_text("fitted_prior.json", j.dump(2) + "\n");

    if (!ing.warning.empty()) std::cerr << "warning: " << ing.warning << '\n';
    ctx.finish("fit-priors");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"condition-based maintenance experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_override = 0;
    long workers_override = 0;
    bool seed_given = false;
    bool workers_given = false;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate", "emit a per-period trajectory or a synthetic component pool"},
        {"optimize-thresholds", "two-step common-random-number threshold search"},
        {"solve-exact", "tabular solve of the known-parameter or single-asset problem"},
        {"train-dcl", "rollout-labeled classifier training, one model per generation"},
        {"evaluate", "Monte Carlo policy evaluation, optionally with a heatmap probe"},
        {"fit-priors", "empirical-Bayes hyperparameter fit from a raw CSV"}};
    for (const auto& [name, desc] : commands) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "experiment document (JSON)")->required();
        sub->add_option("--seed", seed_override, "override the config's master seed")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--workers", workers_override, "override the config's worker count")
            ->each([&](const std::string&) { workers_given = true; });
        sub->add_option("--out", out_dir, "output directory (default: current)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunContext ctx;
        ctx.config = ExperimentConfig::from_file(config_path);
        ctx.seed = seed_given ? seed_override : ctx.config.seed;
        if (workers_given && workers_override < 1) throw ConfigError("--workers must be >= 1");
        ctx.workers = workers_given ? static_cast<int>(workers_override) : ctx.config.workers;
        ctx.out = out_dir;
        fs::create_directories(ctx.out);

        const std::string command = app.get_subcommands().at(0)->get_name();
        if (command == "simulate")
            run_simulate(ctx);
        else if (command == "optimize-thresholds")
            run_optimize_thresholds(ctx);
        else if (command == "solve-exact")
            run_solve_exact(ctx);
        else if (command == "train-dcl")
            run_train_dcl(ctx);
        else if (command == "evaluate")
            run_evaluate(ctx);
        else if (command == "fit-priors")
            run_fit_priors(ctx);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << '\n';
        return 4;
    }
}
