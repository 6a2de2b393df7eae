#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cbm/dcl.hpp"
#include "cbm/evaluator.hpp"
#include "cbm/exact.hpp"
#include "cbm/network.hpp"
#include "cbm/pipeline.hpp"
#include "cbm/threshold.hpp"

namespace cbm {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

// Declarative policy reference inside a config. Scalars broadcast to all
// assets; file paths resolve against the config file's directory.
struct PolicySpec {
    std::string type;  // reactive | threshold | integrated_bayes | joint_table | dcl_model
    std::vector<long> tau_pm;
    std::vector<long> tau_opm;
    std::string table;       // saved value table; empty for integrated_bayes
                             // solves the single-asset problem inline
    std::string model;       // saved classifier (dcl_model)
    std::string applied_as;  // optional feature remap, defaults to the
                             // model's training variant
    double delta = 0.5;
    double zeta = 1.5;
};

struct SimulateSpec {
    std::string kind = "trajectory";  // trajectory | pool
    long periods = 10;
    long components = 52;
};

struct SolveExactSpec {
    std::string kind = "single_asset_bmdp";  // | joint_known_params
    bool params_from_prior_mean = true;
    DegradationParams params{1.0, 0.5};  // used when an explicit pair is given
    TruncationSpec truncation;
    BmdpSolveOptions options;
};

struct HeatmapSpec {
    long k_max = 60;
    long t_max = 60;
    std::string companion = "fresh";  // fresh | failed (needs >= 2 assets)
};

struct EvaluateSpec {
    PolicySpec policy;
    long reps = 10000;
    int horizon = 1000;
    Mode mode = Mode::L1;
    std::string replay_csv;  // trajectory pool for replay mode
    std::optional<HeatmapSpec> heatmap;
};

struct DclSpec {
    PolicySpec base;  // must be a threshold policy; doubles as restriction
    FeatureVariant variant = FeatureVariant::f3_L1;
    int generations = 1;
    DclOptions options;
};

struct FitSpec {
    std::string csv;
    PreprocessOptions preprocess;
};

// One experiment document: the instance plus per-command blocks. Every
// random quantity downstream derives from `seed` via
// hash64(seed, purpose_tag, replication_index).
struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    int workers = 1;
    Mode mode = Mode::L1;
    NetworkConfig network;

    std::optional<SimulateSpec> simulate;
    std::optional<ThresholdSearchOptions> thresholds;
    std::optional<SolveExactSpec> solve_exact;
    std::optional<DclSpec> dcl;
    std::optional<EvaluateSpec> evaluate;
    std::optional<FitSpec> fit;

    std::string base_dir;  // directory of the source file; resolves inputs

    static ExperimentConfig from_file(const std::string& path);
    // origin labels error messages (a path or pseudo-name)
    static ExperimentConfig from_json_text(const std::string& text, const std::string& origin);

    // canonical serialization (sorted keys, parsed values only): equal
    // configs hash equal regardless of input formatting
    std::string canonical_json() const;
    std::uint64_t config_hash() const;
};

// Instantiates the described policy. Tables and models load relative to
// base_dir; integrated_bayes without a table solves the single-asset
// problem at default truncation (symmetric instances only).
std::unique_ptr<Policy> resolve_policy(const PolicySpec& spec, const ExperimentConfig& config);

// Relative input paths resolve against the config file's directory.
std::string resolve_input(const ExperimentConfig& config, const std::string& path);

// "config=<name> hash=<hex> seed=<n>": one-line provenance stamp embedded
// in every text artifact a command writes.
std::string provenance_stamp(const ExperimentConfig& config, std::uint64_t effective_seed);

// manifest.json content for one command run: config identity, effective
// seed, worker count, versions, and the list of written files.
std::string manifest_json(const ExperimentConfig& config, const std::string& command,
                          std::uint64_t effective_seed, int workers,
                          const std::vector<std::string>& outputs);

}  // namespace cbm
