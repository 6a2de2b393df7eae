#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbm/network.hpp"
#include "cbm/nnet.hpp"
#include "cbm/policy.hpp"
#include "cbm/threshold.hpp"

namespace cbm {

// Feature layouts for the sequential per-asset decision rule. f1_L2 reads the
// true component parameters and only works on L2 states; f2_L1 applies an
// f1-trained network with posterior-mean estimates substituted for the
// parameters (open-loop feedback); f3_L1 appends the shock count and age so
// the belief itself is visible.
enum class FeatureVariant { f1_L2, f2_L1, f3_L1 };

std::string variant_name(FeatureVariant v);
FeatureVariant variant_from_name(const std::string& name);

// 4M+1 for f1/f2, 6M+1 for f3
int feature_dim(FeatureVariant v, int assets);

// Feature vector for deciding asset m inside a partially committed epoch: one
// block per asset, a one-hot marker on the deciding asset, and the shared
// opportunity flag (some asset failed, or a replacement already committed).
// `state` must already reflect the replacements committed earlier this epoch.
Eigen::VectorXd extract_features(const NetworkState& state, const NetworkConfig& cfg,
                                 std::size_t m, bool any_committed_replace, FeatureVariant v);

// Action restriction derived from optimized thresholds: postpone-only at or
// below delta * tau_opm, replace-only from zeta * tau_pm up. Failure always
// forces replacement.
ActionFlags restricted_actions(long x, long tau_pm, long tau_opm, double delta, double zeta,
                               bool failed);

struct DclOptions {
    // sample collection
    long max_samples = 50000;
    double epsilon = 0.02;     // random-action fraction within the restricted set
    int episode_length = 500;  // epochs per collection episode

    // rollout labeling
    long r_max = 7500;    // total rollouts per labeling task
    int warmup = 32;      // rollouts per candidate before adaptive allocation
    double bandit_k = 2.0;
    int horizon_roll = 500;

    // action restriction
    double delta = 0.5;
    double zeta = 1.5;

    // classifier
    std::vector<int> hidden{256, 128, 128};
    TrainOptions train;

    int workers = 1;

    void validate() const;
};

// One labeled sub-decision. Indices into the per-action arrays are the
// actions themselves (0 postpone, 1 replace).
struct LabeledSample {
    Eigen::VectorXd feature;
    int label = 0;
    std::array<long, 2> rolls{0, 0};
    std::array<double, 2> q_mean{0.0, 0.0};
    std::array<double, 2> q_se{0.0, 0.0};
    bool forced = false;          // singleton candidate set, labeled without rollouts
    bool low_confidence = false;  // rollout budget ran out before separation
};

struct Dataset {
    FeatureVariant variant = FeatureVariant::f3_L1;
    int assets = 0;
    std::vector<LabeledSample> samples;

    Eigen::MatrixXd feature_matrix() const;
    std::vector<int> labels() const;
    long count_label(int action) const;

    void save_csv(const std::string& path) const;
    static Dataset load_csv(const std::string& path);
};

// Labels one sub-decision by paired rollouts of `base`. `state` must reflect
// the commits made earlier in this epoch's permutation, `rest` lists the
// assets still to decide after m, in permutation order. Rollout r of every
// candidate shares the stream derived from (task_seed, r), so candidates are
// compared under common random numbers. Singleton candidate sets label
// without rollouts.
LabeledSample label_state(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                          bool any_committed_replace, const std::vector<std::size_t>& rest,
                          const Policy& base, const ThresholdPolicy& restriction,
                          const DclOptions& opts, FeatureVariant variant,
                          std::uint64_t task_seed);

// Simulates trajectories under `base` with epsilon-exploration inside the
// restricted sets, drawing a fresh asset permutation every epoch. Every
// non-singleton sub-decision becomes one labeling task until max_samples are
// collected; labeling tasks run in parallel over derived streams.
Dataset collect_samples(const Policy& base, const NetworkConfig& cfg, Mode mode,
                        const ThresholdPolicy& restriction, const DclOptions& opts,
                        FeatureVariant variant, std::uint64_t seed);

struct ClassifierModel {
    FeatureVariant variant = FeatureVariant::f3_L1;
    int assets = 0;
    Mlp net;
    Standardizer standardizer;

    void save(const std::string& path) const;
    static ClassifierModel load(const std::string& path);
};

// Standardizes the features and fits the classifier; the dataset must carry
// both labels.
ClassifierModel train_classifier(const Dataset& data, const DclOptions& opts,
                                 TrainReport* report = nullptr);

// Sequential argmax policy over a trained classifier, masked by the same
// threshold restriction the samples were collected under. Assets are visited
// in a fresh random permutation every epoch; committed replacements are
// applied before later assets decide, so decide() returns the post-decision
// state. `applied_as` must equal the trained variant, except that an
// f1_L2-trained model may be applied as f2_L1 (open-loop feedback).
class NeuralPolicy final : public Policy {
public:
    NeuralPolicy(ClassifierModel model, ThresholdPolicy restriction, double delta, double zeta,
                 FeatureVariant applied_as, std::string name);

    DecisionResult decide(const NetworkState& state, const NetworkConfig& cfg,
                          Rng& rng) const override;
    bool decide_one(const NetworkState& state, const NetworkConfig& cfg, std::size_t m,
                    bool any_committed_replace, Rng& rng) const override;
    InfoNeed info_need() const override;
    std::string name() const override { return name_; }

    const ClassifierModel& model() const { return model_; }
    FeatureVariant applied_as() const { return applied_; }

private:
    ClassifierModel model_;
    ThresholdPolicy restriction_;
    double delta_;
    double zeta_;
    FeatureVariant applied_;
    std::string name_;
};

struct GenerationResult {
    ClassifierModel model;
    TrainReport train;
    long samples = 0;
    long replace_labels = 0;
    long low_confidence = 0;
    double mean_rollouts = 0;
};

struct DclRunReport {
    std::vector<GenerationResult> generations;
};

// Generation driver: generation g labels sub-decisions by rolling out
// generation g-1's policy (generation 0 = `initial`) and trains a fresh
// classifier. The restriction thresholds stay fixed across generations.
// f1_L2 trains on L2 trajectories, f3_L1 on L1; f2_L1 is not trainable.
DclRunReport run_dcl(const Policy& initial, const NetworkConfig& cfg,
                     const ThresholdPolicy& restriction, const DclOptions& opts,
                     FeatureVariant variant, int generations, std::uint64_t seed);

}  // namespace cbm
