#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "cbm/rng.hpp"

namespace cbm {

// Plain feed-forward classifier: ReLU hidden layers, linear output layer read
// as softmax logits. Weights start He-normal from the given stream.
class Mlp {
public:
    Mlp() = default;
    // dims = {inputs, hidden..., outputs}
    Mlp(std::vector<int> dims, Rng& rng);

    const std::vector<int>& dims() const { return dims_; }
    int inputs() const { return dims_.empty() ? 0 : dims_.front(); }
    int outputs() const { return dims_.empty() ? 0 : dims_.back(); }

    Eigen::VectorXd logits(const Eigen::VectorXd& x) const;
    // rows = samples
    Eigen::MatrixXd logits(const Eigen::MatrixXd& X) const;

    // mean softmax cross-entropy against integer labels
    double loss(const Eigen::MatrixXd& X, const std::vector<int>& y) const;

    // loss plus gradient, flattened to the flat_params layout
    double loss_and_grad(const Eigen::MatrixXd& X, const std::vector<int>& y,
                         Eigen::VectorXd& grad) const;

    long param_count() const;
    Eigen::VectorXd flat_params() const;
    void set_flat_params(const Eigen::VectorXd& p);

    void save(std::ostream& out) const;
    static Mlp load(std::istream& in);

private:
    std::vector<int> dims_;
    std::vector<Eigen::MatrixXd> w_;  // w_[l] is dims[l+1] x dims[l]
    std::vector<Eigen::VectorXd> b_;
};

// Per-dimension affine map, fitted once on the training split and frozen.
// Constant dimensions keep scale 1 so they pass through centered.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;

    static Standardizer fit(const Eigen::MatrixXd& X);
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;

    void save(std::ostream& out) const;
    static Standardizer load(std::istream& in);
};

struct TrainOptions {
    double learning_rate = 1e-3;
    int batch_size = 64;
    int max_epochs = 200;
    int patience = 10;        // epochs without validation improvement
    double val_fraction = 0.1;
    std::uint64_t seed = 0;   // drives the split and the epoch shuffles
};

struct TrainReport {
    int epochs = 0;
    double train_loss = 0;
    double val_loss = 0;
    double val_accuracy = 0;
    long train_count = 0;
    long val_count = 0;
};

// Adam mini-batch training with early stopping on a held-out split; the net
// reverts to the best validation epoch. A dataset too small to hold out a
// split validates on the training rows. Throws ConfigError for an empty or
// single-class dataset, NumericalError when the loss stops being finite.
TrainReport fit(Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y,
                const TrainOptions& opts);

}  // namespace cbm
