#include "cbm/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "cbm/errors.hpp"

namespace cbm {

namespace {

constexpr char kMagic[8] = {'C', 'B', 'M', 'M', 'L', 'P', '1', '\0'};

void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ConfigError("truncated network data");
    return v;
}

void write_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ConfigError("truncated network data");
}

// softmax cross-entropy over logit rows; optionally emits dLoss/dLogits
double softmax_ce(const Eigen::MatrixXd& logits, const std::vector<int>& y,
                  Eigen::MatrixXd* dlogits) {
    const Eigen::Index n = logits.rows();
    double total = 0.0;
    if (dlogits) dlogits->resize(n, logits.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd row = logits.row(i);
        const double top = row.maxCoeff();
        Eigen::RowVectorXd e = (row.array() - top).exp();
        const double z = e.sum();
        const int label = y[static_cast<std::size_t>(i)];
        total += std::log(z) - (row(label) - top);
        if (dlogits) {
            Eigen::RowVectorXd p = e / z;
            p(label) -= 1.0;
            dlogits->row(i) = p / static_cast<double>(n);
        }
    }
    return total / static_cast<double>(n);
}

}  // namespace

Mlp::Mlp(std::vector<int> dims, Rng& rng) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw ConfigError("network needs at least input and output layers");
    for (int d : dims_)
        if (d < 1) throw ConfigError("network layer widths must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        const int fan_in = dims_[l];
        const int fan_out = dims_[l + 1];
        Eigen::MatrixXd w(fan_out, fan_in);
        const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * normal(rng.engine());
        w_.push_back(std::move(w));
        b_.push_back(Eigen::VectorXd::Zero(fan_out));
    }
}

Eigen::MatrixXd Mlp::logits(const Eigen::MatrixXd& X) const {
    if (w_.empty()) throw ConfigError("network is empty");
    if (X.cols() != inputs()) throw ConfigError("feature dimension does not match the network");
    Eigen::MatrixXd h = X;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        h = (h * w_[l].transpose()).rowwise() + b_[l].transpose();
        if (l + 1 < w_.size()) h = h.cwiseMax(0.0);
    }
    return h;
}

Eigen::VectorXd Mlp::logits(const Eigen::VectorXd& x) const {
    return logits(Eigen::MatrixXd(x.transpose())).row(0);
}

double Mlp::loss(const Eigen::MatrixXd& X, const std::vector<int>& y) const {
    if (static_cast<std::size_t>(X.rows()) != y.size())
        throw ConfigError("features and labels disagree on the sample count");
    return softmax_ce(logits(X), y, nullptr);
}

double Mlp::loss_and_grad(const Eigen::MatrixXd& X, const std::vector<int>& y,
                          Eigen::VectorXd& grad) const {
    if (static_cast<std::size_t>(X.rows()) != y.size())
        throw ConfigError("features and labels disagree on the sample count");
    const std::size_t layers = w_.size();
    std::vector<Eigen::MatrixXd> acts(layers + 1);  // acts[0] = X, post-ReLU elsewhere
    acts[0] = X;
    for (std::size_t l = 0; l < layers; ++l) {
        acts[l + 1] = (acts[l] * w_[l].transpose()).rowwise() + b_[l].transpose();
        if (l + 1 < layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
    }
    Eigen::MatrixXd g;
    const double loss = softmax_ce(acts[layers], y, &g);

    grad.resize(param_count());
    Eigen::Index off = static_cast<Eigen::Index>(grad.size());
    for (std::size_t l = layers; l-- > 0;) {
        Eigen::MatrixXd dw = g.transpose() * acts[l];
        Eigen::VectorXd db = g.colwise().sum();
        off -= static_cast<Eigen::Index>(b_[l].size());
        grad.segment(off, b_[l].size()) = db;
        off -= static_cast<Eigen::Index>(w_[l].size());
        Eigen::Map<Eigen::MatrixXd>(grad.data() + off, w_[l].rows(), w_[l].cols()) = dw;
        if (l > 0) {
            g = g * w_[l];
            g = (acts[l].array() > 0.0).cast<double>() * g.array();
        }
    }
    return loss;
}

long Mlp::param_count() const {
    long n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l)
        n += static_cast<long>(w_[l].size() + b_[l].size());
    return n;
}

Eigen::VectorXd Mlp::flat_params() const {
    Eigen::VectorXd p(param_count());
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        Eigen::Map<Eigen::MatrixXd>(p.data() + off, w_[l].rows(), w_[l].cols()) = w_[l];
        off += static_cast<Eigen::Index>(w_[l].size());
        p.segment(off, b_[l].size()) = b_[l];
        off += static_cast<Eigen::Index>(b_[l].size());
    }
    return p;
}

void Mlp::set_flat_params(const Eigen::VectorXd& p) {
    if (p.size() != param_count()) throw ConfigError("parameter vector has the wrong length");
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < w_.size(); ++l) {
        w_[l] = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, w_[l].rows(), w_[l].cols());
        off += static_cast<Eigen::Index>(w_[l].size());
        b_[l] = p.segment(off, b_[l].size());
        off += static_cast<Eigen::Index>(b_[l].size());
    }
}

void Mlp::save(std::ostream& out) const {
    out.write(kMagic, sizeof(kMagic));
    write_i64(out, static_cast<std::int64_t>(dims_.size()));
    for (int d : dims_) write_i64(out, d);
    for (std::size_t l = 0; l < w_.size(); ++l) {
        write_doubles(out, w_[l].data(), static_cast<std::size_t>(w_[l].size()));
        write_doubles(out, b_[l].data(), static_cast<std::size_t>(b_[l].size()));
    }
}

Mlp Mlp::load(std::istream& in) {
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError("not a network file");
    const std::int64_t nd = read_i64(in);
    if (nd < 2 || nd > 64) throw ConfigError("network file header is implausible");
    Mlp net;
    net.dims_.resize(static_cast<std::size_t>(nd));
    for (auto& d : net.dims_) {
        const std::int64_t v = read_i64(in);
        if (v < 1 || v > (1 << 20)) throw ConfigError("network file header is implausible");
        d = static_cast<int>(v);
    }
    for (std::size_t l = 0; l + 1 < net.dims_.size(); ++l) {
        Eigen::MatrixXd w(net.dims_[l + 1], net.dims_[l]);
        Eigen::VectorXd b(net.dims_[l + 1]);
        read_doubles(in, w.data(), static_cast<std::size_t>(w.size()));
        read_doubles(in, b.data(), static_cast<std::size_t>(b.size()));
        net.w_.push_back(std::move(w));
        net.b_.push_back(std::move(b));
    }
    return net;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
    if (X.rows() == 0) throw ConfigError("cannot standardize an empty dataset");
    Standardizer s;
    s.mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
    s.sd = (centered.array().square().colwise().sum() / static_cast<double>(X.rows()))
               .sqrt()
               .transpose();
    for (Eigen::Index i = 0; i < s.sd.size(); ++i)
        if (!(s.sd(i) > 1e-12)) s.sd(i) = 1.0;
    return s;
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) throw ConfigError("feature dimension does not match the model");
    return (x - mean).cwiseQuotient(sd);
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
    if (X.cols() != mean.size()) throw ConfigError("feature dimension does not match the model");
    return (X.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
}

void Standardizer::save(std::ostream& out) const {
    write_i64(out, static_cast<std::int64_t>(mean.size()));
    write_doubles(out, mean.data(), static_cast<std::size_t>(mean.size()));
    write_doubles(out, sd.data(), static_cast<std::size_t>(sd.size()));
}

Standardizer Standardizer::load(std::istream& in) {
    const std::int64_t n = read_i64(in);
    if (n < 1 || n > (1 << 20)) throw ConfigError("standardizer header is implausible");
    Standardizer s;
    s.mean.resize(n);
    s.sd.resize(n);
    read_doubles(in, s.mean.data(), static_cast<std::size_t>(n));
    read_doubles(in, s.sd.data(), static_cast<std::size_t>(n));
    return s;
}

TrainReport fit(Mlp& net, const Eigen::MatrixXd& X, const std::vector<int>& y,
                const TrainOptions& opts) {
    const long n = static_cast<long>(X.rows());
    if (n == 0) throw ConfigError("training set is empty");
    if (static_cast<std::size_t>(n) != y.size())
        throw ConfigError("features and labels disagree on the sample count");
    if (opts.batch_size < 1 || opts.max_epochs < 1 || opts.patience < 1 ||
        !(opts.learning_rate > 0.0) || !(opts.val_fraction >= 0.0) || !(opts.val_fraction < 1.0))
        throw ConfigError("bad training options");
    for (int label : y)
        if (label < 0 || label >= net.outputs()) throw ConfigError("label outside the output range");
    const int first = y.front();
    bool mixed = false;
    for (int label : y)
        if (label != first) {
            mixed = true;
            break;
        }
    if (!mixed) throw ConfigError("training set needs both classes");

    Rng rng(opts.seed, "nnet.train", 0);
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0L);
    for (long i = n - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(0, i))]);

    const long val_n = static_cast<long>(static_cast<double>(n) * opts.val_fraction);
    const long train_n = n - val_n;
    auto gather = [&](long begin, long count) {
        std::pair<Eigen::MatrixXd, std::vector<int>> out;
        out.first.resize(count, X.cols());
        out.second.resize(static_cast<std::size_t>(count));
        for (long i = 0; i < count; ++i) {
            const long src = order[static_cast<std::size_t>(begin + i)];
            out.first.row(i) = X.row(src);
            out.second[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(src)];
        }
        return out;
    };
    auto [train_x, train_y] = gather(0, train_n);
    auto [val_x, val_y] = val_n > 0 ? gather(train_n, val_n)
                                    : std::make_pair(train_x, train_y);

    Eigen::VectorXd params = net.flat_params();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd grad;
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long step = 0;

    TrainReport report;
    report.train_count = train_n;
    report.val_count = val_n > 0 ? val_n : train_n;
    Eigen::VectorXd best_params = params;
    double best_val = 0.0;
    bool have_best = false;
    int stale = 0;

    std::vector<long> idx(static_cast<std::size_t>(train_n));
    std::iota(idx.begin(), idx.end(), 0L);
    for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
        for (long i = train_n - 1; i > 0; --i)
            std::swap(idx[static_cast<std::size_t>(i)],
                      idx[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        double epoch_loss = 0.0;
        long batches = 0;
        for (long begin = 0; begin < train_n; begin += opts.batch_size) {
            const long count = std::min<long>(opts.batch_size, train_n - begin);
            Eigen::MatrixXd bx(count, X.cols());
            std::vector<int> by(static_cast<std::size_t>(count));
            for (long i = 0; i < count; ++i) {
                const long src = idx[static_cast<std::size_t>(begin + i)];
                bx.row(i) = train_x.row(src);
                by[static_cast<std::size_t>(i)] = train_y[static_cast<std::size_t>(src)];
            }
            const double batch_loss = net.loss_and_grad(bx, by, grad);
            if (!std::isfinite(batch_loss)) throw NumericalError("training loss diverged");
            ++step;
            m = beta1 * m + (1.0 - beta1) * grad;
            v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
            const double mc = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double vc = 1.0 - std::pow(beta2, static_cast<double>(step));
            params -= (opts.learning_rate / mc) *
                      m.cwiseQuotient(((v / vc).cwiseSqrt().array() + adam_eps).matrix());
            net.set_flat_params(params);
            epoch_loss += batch_loss;
            ++batches;
        }
        report.train_loss = epoch_loss / static_cast<double>(std::max(1L, batches));
        report.epochs = epoch + 1;

        const double val_loss = net.loss(val_x, val_y);
        if (!std::isfinite(val_loss)) throw NumericalError("training loss diverged");
        if (!have_best || val_loss < best_val - 1e-8 * (1.0 + std::abs(best_val))) {
            best_val = val_loss;
            best_params = params;
            have_best = true;
            stale = 0;
        } else if (++stale >= opts.patience) {
            break;
        }
    }
    net.set_flat_params(best_params);
    report.val_loss = best_val;

    Eigen::MatrixXd val_logits = net.logits(val_x);
    long correct = 0;
    for (Eigen::Index i = 0; i < val_logits.rows(); ++i) {
        Eigen::Index arg = 0;
        val_logits.row(i).maxCoeff(&arg);
        if (static_cast<int>(arg) == val_y[static_cast<std::size_t>(i)]) ++correct;
    }
    report.val_accuracy = static_cast<double>(correct) / static_cast<double>(val_logits.rows());
    return report;
}

}  // namespace cbm
