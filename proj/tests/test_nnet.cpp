#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/nnet.hpp"

using namespace cbm;

namespace {

// labeled blobs separated by the line x0 + x1 = 0
void make_blobs(long n, std::uint64_t seed, Eigen::MatrixXd& X, std::vector<int>& y) {
    Rng rng(seed);
    X.resize(n, 2);
    y.resize(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const double a = 2.0 * rng.uniform() - 1.0;
        const double b = 2.0 * rng.uniform() - 1.0;
        X(i, 0) = a;
        X(i, 1) = b;
        y[static_cast<std::size_t>(i)] = (a + b > 0.0) ? 1 : 0;
    }
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(41);
    Mlp net({7, 16, 8, 2}, rng);
    const long n = 10;
    Eigen::MatrixXd X(n, 7);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < 7; ++j) X(i, j) = 3.0 * (rng.uniform() - 0.5);
        y[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 1));
    }

    Eigen::VectorXd grad;
    const double base = net.loss_and_grad(X, y, grad);
    CHECK(std::isfinite(base));
    REQUIRE(grad.size() == net.param_count());

    Eigen::VectorXd params = net.flat_params();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(params(i)));
        Eigen::VectorXd p = params;
        p(i) = params(i) + h;
        net.set_flat_params(p);
        const double up = net.loss(X, y);
        p(i) = params(i) - h;
        net.set_flat_params(p);
        const double down = net.loss(X, y);
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(fd - grad(i)) / std::max(1.0, std::abs(grad(i))));
    }
    net.set_flat_params(params);
    CHECK(worst < 1e-5);
}

TEST_CASE("separable classes reach high validation accuracy") {
    Eigen::MatrixXd X;
    std::vector<int> y;
    make_blobs(2000, 7, X, y);
    Rng rng(11);
    Mlp net({2, 16, 16, 2}, rng);
    TrainOptions opts;
    opts.seed = 3;
    opts.max_epochs = 60;
    TrainReport report = fit(net, X, y, opts);

    CHECK(report.val_accuracy >= 0.99);
    CHECK(report.val_count == 200);
    CHECK(report.train_count == 1800);
    CHECK(report.epochs >= 1);
    CHECK(report.epochs <= 60);
    CHECK(std::isfinite(report.val_loss));
}

TEST_CASE("shuffled labels learn nothing beyond the class prior") {
    Eigen::MatrixXd X;
    std::vector<int> y;
    make_blobs(2000, 7, X, y);
    Rng rng(13);
    for (std::size_t i = y.size(); i-- > 1;)
        std::swap(y[i], y[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i)))]);
    // decouple labels from features entirely
    for (auto& label : y) label = static_cast<int>(rng.uniform_int(0, 1));

    Rng init(17);
    Mlp net({2, 16, 16, 2}, init);
    TrainOptions opts;
    opts.seed = 5;
    opts.max_epochs = 40;
    TrainReport report = fit(net, X, y, opts);
    CHECK(report.val_accuracy < 0.65);
}

TEST_CASE("degenerate training inputs are rejected") {
    Eigen::MatrixXd X(4, 2);
    X.setZero();
    Rng rng(19);
    Mlp net({2, 4, 2}, rng);

    std::vector<int> ones{1, 1, 1, 1};
    CHECK_THROWS_AS(fit(net, X, ones, TrainOptions{}), ConfigError);

    std::vector<int> empty_y;
    Eigen::MatrixXd empty_x(0, 2);
    CHECK_THROWS_AS(fit(net, empty_x, empty_y, TrainOptions{}), ConfigError);

    std::vector<int> short_y{0, 1};
    CHECK_THROWS_AS(fit(net, X, short_y, TrainOptions{}), ConfigError);

    std::vector<int> bad_label{0, 1, 2, 0};
    CHECK_THROWS_AS(fit(net, X, bad_label, TrainOptions{}), ConfigError);
}

TEST_CASE("non-finite loss surfaces as a numerical error") {
    Eigen::MatrixXd X;
    std::vector<int> y;
    make_blobs(128, 23, X, y);
    X(0, 0) = std::numeric_limits<double>::quiet_NaN();
    Rng rng(29);
    Mlp net({2, 8, 2}, rng);
    TrainOptions opts;
    opts.seed = 1;
    opts.val_fraction = 0.0;
    CHECK_THROWS_AS(fit(net, X, y, opts), NumericalError);
}

TEST_CASE("network and standardizer survive the stream round trip") {
    Rng rng(31);
    Mlp net({5, 12, 6, 2}, rng);
    Eigen::MatrixXd X(8, 5);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform() - 0.5;

    std::stringstream buf;
    net.save(buf);
    Mlp back = Mlp::load(buf);
    CHECK(back.dims() == net.dims());
    CHECK((back.flat_params() - net.flat_params()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.logits(X) - net.logits(X)).cwiseAbs().maxCoeff() == 0.0);

    // single-row and batch paths agree
    Eigen::VectorXd row = X.row(3);
    CHECK((net.logits(row).transpose() - net.logits(X).row(3)).cwiseAbs().maxCoeff() == 0.0);

    X.col(2).setConstant(4.0);
    Standardizer st = Standardizer::fit(X);
    CHECK(st.sd(2) == 1.0);
    CHECK(st.mean(2) == doctest::Approx(4.0));
    Eigen::MatrixXd Z = st.apply(X);
    CHECK(Z.col(2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(std::abs(Z.col(0).mean()) < 1e-12);

    std::stringstream sbuf;
    st.save(sbuf);
    Standardizer st2 = Standardizer::load(sbuf);
    CHECK((st2.mean - st.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((st2.sd - st.sd).cwiseAbs().maxCoeff() == 0.0);

    std::stringstream junk("definitely not a network");
    CHECK_THROWS_AS(Mlp::load(junk), ConfigError);

    std::string blob = buf.str();
    std::stringstream clipped(blob.substr(0, 48));
    CHECK_THROWS_AS(Mlp::load(clipped), ConfigError);
}

TEST_CASE("training is reproducible for a fixed seed") {
    Eigen::MatrixXd X;
    std::vector<int> y;
    make_blobs(600, 37, X, y);
    TrainOptions opts;
    opts.seed = 9;
    opts.max_epochs = 15;

    Rng r1(43);
    Mlp a({2, 8, 8, 2}, r1);
    Rng r2(43);
    Mlp b({2, 8, 8, 2}, r2);
    CHECK((a.flat_params() - b.flat_params()).cwiseAbs().maxCoeff() == 0.0);

    TrainReport ra = fit(a, X, y, opts);
    TrainReport rb = fit(b, X, y, opts);
    CHECK(ra.epochs == rb.epochs);
    CHECK(ra.val_loss == rb.val_loss);
    CHECK((a.flat_params() - b.flat_params()).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE
