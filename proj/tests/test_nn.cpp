#include "wxd/neural_forecaster.hpp"
#include "wxd/nn.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace wxd;
using namespace wxd::nn;

namespace {

// Central-difference check of analytic gradients in eval-like conditions.
double max_gradient_error(Network& net, const Matrix& x, const Matrix& y, Mode mode) {
    net.mse_and_gradient(x, y, mode);
    const auto analytic = net.flat_grads();
    auto theta = net.flat_params();
    double worst = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        net.set_flat_params(theta);
        const double up = mse(net.forward(x, mode), y);
        theta[i] = keep - h;
        net.set_flat_params(theta);
        const double down = mse(net.forward(x, mode), y);
        theta[i] = keep;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(numeric - analytic[i]) / std::max(1.0, std::abs(numeric)));
    }
    net.set_flat_params(theta);
    return worst;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

}  // namespace

TEST_CASE("dense sigmoid gradients match finite differences") {
    auto net = make_mlp({3, 4, 2, 1});
    Rng rng(1);
    net.init_uniform(rng, 0.8);
    const Matrix x = random_matrix(9, 3, 2), y = random_matrix(9, 1, 3);
    CHECK(max_gradient_error(net, x, y, Mode::eval) < 1e-7);
}

TEST_CASE("convolution, pooling and batch norm gradients match finite differences") {
    const ImageShape img{2, 6, 6};
    Network net;
    auto conv = std::make_unique<Conv2D>(img, 3, 3);
    const ImageShape c_out = conv->out_shape();
    net.add(std::move(conv));
    net.add(std::make_unique<Relu>(c_out.size()));
    net.add(std::make_unique<BatchNorm>(c_out.channels, c_out.height * c_out.width));
    auto pool = std::make_unique<MaxPool2D>(c_out, 2);
    const std::size_t flat = pool->output_size();
    net.add(std::move(pool));
    net.add(std::make_unique<Dense>(flat, 4));
    net.add(std::make_unique<BatchNorm>(4, 1));
    net.add(std::make_unique<Dense>(4, 2));
    Rng rng(4);
    net.init_uniform(rng, 0.5);
    const Matrix x = random_matrix(5, img.size(), 5), y = random_matrix(5, 2, 6);
    CHECK(max_gradient_error(net, x, y, Mode::train) < 1e-5);
}

TEST_CASE("xor is learned with rprop") {
    Matrix x(4, 2), y(4, 1);
    x << 0, 0, 0, 1, 1, 0, 1, 1;
    y << 0, 1, 1, 0;
    RpropConfig cfg;
    cfg.max_epochs = 500;
    cfg.seed = 3;
    TrainHistory h;
    const auto net = train_network(make_mlp({2, 4, 1}), x, y, Matrix(), Matrix(), cfg, h);
    Network copy = net;
    const Matrix out = copy.forward(x);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(out(i, 0) - y(i, 0)) < 0.1);
}

TEST_CASE("a sine curve is fitted to small error") {
    const int n = 200;
    Matrix x(n, 1), y(n, 1);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = static_cast<double>(i) / (n - 1);
        y(i, 0) = std::sin(2.0 * std::numbers::pi * x(i, 0));
    }
    RpropConfig cfg;
    cfg.max_epochs = 3000;
    cfg.seed = 7;
    TrainHistory h;
    train_network(make_mlp({1, 10, 1}), x, y, Matrix(), Matrix(), cfg, h);
    CHECK(h.train_mse[h.best_epoch] < 1e-3);
}

TEST_CASE("zero epochs keep the initial weights") {
    Matrix x = random_matrix(10, 2, 1), y = random_matrix(10, 1, 2);
    RpropConfig cfg;
    cfg.max_epochs = 0;
    cfg.seed = 5;
    TrainHistory h;
    const auto trained = train_network(make_mlp({2, 3, 1}), x, y, Matrix(), Matrix(), cfg, h);
    auto init = make_mlp({2, 3, 1});
    Rng rng(5);
    init.init_uniform(rng, 0.5);
    Network copy = trained;
    CHECK(copy.flat_params() == init.flat_params());
    CHECK(h.train_mse.size() == 1);
    CHECK(h.best_epoch == 0);
}

TEST_CASE("training is deterministic for a seed") {
    Matrix x = random_matrix(30, 2, 8), y = random_matrix(30, 1, 9);
    RpropConfig cfg;
    cfg.max_epochs = 50;
    cfg.seed = 11;
    TrainHistory h1, h2;
    Network a = train_network(make_mlp({2, 3, 1}), x, y, Matrix(), Matrix(), cfg, h1);
    Network b = train_network(make_mlp({2, 3, 1}), x, y, Matrix(), Matrix(), cfg, h2);
    CHECK(a.flat_params() == b.flat_params());
    CHECK(h1.train_mse == h2.train_mse);
}

TEST_CASE("rprop step sizes stay within bounds") {
    Matrix x = random_matrix(20, 2, 12), y = random_matrix(20, 1, 13);
    auto net = make_mlp({2, 5, 1});
    Rng rng(1);
    net.init_uniform(rng, 0.5);
    RpropConfig cfg;
    Rprop opt(cfg);
    for (int e = 0; e < 200; ++e) {
        net.mse_and_gradient(x, y);
        opt.step(net);
        const auto [lo, hi] = opt.step_range();
        CHECK(lo >= cfg.delta_min);
        CHECK(hi <= cfg.delta_max);
    }
    RpropConfig bad;
    bad.eta_plus = 0.9;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("network json round trip") {
    auto net = make_mlp({3, 4, 1});
    Rng rng(2);
    net.init_uniform(rng, 0.5);
    Network back = Network::from_json(net.to_json());
    const Matrix x = random_matrix(4, 3, 3);
    CHECK(back.forward(x) == net.forward(x));
}
