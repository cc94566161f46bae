#include "wxd/gamma_estimator.hpp"

#include "wxd/error.hpp"
#include "wxd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace wxd {

std::vector<std::pair<double, double>> uniform_param_grid(std::size_t count, std::uint64_t seed) {
    Rng rng = make_rng(seed, "estimator-grid");
    std::uniform_real_distribution<double> u(kEstimatorParamMin, kEstimatorParamMax);
    std::vector<std::pair<double, double>> grid(count);
    for (auto& [a, b] : grid) {
        a = u(rng);
        b = u(rng);
    }
    return grid;
}

namespace {

std::size_t image_side(std::size_t m) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
    if (side == 0 || side * side != m) throw std::invalid_argument("sample size must be a perfect square");
    return side;
}

}  // namespace

EstimatorDataset generate_estimator_dataset(const std::vector<std::pair<double, double>>& grid, std::size_t m,
                                            std::uint64_t seed) {
    image_side(m);
    EstimatorDataset out;
    out.samples.resize(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(m));
    out.targets.resize(static_cast<Eigen::Index>(grid.size()), 2);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto [a, b] = grid[i];
        if (!(a >= kEstimatorParamMin && a <= kEstimatorParamMax && b >= kEstimatorParamMin &&
              b <= kEstimatorParamMax)) {
            throw std::invalid_argument("estimator grid pair outside [0.01, 5]");
        }
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::gamma_distribution<double> draw(a, 1.0 / b);
        const auto row = static_cast<Eigen::Index>(i);
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(m); ++k) out.samples(row, k) = draw(rng);
        out.targets(row, 0) = a;
        out.targets(row, 1) = b;
    }
    return out;
}

nn::Matrix estimator_input(const nn::Matrix& samples) {
    const Eigen::Index m = samples.cols();
    nn::Matrix x(samples.rows(), 2 * m);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (Eigen::Index k = 0; k < m; ++k) {
            const double v = std::max(samples(i, k), 0.0);
            const double lg = v > 0.0 ? std::log(v) : -60.0;
            x(i, k) = std::clamp(lg, -60.0, 10.0) / 10.0;
            x(i, m + k) = std::log1p(v) / 3.0;
        }
    }
    return x;
}

nn::Network make_estimator_network(std::size_t side, double dropout, std::uint64_t seed) {
    nn::Network net;
    nn::ImageShape shape{2, side, side};
    for (int block = 0; block < 2; ++block) {
        auto conv = std::make_unique<nn::Conv2D>(shape, 32, 3);
        shape = conv->out_shape();
        net.add(std::move(conv));
        net.add(std::make_unique<nn::Relu>(shape.size()));
        net.add(std::make_unique<nn::BatchNorm>(shape.channels, shape.height * shape.width));
        auto pool = std::make_unique<nn::MaxPool2D>(shape, 2);
        shape = pool->out_shape();
        net.add(std::move(pool));
    }
    std::size_t width = shape.size();
    for (int block = 0; block < 2; ++block) {
        net.add(std::make_unique<nn::Dense>(width, 32));
        net.add(std::make_unique<nn::Relu>(32));
        net.add(std::make_unique<nn::BatchNorm>(32, 1));
        net.add(std::make_unique<nn::Dropout>(32, dropout, derive_seed(seed, static_cast<std::uint64_t>(block))));
        width = 32;
    }
    net.add(std::make_unique<nn::Dense>(width, 2));

    // Glorot-uniform weights, zero biases.
    Rng rng = make_rng(seed, "estimator-init");
    for (std::size_t i = 0; i < net.depth(); ++i) {
        nn::Matrix* w = nullptr;
        double fan_in = 0.0, fan_out = 0.0;
        if (auto* d = dynamic_cast<nn::Dense*>(&net.layer(i))) {
            w = &d->weight();
            fan_in = static_cast<double>(w->rows());
            fan_out = static_cast<double>(w->cols());
        } else if (auto* c = dynamic_cast<nn::Conv2D*>(&net.layer(i))) {
            w = &c->weight();
            fan_in = static_cast<double>(w->cols());        // channels · 3 · 3
            fan_out = static_cast<double>(w->rows()) * 9.0;  // filters · 3 · 3
        }
        if (!w) continue;
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (Eigen::Index k = 0; k < w->size(); ++k) w->data()[k] = limit * u(rng);
    }
    return net;
}

nlohmann::json to_json(const EstimatorModel& model) {
    return {{"network", model.net.to_json()},
            {"side", model.side},
            {"input_transform", "log_clip_and_log1p"},
            {"param_range", {kEstimatorParamMin, kEstimatorParamMax}},
            {"train_loss", model.train_loss},
            {"val_loss", model.val_loss},
            {"best_epoch", model.best_epoch}};
}

EstimatorModel estimator_from_json(const nlohmann::json& j) {
    EstimatorModel m;
    m.net = nn::Network::from_json(j.at("network"));
    m.side = j.at("side").get<std::size_t>();
    m.train_loss = j.value("train_loss", std::vector<double>{});
    m.val_loss = j.value("val_loss", std::vector<double>{});
    m.best_epoch = j.value("best_epoch", 0);
    return m;
}

namespace {

nn::Matrix gather_rows(const nn::Matrix& src, const std::vector<std::size_t>& idx, std::size_t begin,
                       std::size_t end) {
    nn::Matrix out(static_cast<Eigen::Index>(end - begin), src.cols());
    for (std::size_t r = begin; r < end; ++r) out.row(static_cast<Eigen::Index>(r - begin)) = src.row(static_cast<Eigen::Index>(idx[r]));
    return out;
}

// Eval-mode loss in chunks to bound memory.
double eval_loss(nn::Network& net, const nn::Matrix& x, const nn::Matrix& y) {
    constexpr Eigen::Index kChunk = 256;
    double total = 0.0;
    for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
        const Eigen::Index len = std::min(kChunk, x.rows() - start);
        const nn::Matrix pred = net.forward(x.middleRows(start, len), nn::Mode::eval);
        total += (pred - y.middleRows(start, len)).squaredNorm();
    }
    return total / static_cast<double>(y.size());
}

}  // namespace

EstimatorModel train_param_estimator(const EstimatorDataset& data, const EstimatorTrainConfig& config) {
    if (data.size() < 500) throw DataError("estimator training needs at least 500 examples");
    if (config.epochs < 0 || config.batch_size == 0) throw std::invalid_argument("invalid training configuration");
    if (!(config.val_fraction > 0.0 && config.val_fraction < 1.0)) {
        throw std::invalid_argument("val_fraction must lie in (0, 1)");
    }

    const std::size_t n = data.size();
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * config.val_fraction));
    const std::size_t n_train = n - n_val;

    const nn::Matrix x_all = estimator_input(data.samples);
    const nn::Matrix x_train = x_all.topRows(static_cast<Eigen::Index>(n_train));
    const nn::Matrix y_train = data.targets.topRows(static_cast<Eigen::Index>(n_train));
    const nn::Matrix x_val = x_all.bottomRows(static_cast<Eigen::Index>(n_val));
    const nn::Matrix y_val = data.targets.bottomRows(static_cast<Eigen::Index>(n_val));

    EstimatorModel model;
    model.side = image_side(static_cast<std::size_t>(data.samples.cols()));
    model.net = make_estimator_network(model.side, config.dropout, config.seed);

    model.train_loss.push_back(eval_loss(model.net, x_train, y_train));
    model.val_loss.push_back(eval_loss(model.net, x_val, y_val));
    nn::Network best = model.net;
    double best_val = model.val_loss.back();

    nn::Adam adam(nn::AdamConfig{});
    Rng shuffle = make_rng(config.seed, "estimator-shuffle");
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batches = (n_train + config.batch_size - 1) / config.batch_size;
    const double total_steps = static_cast<double>(batches) * config.epochs;
    const double warmup = 0.1 * total_steps;
    double step = 0.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle);
        double sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * config.batch_size;
            const std::size_t end = std::min(n_train, begin + config.batch_size);
            if (end - begin < 2) continue;  // batch statistics need two samples
            const nn::Matrix xb = gather_rows(x_train, order, begin, end);
            const nn::Matrix yb = gather_rows(y_train, order, begin, end);
            const double loss = model.net.mse_and_gradient(xb, yb, nn::Mode::train);
            if (!std::isfinite(loss)) throw NumericalError("estimator training diverged at epoch " + std::to_string(epoch));
            sum += loss * static_cast<double>(end - begin);
            const double lr = step < warmup
                                  ? config.learning_rate * (step + 1.0) / warmup
                                  : 0.5 * config.learning_rate *
                                        (1.0 + std::cos(std::numbers::pi * (step - warmup) / (total_steps - warmup)));
            adam.step(model.net, lr);
            step += 1.0;
        }
        model.train_loss.push_back(sum / static_cast<double>(n_train));
        model.val_loss.push_back(eval_loss(model.net, x_val, y_val));
        if (!std::isfinite(model.val_loss.back())) throw NumericalError("estimator validation loss is not finite");
        if (model.val_loss.back() < best_val) {
            best_val = model.val_loss.back();
            best = model.net;
            model.best_epoch = epoch;
        }
    }
    model.net = std::move(best);
    return model;
}

nn::Matrix predict_params(EstimatorModel& model, const nn::Matrix& samples) {
    constexpr Eigen::Index kChunk = 256;
    const nn::Matrix x = estimator_input(samples);
    nn::Matrix out(x.rows(), 2);
    for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
        const Eigen::Index len = std::min(kChunk, x.rows() - start);
        out.middleRows(start, len) = model.net.forward(x.middleRows(start, len), nn::Mode::eval);
    }
    return out;
}

EstimatorError evaluate_estimator(EstimatorModel& model, const EstimatorDataset& data) {
    if (data.size() == 0) throw DataError("empty evaluation set");
    const nn::Matrix pred = predict_params(model, data.samples);
    EstimatorError e;
    e.mae_alpha = (pred.col(0) - data.targets.col(0)).cwiseAbs().mean();
    e.mae_beta = (pred.col(1) - data.targets.col(1)).cwiseAbs().mean();
    return e;
}

GammaFit estimate_params_nn(EstimatorModel& model, const std::vector<double>& samples, std::uint64_t seed,
                            std::size_t replicates) {
    if (samples.empty()) throw DataError("no samples for the neural estimator");
    if (replicates < 2) throw std::invalid_argument("need at least two bootstrap replicates");
    const std::size_t m = model.side * model.side;
    GammaFit fit;
    fit.method = EstimationMethod::neural;
    fit.n_obs = samples.size();

    Rng rng = make_rng(seed, "estimator-bootstrap");
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    nn::Matrix image(1, static_cast<Eigen::Index>(m));
    if (samples.size() >= m) {
        for (std::size_t k = 0; k < m; ++k) image(0, static_cast<Eigen::Index>(k)) = samples[k];
    } else {
        fit.flags.push_back("resampled");
        for (std::size_t k = 0; k < m; ++k) image(0, static_cast<Eigen::Index>(k)) = samples[pick(rng)];
    }

    // Support check: the training images have positive draws and means in [0.01/5, 5/0.01].
    const double mean = image.mean();
    const bool any_nonpositive = (image.array() <= 0.0).any();
    if (any_nonpositive || !(mean >= kEstimatorParamMin / kEstimatorParamMax && mean <= kEstimatorParamMax / kEstimatorParamMin)) {
        fit.flags.push_back("out_of_distribution");
    }

    const nn::Matrix point = predict_params(model, image);
    fit.alpha = point(0, 0);
    fit.beta = point(0, 1);

    nn::Matrix boot(static_cast<Eigen::Index>(replicates), static_cast<Eigen::Index>(m));
    for (Eigen::Index r = 0; r < boot.rows(); ++r) {
        for (Eigen::Index k = 0; k < boot.cols(); ++k) boot(r, k) = samples[pick(rng)];
    }
    const nn::Matrix est = predict_params(model, boot);
    const auto sd = [](const Eigen::VectorXd& v) {
        return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
    };
    fit.se_alpha = sd(est.col(0));
    fit.se_beta = sd(est.col(1));
    fit.ci_alpha = {fit.alpha - 1.96 * fit.se_alpha, fit.alpha + 1.96 * fit.se_alpha};
    fit.ci_beta = {fit.beta - 1.96 * fit.se_beta, fit.beta + 1.96 * fit.se_beta};
    if (!(fit.alpha > 0.0 && fit.beta > 0.0)) fit.flags.push_back("non_positive_estimate");
    return fit;
}

}  // namespace wxd
