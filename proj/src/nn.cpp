#include "wxd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wxd::nn {

// ---------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out)
    : weight_(Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out))),
      weight_grad_(Matrix::Zero(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out))),
      bias_(Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(out))),
      bias_grad_(Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(out))) {}

Matrix Dense::forward(const Matrix& x, Mode) {
    input_ = x;
    Matrix y = x * weight_;
    y.rowwise() += bias_;
    return y;
}

Matrix Dense::backward(const Matrix& g) {
    weight_grad_.noalias() = input_.transpose() * g;
    bias_grad_ = g.colwise().sum();
    return g * weight_.transpose();
}

std::vector<ParamBlock> Dense::params() {
    return {{weight_.data(), weight_grad_.data(), static_cast<std::size_t>(weight_.size())},
            {bias_.data(), bias_grad_.data(), static_cast<std::size_t>(bias_.size())}};
}

nlohmann::json Dense::to_json() const {
    return {{"type", "dense"},
            {"in", weight_.rows()},
            {"out", weight_.cols()},
            {"weight", std::vector<double>(weight_.data(), weight_.data() + weight_.size())},
            {"bias", std::vector<double>(bias_.data(), bias_.data() + bias_.size())}};
}

// ---------------------------------------------------------------- activations

Matrix Sigmoid::forward(const Matrix& x, Mode) {
    output_ = (1.0 + (-x.array()).exp()).inverse().matrix();
    return output_;
}

Matrix Sigmoid::backward(const Matrix& g) {
    return (g.array() * output_.array() * (1.0 - output_.array())).matrix();
}

Matrix Relu::forward(const Matrix& x, Mode) {
    input_ = x;
    return x.cwiseMax(0.0);
}

Matrix Relu::backward(const Matrix& g) {
    return (input_.array() > 0.0).select(g, 0.0);
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(ImageShape in, std::size_t filters, std::size_t kernel)
    : in_(in), filters_(filters), kernel_(kernel) {
    if (kernel > in.height || kernel > in.width) throw std::invalid_argument("kernel larger than input");
    const auto cols = static_cast<Eigen::Index>(in.channels * kernel * kernel);
    weight_ = Matrix::Zero(static_cast<Eigen::Index>(filters), cols);
    weight_grad_ = weight_;
    bias_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(filters));
    bias_grad_ = bias_;
}

ImageShape Conv2D::out_shape() const {
    return {filters_, in_.height - kernel_ + 1, in_.width - kernel_ + 1};
}

// Column matrix of shape (C·k·k) × (B·OH·OW).
Matrix Conv2D::im2col(const Matrix& x) const {
    const ImageShape out = out_shape();
    const auto batch = static_cast<std::size_t>(x.rows());
    const std::size_t spatial = out.height * out.width;
    Matrix cols(static_cast<Eigen::Index>(in_.channels * kernel_ * kernel_),
                static_cast<Eigen::Index>(batch * spatial));
    for (std::size_t b = 0; b < batch; ++b) {
        const double* img = x.row(static_cast<Eigen::Index>(b)).data();
        for (std::size_t c = 0; c < in_.channels; ++c) {
            for (std::size_t ky = 0; ky < kernel_; ++ky) {
                for (std::size_t kx = 0; kx < kernel_; ++kx) {
                    const auto row = static_cast<Eigen::Index>((c * kernel_ + ky) * kernel_ + kx);
                    double* dst = cols.row(row).data() + b * spatial;
                    for (std::size_t oy = 0; oy < out.height; ++oy) {
                        const double* src = img + (c * in_.height + oy + ky) * in_.width + kx;
                        std::copy(src, src + out.width, dst + oy * out.width);
                    }
                }
            }
        }
    }
    return cols;
}

Matrix Conv2D::forward(const Matrix& x, Mode) {
    input_ = x;
    const ImageShape out = out_shape();
    const std::size_t spatial = out.height * out.width;
    const Matrix cols = im2col(x);
    Matrix z = weight_ * cols;  // filters × (B·spatial)
    z.colwise() += bias_;
    Matrix y(x.rows(), static_cast<Eigen::Index>(out.size()));
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
        for (std::size_t f = 0; f < filters_; ++f) {
            const double* src = z.row(static_cast<Eigen::Index>(f)).data() + static_cast<std::size_t>(b) * spatial;
            std::copy(src, src + spatial, y.row(b).data() + f * spatial);
        }
    }
    return y;
}

Matrix Conv2D::backward(const Matrix& g) {
    const ImageShape out = out_shape();
    const std::size_t spatial = out.height * out.width;
    const auto batch = static_cast<std::size_t>(g.rows());
    Matrix gz(static_cast<Eigen::Index>(filters_), static_cast<Eigen::Index>(batch * spatial));
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t f = 0; f < filters_; ++f) {
            const double* src = g.row(static_cast<Eigen::Index>(b)).data() + f * spatial;
            std::copy(src, src + spatial, gz.row(static_cast<Eigen::Index>(f)).data() + b * spatial);
        }
    }
    const Matrix cols = im2col(input_);
    weight_grad_.noalias() = gz * cols.transpose();
    bias_grad_ = gz.rowwise().sum();
    const Matrix gcols = weight_.transpose() * gz;

    Matrix gx = Matrix::Zero(g.rows(), static_cast<Eigen::Index>(in_.size()));
    for (std::size_t b = 0; b < batch; ++b) {
        double* img = gx.row(static_cast<Eigen::Index>(b)).data();
        for (std::size_t c = 0; c < in_.channels; ++c) {
            for (std::size_t ky = 0; ky < kernel_; ++ky) {
                for (std::size_t kx = 0; kx < kernel_; ++kx) {
                    const auto row = static_cast<Eigen::Index>((c * kernel_ + ky) * kernel_ + kx);
                    const double* src = gcols.row(row).data() + b * spatial;
                    for (std::size_t oy = 0; oy < out.height; ++oy) {
                        double* dst = img + (c * in_.height + oy + ky) * in_.width + kx;
                        for (std::size_t ox = 0; ox < out.width; ++ox) dst[ox] += src[oy * out.width + ox];
                    }
                }
            }
        }
    }
    return gx;
}

std::vector<ParamBlock> Conv2D::params() {
    return {{weight_.data(), weight_grad_.data(), static_cast<std::size_t>(weight_.size())},
            {bias_.data(), bias_grad_.data(), static_cast<std::size_t>(bias_.size())}};
}

nlohmann::json Conv2D::to_json() const {
    return {{"type", "conv2d"},
            {"channels", in_.channels},
            {"height", in_.height},
            {"width", in_.width},
            {"filters", filters_},
            {"kernel", kernel_},
            {"weight", std::vector<double>(weight_.data(), weight_.data() + weight_.size())},
            {"bias", std::vector<double>(bias_.data(), bias_.data() + bias_.size())}};
}

// ---------------------------------------------------------------- MaxPool2D

MaxPool2D::MaxPool2D(ImageShape in, std::size_t pool) : in_(in), pool_(pool) {
    if (pool == 0 || pool > in.height || pool > in.width) throw std::invalid_argument("bad pool size");
}

ImageShape MaxPool2D::out_shape() const { return {in_.channels, in_.height / pool_, in_.width / pool_}; }

Matrix MaxPool2D::forward(const Matrix& x, Mode) {
    const ImageShape out = out_shape();
    batch_ = static_cast<std::size_t>(x.rows());
    Matrix y(x.rows(), static_cast<Eigen::Index>(out.size()));
    argmax_.assign(batch_ * out.size(), 0);
    for (std::size_t b = 0; b < batch_; ++b) {
        const double* img = x.row(static_cast<Eigen::Index>(b)).data();
        double* dst = y.row(static_cast<Eigen::Index>(b)).data();
        for (std::size_t c = 0; c < out.channels; ++c) {
            for (std::size_t oy = 0; oy < out.height; ++oy) {
                for (std::size_t ox = 0; ox < out.width; ++ox) {
                    std::size_t best = (c * in_.height + oy * pool_) * in_.width + ox * pool_;
                    for (std::size_t py = 0; py < pool_; ++py) {
                        for (std::size_t px = 0; px < pool_; ++px) {
                            const std::size_t idx = (c * in_.height + oy * pool_ + py) * in_.width + ox * pool_ + px;
                            if (img[idx] > img[best]) best = idx;
                        }
                    }
                    const std::size_t o = (c * out.height + oy) * out.width + ox;
                    dst[o] = img[best];
                    argmax_[b * out.size() + o] = best;
                }
            }
        }
    }
    return y;
}

Matrix MaxPool2D::backward(const Matrix& g) {
    const std::size_t out_size = out_shape().size();
    Matrix gx = Matrix::Zero(g.rows(), static_cast<Eigen::Index>(in_.size()));
    for (std::size_t b = 0; b < batch_; ++b) {
        const double* src = g.row(static_cast<Eigen::Index>(b)).data();
        double* dst = gx.row(static_cast<Eigen::Index>(b)).data();
        for (std::size_t o = 0; o < out_size; ++o) dst[argmax_[b * out_size + o]] += src[o];
    }
    return gx;
}

nlohmann::json MaxPool2D::to_json() const {
    return {{"type", "maxpool2d"}, {"channels", in_.channels}, {"height", in_.height}, {"width", in_.width},
            {"pool", pool_}};
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, std::size_t spatial, double momentum, double epsilon)
    : channels_(channels),
      spatial_(spatial),
      momentum_(momentum),
      epsilon_(epsilon),
      gamma_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(channels))),
      beta_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels))),
      gamma_grad_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels))),
      beta_grad_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels))),
      running_mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels))),
      running_var_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(channels))) {}

Matrix BatchNorm::forward(const Matrix& x, Mode mode) {
    const auto batch = static_cast<std::size_t>(x.rows());
    Matrix y(x.rows(), x.cols());
    if (mode == Mode::eval) {
        for (std::size_t c = 0; c < channels_; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const double scale = gamma_(ci) / std::sqrt(running_var_(ci) + epsilon_);
            const double shift = beta_(ci) - running_mean_(ci) * scale;
            y.middleCols(ci * static_cast<Eigen::Index>(spatial_), static_cast<Eigen::Index>(spatial_)) =
                (x.middleCols(ci * static_cast<Eigen::Index>(spatial_), static_cast<Eigen::Index>(spatial_)).array() *
                     scale + shift).matrix();
        }
        return y;
    }
    x_hat_.resize(x.rows(), x.cols());
    inv_std_.resize(static_cast<Eigen::Index>(channels_));
    const double count = static_cast<double>(batch * spatial_);
    for (std::size_t c = 0; c < channels_; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const auto block = x.middleCols(ci * static_cast<Eigen::Index>(spatial_), static_cast<Eigen::Index>(spatial_));
        const double mean = block.sum() / count;
        const double var = (block.array() - mean).square().sum() / count;
        const double inv = 1.0 / std::sqrt(var + epsilon_);
        inv_std_(ci) = inv;
        auto xh = x_hat_.middleCols(ci * static_cast<Eigen::Index>(spatial_), static_cast<Eigen::Index>(spatial_));
        xh = ((block.array() - mean) * inv).matrix();
        y.middleCols(ci * static_cast<Eigen::Index>(spatial_), static_cast<Eigen::Index>(spatial_)) =
            (xh.array() * gamma_(ci) + beta_(ci)).matrix();
        running_mean_(ci) = momentum_ * running_mean_(ci) + (1.0 - momentum_) * mean;
        running_var_(ci) = momentum_ * running_var_(ci) + (1.0 - momentum_) * var;
    }
    return y;
}

Matrix BatchNorm::backward(const Matrix& g) {
    Matrix gx(g.rows(), g.cols());
    const double count = static_cast<double>(static_cast<std::size_t>(g.rows()) * spatial_);
    for (std::size_t c = 0; c < channels_; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        const auto off = ci * static_cast<Eigen::Index>(spatial_);
        const auto n = static_cast<Eigen::Index>(spatial_);
        const auto gb = g.middleCols(off, n);
        const auto xh = x_hat_.middleCols(off, n);
        const double sum_g = gb.sum();
        const double sum_gx = (gb.array() * xh.array()).sum();
        gamma_grad_(ci) = sum_gx;
        beta_grad_(ci) = sum_g;
        gx.middleCols(off, n) =
            ((gb.array() - sum_g / count - xh.array() * (sum_gx / count)) * (gamma_(ci) * inv_std_(ci))).matrix();
    }
    return gx;
}

void BatchNorm::set_running(const std::vector<double>& mean, const std::vector<double>& var) {
    if (mean.size() != channels_ || var.size() != channels_) throw std::invalid_argument("running stats size mismatch");
    running_mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(channels_));
    running_var_ = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(channels_));
}

std::vector<ParamBlock> BatchNorm::params() {
    return {{gamma_.data(), gamma_grad_.data(), channels_}, {beta_.data(), beta_grad_.data(), channels_}};
}

nlohmann::json BatchNorm::to_json() const {
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"type", "batchnorm"},          {"channels", channels_},       {"spatial", spatial_},
            {"momentum", momentum_},        {"epsilon", epsilon_},         {"gamma", vec(gamma_)},
            {"beta", vec(beta_)},           {"running_mean", vec(running_mean_)},
            {"running_var", vec(running_var_)}};
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(std::size_t size, double rate, std::uint64_t seed) : size_(size), rate_(rate), rng_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Matrix Dropout::forward(const Matrix& x, Mode mode) {
    if (mode == Mode::eval || rate_ == 0.0) {
        mask_.resize(0, 0);
        return x;
    }
    std::bernoulli_distribution keep(1.0 - rate_);
    mask_.resize(x.rows(), x.cols());
    const double scale = 1.0 / (1.0 - rate_);
    for (Eigen::Index i = 0; i < mask_.size(); ++i) mask_.data()[i] = keep(rng_) ? scale : 0.0;
    return x.cwiseProduct(mask_);
}

Matrix Dropout::backward(const Matrix& g) {
    if (mask_.size() == 0) return g;
    return g.cwiseProduct(mask_);
}

nlohmann::json Dropout::to_json() const { return {{"type", "dropout"}, {"size", size_}, {"rate", rate_}}; }

// ---------------------------------------------------------------- Network

Network::Network(const Network& other) {
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        layers_.clear();
        for (const auto& l : other.layers_) layers_.push_back(l->clone());
    }
    return *this;
}

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

std::size_t Network::output_size() const { return layers_.empty() ? 0 : layers_.back()->output_size(); }

Matrix Network::forward(const Matrix& x, Mode mode) {
    Matrix a = x;
    for (auto& l : layers_) a = l->forward(a, mode);
    return a;
}

double mse(const Matrix& prediction, const Matrix& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
        throw std::invalid_argument("mse: shape mismatch");
    }
    return (prediction - target).squaredNorm() / static_cast<double>(prediction.size());
}

double Network::mse_and_gradient(const Matrix& x, const Matrix& y, Mode mode) {
    const Matrix out = forward(x, mode);
    const double loss = mse(out, y);
    Matrix g = (out - y) * (2.0 / static_cast<double>(out.size()));
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return loss;
}

std::vector<ParamBlock> Network::params() {
    std::vector<ParamBlock> out;
    for (auto& l : layers_) {
        for (const auto& b : l->params()) out.push_back(b);
    }
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (const auto& b : params()) n += b.size;
    return n;
}

std::vector<double> Network::flat_params() {
    std::vector<double> out;
    for (const auto& b : params()) out.insert(out.end(), b.value, b.value + b.size);
    return out;
}

void Network::set_flat_params(const std::vector<double>& values) {
    std::size_t offset = 0;
    for (const auto& b : params()) {
        if (offset + b.size > values.size()) throw std::invalid_argument("parameter vector too short");
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(offset),
                  values.begin() + static_cast<std::ptrdiff_t>(offset + b.size), b.value);
        offset += b.size;
    }
    if (offset != values.size()) throw std::invalid_argument("parameter vector too long");
}

std::vector<double> Network::flat_grads() {
    std::vector<double> out;
    for (const auto& b : params()) out.insert(out.end(), b.grad, b.grad + b.size);
    return out;
}

void Network::init_uniform(Rng& rng, double limit) {
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& l : layers_) {
        // Batch-norm scale/shift keep their identity initialization.
        if (dynamic_cast<BatchNorm*>(l.get())) continue;
        for (const auto& b : l->params()) {
            for (std::size_t i = 0; i < b.size; ++i) b.value[i] = u(rng);
        }
    }
}

nlohmann::json Network::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) layers.push_back(l->to_json());
    return {{"layers", layers}};
}

namespace {

template <typename M>
void fill(M& dst, const nlohmann::json& src) {
    const auto v = src.get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(dst.size())) throw std::invalid_argument("checkpoint size mismatch");
    std::copy(v.begin(), v.end(), dst.data());
}

}  // namespace

Network Network::from_json(const nlohmann::json& j) {
    Network net;
    for (const auto& lj : j.at("layers")) {
        const auto type = lj.at("type").get<std::string>();
        if (type == "dense") {
            auto d = std::make_unique<Dense>(lj.at("in").get<std::size_t>(), lj.at("out").get<std::size_t>());
            fill(d->weight(), lj.at("weight"));
            fill(d->bias(), lj.at("bias"));
            net.add(std::move(d));
        } else if (type == "sigmoid") {
            net.add(std::make_unique<Sigmoid>(lj.at("size").get<std::size_t>()));
        } else if (type == "relu") {
            net.add(std::make_unique<Relu>(lj.at("size").get<std::size_t>()));
        } else if (type == "conv2d") {
            auto c = std::make_unique<Conv2D>(ImageShape{lj.at("channels").get<std::size_t>(),
                                                         lj.at("height").get<std::size_t>(),
                                                         lj.at("width").get<std::size_t>()},
                                              lj.at("filters").get<std::size_t>(), lj.at("kernel").get<std::size_t>());
            fill(c->weight(), lj.at("weight"));
            fill(c->bias(), lj.at("bias"));
            net.add(std::move(c));
        } else if (type == "maxpool2d") {
            net.add(std::make_unique<MaxPool2D>(ImageShape{lj.at("channels").get<std::size_t>(),
                                                           lj.at("height").get<std::size_t>(),
                                                           lj.at("width").get<std::size_t>()},
                                                lj.at("pool").get<std::size_t>()));
        } else if (type == "batchnorm") {
            auto bn = std::make_unique<BatchNorm>(lj.at("channels").get<std::size_t>(),
                                                  lj.at("spatial").get<std::size_t>(), lj.at("momentum").get<double>(),
                                                  lj.at("epsilon").get<double>());
            auto blocks = bn->params();
            const auto gamma = lj.at("gamma").get<std::vector<double>>();
            const auto beta = lj.at("beta").get<std::vector<double>>();
            std::copy(gamma.begin(), gamma.end(), blocks[0].value);
            std::copy(beta.begin(), beta.end(), blocks[1].value);
            bn->set_running(lj.at("running_mean").get<std::vector<double>>(),
                            lj.at("running_var").get<std::vector<double>>());
            net.add(std::move(bn));
        } else if (type == "dropout") {
            net.add(std::make_unique<Dropout>(lj.at("size").get<std::size_t>(), lj.at("rate").get<double>(), 0));
        } else {
            throw std::invalid_argument("unknown layer type '" + type + "'");
        }
    }
    return net;
}

// ---------------------------------------------------------------- optimizers

void RpropConfig::validate() const {
    if (!(eta_minus > 0.0 && eta_minus < 1.0 && eta_plus > 1.0)) {
        throw std::invalid_argument("Rprop requires 0 < eta_minus < 1 < eta_plus");
    }
    if (!(delta_min > 0.0 && delta_min < delta_init && delta_init < delta_max)) {
        throw std::invalid_argument("Rprop requires 0 < delta_min < delta_init < delta_max");
    }
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be non-negative");
}

Rprop::Rprop(const RpropConfig& config) : config_(config) { config_.validate(); }

void Rprop::step(Network& net) {
    const auto blocks = net.params();
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.size;
    if (delta_.size() != total) {
        delta_.assign(total, config_.delta_init);
        prev_grad_.assign(total, 0.0);
    }
    std::size_t k = 0;
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.size; ++i, ++k) {
            double g = b.grad[i];
            const double s = g * prev_grad_[k];
            if (s > 0.0) {
                delta_[k] = std::min(delta_[k] * config_.eta_plus, config_.delta_max);
            } else if (s < 0.0) {
                delta_[k] = std::max(delta_[k] * config_.eta_minus, config_.delta_min);
                g = 0.0;
            }
            if (g > 0.0) b.value[i] -= delta_[k];
            else if (g < 0.0) b.value[i] += delta_[k];
            prev_grad_[k] = g;
        }
    }
}

std::pair<double, double> Rprop::step_range() const {
    if (delta_.empty()) return {config_.delta_init, config_.delta_init};
    const auto [lo, hi] = std::minmax_element(delta_.begin(), delta_.end());
    return {*lo, *hi};
}

void Adam::step(Network& net, double learning_rate) {
    const auto blocks = net.params();
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.size;
    if (m_.size() != total) {
        m_.assign(total, 0.0);
        v_.assign(total, 0.0);
        t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.size; ++i, ++k) {
            const double g = b.grad[i];
            m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
            v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g * g;
            b.value[i] -= learning_rate * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + config_.epsilon);
        }
    }
}

}  // namespace wxd::nn
