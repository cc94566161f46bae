#pragma once

#include "wxd/rng.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

/// Small dense/convolutional network toolkit shared by the temperature
/// forecaster and the Gamma parameter estimator. Activations are batches
/// stored row-wise (one sample per row); image tensors are flattened
/// channel-major (c, y, x).
namespace wxd::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Mode { train, eval };

/// A contiguous block of trainable values and the matching gradient buffer.
struct ParamBlock {
    double* value = nullptr;
    double* grad = nullptr;
    std::size_t size = 0;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Matrix forward(const Matrix& x, Mode mode) = 0;
    /// Back-propagate; parameter gradients are overwritten, not accumulated.
    virtual Matrix backward(const Matrix& grad_out) = 0;
    virtual std::vector<ParamBlock> params() { return {}; }
    virtual std::size_t output_size() const = 0;
    virtual nlohmann::json to_json() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
};

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out);
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<ParamBlock> params() override;
    std::size_t output_size() const override { return static_cast<std::size_t>(weight_.cols()); }
    nlohmann::json to_json() const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

    Matrix& weight() { return weight_; }  // in × out
    Eigen::RowVectorXd& bias() { return bias_; }

private:
    Matrix weight_, weight_grad_;
    Eigen::RowVectorXd bias_, bias_grad_;
    Matrix input_;
};

class Sigmoid final : public Layer {
public:
    explicit Sigmoid(std::size_t size) : size_(size) {}
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::size_t output_size() const override { return size_; }
    nlohmann::json to_json() const override { return {{"type", "sigmoid"}, {"size", size_}}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }

private:
    std::size_t size_;
    Matrix output_;
};

class Relu final : public Layer {
public:
    explicit Relu(std::size_t size) : size_(size) {}
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::size_t output_size() const override { return size_; }
    nlohmann::json to_json() const override { return {{"type", "relu"}, {"size", size_}}; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

private:
    std::size_t size_;
    Matrix input_;
};

struct ImageShape {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;
    std::size_t size() const { return channels * height * width; }
};

/// Valid (unpadded) stride-1 convolution with square kernels.
class Conv2D final : public Layer {
public:
    Conv2D(ImageShape in, std::size_t filters, std::size_t kernel);
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<ParamBlock> params() override;
    std::size_t output_size() const override { return out_shape().size(); }
    ImageShape out_shape() const;
    nlohmann::json to_json() const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2D>(*this); }

    Matrix& weight() { return weight_; }  // filters × (channels·k·k)
    Eigen::VectorXd& bias() { return bias_; }

private:
    Matrix im2col(const Matrix& x) const;

    ImageShape in_;
    std::size_t filters_, kernel_;
    Matrix weight_, weight_grad_;
    Eigen::VectorXd bias_, bias_grad_;
    Matrix input_;
};

/// Non-overlapping max pooling with a square window (floor on odd sizes).
class MaxPool2D final : public Layer {
public:
    MaxPool2D(ImageShape in, std::size_t pool = 2);
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::size_t output_size() const override { return out_shape().size(); }
    ImageShape out_shape() const;
    nlohmann::json to_json() const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2D>(*this); }

private:
    ImageShape in_;
    std::size_t pool_;
    std::vector<std::size_t> argmax_;
    std::size_t batch_ = 0;
};

/// Batch normalization over `channels` groups of `spatial` values each
/// (spatial = 1 for dense activations). Eval mode uses running statistics.
class BatchNorm final : public Layer {
public:
    BatchNorm(std::size_t channels, std::size_t spatial, double momentum = 0.99, double epsilon = 1e-3);
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::vector<ParamBlock> params() override;
    std::size_t output_size() const override { return channels_ * spatial_; }
    nlohmann::json to_json() const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }
    void set_running(const std::vector<double>& mean, const std::vector<double>& var);

private:
    std::size_t channels_, spatial_;
    double momentum_, epsilon_;
    Eigen::VectorXd gamma_, beta_, gamma_grad_, beta_grad_;
    Eigen::VectorXd running_mean_, running_var_;
    Matrix x_hat_;
    Eigen::VectorXd inv_std_;
};

/// Inverted dropout; identity in eval mode.
class Dropout final : public Layer {
public:
    Dropout(std::size_t size, double rate, std::uint64_t seed);
    Matrix forward(const Matrix& x, Mode mode) override;
    Matrix backward(const Matrix& grad_out) override;
    std::size_t output_size() const override { return size_; }
    nlohmann::json to_json() const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

private:
    std::size_t size_;
    double rate_;
    Rng rng_;
    Matrix mask_;
};

class Network {
public:
    Network() = default;
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    void add(std::unique_ptr<Layer> layer);
    std::size_t output_size() const;
    std::size_t depth() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    Matrix forward(const Matrix& x, Mode mode = Mode::eval);
    /// Mean-squared-error loss (averaged over all output entries) and, in
    /// train mode, parameter gradients.
    double mse_and_gradient(const Matrix& x, const Matrix& y, Mode mode = Mode::train);

    std::vector<ParamBlock> params();
    std::size_t parameter_count();
    std::vector<double> flat_params();
    void set_flat_params(const std::vector<double>& values);
    std::vector<double> flat_grads();

    /// Uniform(-limit, limit) initialization of every trainable weight and bias.
    void init_uniform(Rng& rng, double limit);

    nlohmann::json to_json() const;
    static Network from_json(const nlohmann::json& j);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

double mse(const Matrix& prediction, const Matrix& target);

struct RpropConfig {
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double delta_init = 0.1;
    double delta_max = 50.0;
    double delta_min = 1e-6;
    int max_epochs = 2000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// iRprop− step rule: per-weight step sizes adapted by gradient sign
/// agreement; on a sign change the step shrinks and that update is skipped.
class Rprop {
public:
    explicit Rprop(const RpropConfig& config);
    void step(Network& net);
    /// Smallest and largest current step size (for invariant checks).
    std::pair<double, double> step_range() const;

private:
    RpropConfig config_;
    std::vector<double> delta_, prev_grad_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
};

class Adam {
public:
    explicit Adam(const AdamConfig& config) : config_(config) {}
    void step(Network& net, double learning_rate);

private:
    AdamConfig config_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

}  // namespace wxd::nn
