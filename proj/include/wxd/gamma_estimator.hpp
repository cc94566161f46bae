#pragma once

#include "wxd/nn.hpp"
#include "wxd/precipitation_model.hpp"

#include <cstdint>
#include <json.hpp>
#include <utility>
#include <vector>

namespace wxd {

/// Parameter box of the generated training data, for both α and β.
inline constexpr double kEstimatorParamMin = 0.01;
inline constexpr double kEstimatorParamMax = 5.0;
inline constexpr std::size_t kEstimatorSampleSize = 900;  // 30 × 30 image

struct EstimatorDataset {
    nn::Matrix samples;  // one row of raw Gamma draws per example, row-major image order
    nn::Matrix targets;  // rows of (α, β)
    std::size_t size() const { return static_cast<std::size_t>(samples.rows()); }
};

/// `count` (α, β) pairs drawn uniformly from the parameter box.
std::vector<std::pair<double, double>> uniform_param_grid(std::size_t count, std::uint64_t seed);

/// m i.i.d. Gamma(α, β) draws for each grid pair. Throws std::invalid_argument
/// for pairs outside the parameter box or m that is not a perfect square.
EstimatorDataset generate_estimator_dataset(const std::vector<std::pair<double, double>>& grid,
                                            std::size_t m, std::uint64_t seed);

/// Network input for one or more samples: two channels per image,
/// clip(log x, -60, 10)/10 and log1p(x)/3.
nn::Matrix estimator_input(const nn::Matrix& samples);

/// Conv(32, 3×3)+ReLU, batch-norm, 2×2 max-pool, twice; then two blocks of
/// Dense(32)+ReLU, batch-norm, dropout; then Dense(2).
nn::Network make_estimator_network(std::size_t side, double dropout, std::uint64_t seed);

struct EstimatorTrainConfig {
    int epochs = 40;
    std::size_t batch_size = 32;
    double learning_rate = 3e-3;  // peak of a warmup + cosine schedule
    double dropout = 0.6;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct EstimatorModel {
    nn::Network net;
    std::size_t side = 30;
    std::vector<double> train_loss;  // per epoch; index 0 is before any update
    std::vector<double> val_loss;
    int best_epoch = 0;
};

nlohmann::json to_json(const EstimatorModel& model);
EstimatorModel estimator_from_json(const nlohmann::json& j);

/// Mini-batch Adam on MSE of (α, β). The last `val_fraction` of the examples
/// is held out; the returned weights are those of the epoch with the lowest
/// validation loss. Requires at least 500 examples; throws NumericalError on
/// divergence.
EstimatorModel train_param_estimator(const EstimatorDataset& data, const EstimatorTrainConfig& config);

/// Predictions (α, β) for every row of raw samples.
nn::Matrix predict_params(EstimatorModel& model, const nn::Matrix& samples);

struct EstimatorError {
    double mae_alpha = 0.0;
    double mae_beta = 0.0;
};

EstimatorError evaluate_estimator(EstimatorModel& model, const EstimatorDataset& data);

/// Network estimate from wet-day amounts. More than 900 values are truncated
/// to the first 900; fewer are resampled with replacement (flag "resampled").
/// SEs come from `replicates` bootstrap images. Inputs outside the support of
/// the training data are flagged "out_of_distribution".
GammaFit estimate_params_nn(EstimatorModel& model, const std::vector<double>& samples, std::uint64_t seed,
                            std::size_t replicates = 200);

}  // namespace wxd
