#pragma once

#include "wxd/climate_data.hpp"
#include "wxd/forecast.hpp"
#include "wxd/harmonic_regression.hpp"
#include "wxd/nn.hpp"

#include <array>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

namespace wxd {

inline constexpr std::size_t kFeatureCount = 6;

/// One training/forecast example. `target` is NaN for future dates.
struct FeatureRow {
    Date date;
    int year = 0;  // label-encoded: calendar year minus the series' first year
    int month = 0;
    int day = 0;
    double lag1y = 0.0;     // value on the same calendar date one year earlier
    double lag2y = 0.0;     // ... two years earlier
    double harmonic = 0.0;  // fitted seasonal curve
    double target = std::numeric_limits<double>::quiet_NaN();

    std::array<double, kFeatureCount> features() const {
        return {static_cast<double>(year), static_cast<double>(month), static_cast<double>(day), lag1y, lag2y,
                harmonic};
    }
};

/// One row per date with both yearly lags present; Feb 29 is skipped. Throws
/// DataError when the series does not span more than two years.
std::vector<FeatureRow> build_features(const DailySeries& series, const HarmonicFit& fit);

/// Rows for dates beyond the series (targets unknown), labelled relative to
/// the same first year as build_features. Throws DataError if a lag is missing.
std::vector<FeatureRow> build_forecast_rows(const DailySeries& history, const HarmonicFit& fit,
                                            const std::vector<Date>& dates);

struct FeatureNorm {
    std::array<double, kFeatureCount> min{};
    std::array<double, kFeatureCount> max{};
    std::array<bool, kFeatureCount> used{};  // false for constant columns
};

/// y ↦ log(y + shift) with shift = 1 - min(training targets).
struct TargetNorm {
    double shift = 1.0;
    double forward(double y) const { return std::log(y + shift); }
    double inverse(double z) const { return std::exp(z) - shift; }
};

struct NormalizedData {
    nn::Matrix x;  // rows × used features, min-max scaled
    nn::Matrix y;  // rows × 1, log-shifted
    FeatureNorm feature_norm;
    TargetNorm target_norm;
    bool degenerate_target = false;
    std::vector<std::string> warnings;
};

/// Fit normalization on `rows` and apply it. Constant feature columns are
/// dropped with a warning.
NormalizedData normalize(const std::vector<FeatureRow>& rows);

/// Apply existing normalization; `extrapolated` counts values outside the
/// training range. Targets are transformed only when finite.
NormalizedData apply_normalization(const std::vector<FeatureRow>& rows, const FeatureNorm& fnorm,
                                   const TargetNorm& tnorm, std::size_t* extrapolated = nullptr);

/// Dense network with sigmoid hidden layers and a linear output.
nn::Network make_mlp(const std::vector<std::size_t>& layer_sizes);

struct TrainHistory {
    std::vector<double> train_mse;  // index e = weights after e updates
    std::vector<double> val_mse;
    int best_epoch = 0;
};

/// Full-batch Rprop on MSE. Weights start uniform in [-0.5, 0.5] from the
/// config seed; the returned network is the one with minimum validation MSE
/// over all epochs (including epoch 0). Throws NumericalError on NaN loss.
nn::Network train_network(nn::Network net, const nn::Matrix& x_train, const nn::Matrix& y_train,
                          const nn::Matrix& x_val, const nn::Matrix& y_val, const nn::RpropConfig& config,
                          TrainHistory& history);

struct MlpModel {
    std::vector<std::size_t> layer_sizes{6, 7, 5, 3, 1};
    nn::Network net;
    FeatureNorm feature_norm;
    TargetNorm target_norm;
    int base_year = 0;
    std::uint64_t seed = 0;
    TrainHistory history;
};

void to_json(nlohmann::json& j, const MlpModel& m);
MlpModel mlp_from_json(const nlohmann::json& j);

/// Train on normalized data, holding out the last `val_fraction` of rows
/// (chronological) for validation. Requires at least 100 rows.
MlpModel train_mlp(const NormalizedData& data, const nn::RpropConfig& config, double val_fraction,
                   std::vector<std::size_t> hidden = {7, 5, 3});

struct MlpPrediction {
    std::vector<double> values;  // °C
    std::size_t extrapolated = 0;
};

MlpPrediction predict_mlp(const MlpModel& model, const std::vector<FeatureRow>& rows);

/// Mean squared difference; throws std::invalid_argument on length mismatch or empty input.
double forecast_mse(const std::vector<double>& predicted, const std::vector<double>& actual);

struct NeuralForecasterOptions {
    nn::RpropConfig rprop;
    std::vector<std::size_t> hidden{7, 5, 3};
};

struct NeuralForecasterFit {
    MlpModel model;
    std::vector<double> validation_residuals;  // actual - predicted, °C
    double test_mse = 0.0;
    int test_year = 0;
    int validation_year = 0;
};

/// Chronological split of the feature rows: the last full calendar year is
/// the test set, the year before it validation, everything earlier training.
NeuralForecasterFit fit_neural_forecaster(const std::vector<FeatureRow>& rows,
                                          const NeuralForecasterOptions& options);

/// Point forecast with symmetric bands from empirical quantiles of the
/// absolute validation residuals.
Forecast neural_forecast(const NeuralForecasterFit& fit, const std::vector<FeatureRow>& rows,
                         const std::vector<double>& levels);

}  // namespace wxd
