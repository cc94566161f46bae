#include "wxd/neural_forecaster.hpp"

#include "wxd/error.hpp"
#include "wxd/rng.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <stdexcept>

namespace wxd {

namespace {

std::optional<Date> same_day_years_before(Date d, int years) {
    const int y = d.year() - years;
    const int m = d.month();
    const int day = d.day();
    if (m == 2 && day == 29) return std::nullopt;
    return Date::from_ymd(y, m, day);
}

FeatureRow make_row(const DailySeries& series, const HarmonicFit& fit, Date d, int base_year, bool require) {
    FeatureRow row;
    row.date = d;
    row.year = d.year() - base_year;
    row.month = d.month();
    row.day = d.day();
    row.harmonic = fit.predict(d);
    const auto d1 = same_day_years_before(d, 1);
    const auto d2 = same_day_years_before(d, 2);
    const auto v1 = d1 ? series.at(*d1) : std::nullopt;
    const auto v2 = d2 ? series.at(*d2) : std::nullopt;
    if (!v1 || !v2) {
        if (require) throw DataError("missing yearly lag for " + d.iso());
        row.month = 0;  // marks the row as unusable
        return row;
    }
    row.lag1y = *v1;
    row.lag2y = *v2;
    return row;
}

}  // namespace

std::vector<FeatureRow> build_features(const DailySeries& series, const HarmonicFit& fit) {
    if (series.empty()) throw DataError("insufficient span: empty series");
    const Date first = series[0].date;
    std::vector<FeatureRow> rows;
    for (const auto& e : series.entries()) {
        if (e.date.month() == 2 && e.date.day() == 29) continue;
        FeatureRow row = make_row(series, fit, e.date, first.year(), false);
        if (row.month == 0) continue;
        row.target = e.value;
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError("insufficient span: need more than two years of data for yearly lags");
    return rows;
}

std::vector<FeatureRow> build_forecast_rows(const DailySeries& history, const HarmonicFit& fit,
                                            const std::vector<Date>& dates) {
    if (history.empty()) throw DataError("empty history");
    const int base = history[0].date.year();
    std::vector<FeatureRow> rows;
    for (Date d : dates) {
        if (d.month() == 2 && d.day() == 29) throw DataError("no yearly lag defined for " + d.iso());
        rows.push_back(make_row(history, fit, d, base, true));
    }
    return rows;
}

NormalizedData normalize(const std::vector<FeatureRow>& rows) {
    if (rows.empty()) throw DataError("normalize: no rows");
    FeatureNorm fnorm;
    fnorm.min.fill(std::numeric_limits<double>::infinity());
    fnorm.max.fill(-std::numeric_limits<double>::infinity());
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        const auto f = r.features();
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            fnorm.min[j] = std::min(fnorm.min[j], f[j]);
            fnorm.max[j] = std::max(fnorm.max[j], f[j]);
        }
        ymin = std::min(ymin, r.target);
        ymax = std::max(ymax, r.target);
    }
    static constexpr const char* kNames[] = {"year", "month", "day", "lag1y", "lag2y", "harmonic"};
    std::vector<std::string> warnings;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
        fnorm.used[j] = fnorm.max[j] > fnorm.min[j];
        if (!fnorm.used[j]) warnings.push_back(std::string("constant feature '") + kNames[j] + "' dropped");
    }
    TargetNorm tnorm;
    tnorm.shift = 1.0 - ymin;
    NormalizedData out = apply_normalization(rows, fnorm, tnorm);
    out.degenerate_target = ymax == ymin;
    if (out.degenerate_target) warnings.push_back("degenerate target: single distinct value");
    out.warnings = std::move(warnings);
    return out;
}

NormalizedData apply_normalization(const std::vector<FeatureRow>& rows, const FeatureNorm& fnorm,
                                   const TargetNorm& tnorm, std::size_t* extrapolated) {
    std::size_t used = 0;
    for (bool u : fnorm.used) used += u ? 1 : 0;
    NormalizedData out;
    out.feature_norm = fnorm;
    out.target_norm = tnorm;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(used));
    out.y.resize(static_cast<Eigen::Index>(rows.size()), 1);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto f = rows[i].features();
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < kFeatureCount; ++j) {
            if (!fnorm.used[j]) continue;
            if (f[j] < fnorm.min[j] || f[j] > fnorm.max[j]) ++outside;
            out.x(static_cast<Eigen::Index>(i), col++) = (f[j] - fnorm.min[j]) / (fnorm.max[j] - fnorm.min[j]);
        }
        const double t = rows[i].target;
        out.y(static_cast<Eigen::Index>(i), 0) =
            std::isfinite(t) ? tnorm.forward(t) : std::numeric_limits<double>::quiet_NaN();
    }
    if (extrapolated) *extrapolated = outside;
    return out;
}

nn::Network make_mlp(const std::vector<std::size_t>& layer_sizes) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("an MLP needs input and output sizes");
    nn::Network net;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
        net.add(std::make_unique<nn::Dense>(layer_sizes[i], layer_sizes[i + 1]));
        if (i + 2 < layer_sizes.size()) net.add(std::make_unique<nn::Sigmoid>(layer_sizes[i + 1]));
    }
    return net;
}

nn::Network train_network(nn::Network net, const nn::Matrix& x_train, const nn::Matrix& y_train,
                          const nn::Matrix& x_val, const nn::Matrix& y_val, const nn::RpropConfig& config,
                          TrainHistory& history) {
    config.validate();
    Rng rng(config.seed);
    net.init_uniform(rng, 0.5);
    nn::Rprop rprop(config);

    const bool has_val = x_val.rows() > 0;
    history = {};
    nn::Network best = net;
    double best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch <= config.max_epochs; ++epoch) {
        const double train_loss = net.mse_and_gradient(x_train, y_train, nn::Mode::train);
        if (!std::isfinite(train_loss)) {
            throw NumericalError("training diverged (loss is not finite) at epoch " + std::to_string(epoch));
        }
        const double val_loss = has_val ? nn::mse(net.forward(x_val), y_val) : train_loss;
        history.train_mse.push_back(train_loss);
        history.val_mse.push_back(val_loss);
        if (val_loss < best_val) {
            best_val = val_loss;
            best = net;
            history.best_epoch = epoch;
        }
        if (epoch == config.max_epochs) break;
        rprop.step(net);
        const auto [lo, hi] = rprop.step_range();
        if (lo < config.delta_min || hi > config.delta_max) {
            throw std::logic_error("Rprop step size left [delta_min, delta_max]");
        }
    }
    return best;
}

MlpModel train_mlp(const NormalizedData& data, const nn::RpropConfig& config, double val_fraction,
                   std::vector<std::size_t> hidden) {
    const auto n = data.x.rows();
    if (n < 100) throw DataError("train_mlp needs at least 100 rows");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw std::invalid_argument("val_fraction must lie in [0, 1)");
    const auto n_val = static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * val_fraction));
    const auto n_train = n - n_val;

    MlpModel model;
    model.layer_sizes.assign(1, static_cast<std::size_t>(data.x.cols()));
    model.layer_sizes.insert(model.layer_sizes.end(), hidden.begin(), hidden.end());
    model.layer_sizes.push_back(1);
    model.feature_norm = data.feature_norm;
    model.target_norm = data.target_norm;
    model.seed = config.seed;
    model.net = train_network(make_mlp(model.layer_sizes), data.x.topRows(n_train), data.y.topRows(n_train),
                              data.x.bottomRows(n_val), data.y.bottomRows(n_val), config, model.history);
    return model;
}

MlpPrediction predict_mlp(const MlpModel& model, const std::vector<FeatureRow>& rows) {
    MlpPrediction out;
    if (rows.empty()) return out;
    const NormalizedData data = apply_normalization(rows, model.feature_norm, model.target_norm, &out.extrapolated);
    nn::Network net = model.net;
    const nn::Matrix z = net.forward(data.x, nn::Mode::eval);
    out.values.reserve(rows.size());
    for (Eigen::Index i = 0; i < z.rows(); ++i) out.values.push_back(model.target_norm.inverse(z(i, 0)));
    return out;
}

double forecast_mse(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size()) throw std::invalid_argument("forecast_mse: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("forecast_mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double d = predicted[i] - actual[i];
        s += d * d;
    }
    return s / static_cast<double>(predicted.size());
}

NeuralForecasterFit fit_neural_forecaster(const std::vector<FeatureRow>& rows, const NeuralForecasterOptions& options) {
    if (rows.empty()) throw DataError("no feature rows");
    // Full calendar years present in the rows (365 rows once Feb 29 is dropped).
    std::map<int, int> per_year;
    for (const auto& r : rows) ++per_year[r.date.year()];
    std::vector<int> full_years;
    for (const auto& [y, count] : per_year) {
        if (count >= 365) full_years.push_back(y);
    }
    if (full_years.size() < 3) throw DataError("need at least three full years of feature rows");

    NeuralForecasterFit fit;
    fit.test_year = full_years.back();
    fit.validation_year = full_years[full_years.size() - 2];

    std::vector<FeatureRow> train, val, test;
    for (const auto& r : rows) {
        const int y = r.date.year();
        if (y == fit.test_year) test.push_back(r);
        else if (y == fit.validation_year) val.push_back(r);
        else if (y < fit.validation_year) train.push_back(r);
    }
    if (train.size() < 100) throw DataError("train_mlp needs at least 100 rows");

    const NormalizedData tr = normalize(train);
    for (const auto& w : tr.warnings) std::cerr << "warning: " << w << '\n';
    const NormalizedData va = apply_normalization(val, tr.feature_norm, tr.target_norm);

    MlpModel& model = fit.model;
    model.layer_sizes.assign(1, static_cast<std::size_t>(tr.x.cols()));
    model.layer_sizes.insert(model.layer_sizes.end(), options.hidden.begin(), options.hidden.end());
    model.layer_sizes.push_back(1);
    model.feature_norm = tr.feature_norm;
    model.target_norm = tr.target_norm;
    model.base_year = rows.front().date.year() - rows.front().year;
    model.seed = options.rprop.seed;
    model.net = train_network(make_mlp(model.layer_sizes), tr.x, tr.y, va.x, va.y, options.rprop, model.history);

    const auto val_pred = predict_mlp(model, val).values;
    for (std::size_t i = 0; i < val.size(); ++i) fit.validation_residuals.push_back(val[i].target - val_pred[i]);
    const auto test_pred = predict_mlp(model, test).values;
    std::vector<double> test_actual;
    for (const auto& r : test) test_actual.push_back(r.target);
    fit.test_mse = forecast_mse(test_pred, test_actual);
    return fit;
}

Forecast neural_forecast(const NeuralForecasterFit& fit, const std::vector<FeatureRow>& rows,
                         const std::vector<double>& levels) {
    Forecast f;
    const auto pred = predict_mlp(fit.model, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        f.dates.push_back(rows[i].date);
        f.mean.push_back(pred.values[i]);
    }
    std::vector<double> abs_res;
    for (double r : fit.validation_residuals) abs_res.push_back(std::abs(r));
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence levels must lie in (0, 1)");
        const double half = abs_res.empty() ? 0.0 : empirical_quantile(abs_res, level);
        Band band;
        for (double m : f.mean) {
            band.lower.push_back(m - half);
            band.upper.push_back(m + half);
        }
        f.bands[level] = std::move(band);
    }
    return f;
}

void to_json(nlohmann::json& j, const MlpModel& m) {
    j = nlohmann::json{{"layer_sizes", m.layer_sizes},
                       {"activation", "sigmoid"},
                       {"output_activation", "identity"},
                       {"network", m.net.to_json()},
                       {"feature_norm", {{"min", m.feature_norm.min}, {"max", m.feature_norm.max},
                                         {"used", m.feature_norm.used}}},
                       {"target_norm", {{"transform", "log_shift"}, {"shift", m.target_norm.shift}}},
                       {"base_year", m.base_year},
                       {"seed", m.seed},
                       {"training", {{"epochs", static_cast<int>(m.history.train_mse.size()) - 1},
                                     {"best_epoch", m.history.best_epoch},
                                     {"train_mse", m.history.train_mse},
                                     {"val_mse", m.history.val_mse}}}};
}

MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel m;
    j.at("layer_sizes").get_to(m.layer_sizes);
    m.net = nn::Network::from_json(j.at("network"));
    const auto& fn = j.at("feature_norm");
    fn.at("min").get_to(m.feature_norm.min);
    fn.at("max").get_to(m.feature_norm.max);
    fn.at("used").get_to(m.feature_norm.used);
    m.target_norm.shift = j.at("target_norm").at("shift").get<double>();
    m.base_year = j.value("base_year", 0);
    m.seed = j.value("seed", std::uint64_t{0});
    return m;
}

}  // namespace wxd
