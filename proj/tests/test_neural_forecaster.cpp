#include "fixtures.hpp"
#include "wxd/error.hpp"
#include "wxd/harmonic_regression.hpp"
#include "wxd/neural_forecaster.hpp"

#include <doctest.h>

using namespace wxd;

namespace {

FeatureRow row_with(double lag1, double target) {
    FeatureRow r;
    r.year = 1;
    r.month = 3;
    r.day = 4;
    r.lag1y = lag1;
    r.lag2y = 2.0 * lag1 + 1.0;
    r.harmonic = lag1 * lag1;
    r.target = target;
    return r;
}

}  // namespace

TEST_CASE("yearly lag features") {
    const auto s = fixtures::synthetic_temperature(Date::from_ymd(2000, 1, 1), 4 * 365 + 1, 1);
    const auto fit = fit_harmonic(s);
    const auto rows = build_features(s, fit);
    REQUIRE_FALSE(rows.empty());
    CHECK(rows.front().date == Date::from_ymd(2002, 1, 1));
    for (const auto& r : rows) {
        CHECK_FALSE((r.month == 2 && r.day == 29));
        CHECK(r.lag1y == *s.at(Date::from_ymd(r.date.year() - 1, r.month, r.day)));
        CHECK(r.lag2y == *s.at(Date::from_ymd(r.date.year() - 2, r.month, r.day)));
        CHECK(r.target == *s.at(r.date));
        CHECK(r.year == r.date.year() - 2000);
        CHECK(r.harmonic == fit.predict(r.date));
    }
    const auto f = build_forecast_rows(s, fit, {s.dates().back() + 1, s.dates().back() + 2});
    CHECK(f.size() == 2);
    CHECK(std::isnan(f[0].target));
    CHECK_THROWS_AS(build_forecast_rows(s, fit, {Date::from_ymd(2030, 1, 1)}), DataError);
}

TEST_CASE("short series have insufficient span") {
    const auto s = fixtures::synthetic_temperature(Date::from_ymd(2000, 1, 1), 700, 2);
    const auto fit = fit_harmonic(s);
    try {
        build_features(s, fit);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("insufficient span") != std::string::npos);
    }
}

TEST_CASE("min-max and log-shift normalization") {
    std::vector<FeatureRow> rows{row_with(0.0, -19.7), row_with(5.0, 3.0), row_with(10.0, 12.5)};
    const auto n = normalize(rows);
    // year, month and day are constant here.
    CHECK(n.x.cols() == 3);
    CHECK(n.warnings.size() == 3);
    CHECK(n.warnings[0] == "constant feature 'year' dropped");
    CHECK(n.x(0, 0) == 0.0);
    CHECK(n.x(1, 0) == 0.5);
    CHECK(n.x(2, 0) == 1.0);
    CHECK(n.target_norm.shift == doctest::Approx(20.7).epsilon(1e-14));
    CHECK(n.y(0, 0) == doctest::Approx(0.0));
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(n.target_norm.inverse(n.y(i, 0)) - rows[static_cast<std::size_t>(i)].target) < 1e-12);
    }
    CHECK_FALSE(n.degenerate_target);

    std::size_t outside = 0;
    apply_normalization({row_with(20.0, 1.0)}, n.feature_norm, n.target_norm, &outside);
    CHECK(outside == 3);

    std::vector<FeatureRow> flat{row_with(0.0, 5.0), row_with(1.0, 5.0)};
    CHECK(normalize(flat).degenerate_target);
}

TEST_CASE("forecast mse") {
    CHECK(forecast_mse({1.0, 2.0}, {2.0, 4.0}) == 2.5);
    CHECK_THROWS_AS(forecast_mse({1.0}, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(forecast_mse({}, {}), std::invalid_argument);
}

TEST_CASE("training keeps the best validation epoch") {
    const auto s = fixtures::synthetic_temperature(Date::from_ymd(2000, 1, 1), 6 * 365, 3);
    const auto rows = build_features(s, fit_harmonic(s));
    const auto data = normalize(rows);
    nn::RpropConfig cfg;
    cfg.max_epochs = 60;
    cfg.seed = 9;
    const auto model = train_mlp(data, cfg, 0.2);
    const auto& h = model.history;
    CHECK(h.val_mse.size() == 61);
    CHECK(h.val_mse[static_cast<std::size_t>(h.best_epoch)] <= h.val_mse.back());
    for (double v : h.val_mse) CHECK(h.val_mse[static_cast<std::size_t>(h.best_epoch)] <= v);
    CHECK_THROWS_AS(train_mlp(normalize({rows.begin(), rows.begin() + 50}), cfg, 0.2), DataError);

    const auto back = mlp_from_json(nlohmann::json(model));
    const auto p1 = predict_mlp(model, rows), p2 = predict_mlp(back, rows);
    CHECK(p1.values == p2.values);
}

TEST_CASE("neural forecaster split and bands") {
    const auto s = fixtures::synthetic_temperature(Date::from_ymd(2000, 1, 1), 8 * 365 + 2, 4);
    const auto fit = fit_harmonic(s);
    const auto rows = build_features(s, fit);
    NeuralForecasterOptions opt;
    opt.rprop.max_epochs = 80;
    opt.rprop.seed = 1;
    const auto nf = fit_neural_forecaster(rows, opt);
    CHECK(nf.test_year == 2007);
    CHECK(nf.validation_year == 2006);
    CHECK(nf.test_mse > 0.0);
    const auto future = build_forecast_rows(s, fit, {s.dates().back() + 1, s.dates().back() + 2});
    const auto f = neural_forecast(nf, future, {0.5, 0.95});
    REQUIRE(f.mean.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(f.bands.at(0.5).lower[k] <= f.mean[k]);
        CHECK(f.bands.at(0.95).upper[k] >= f.bands.at(0.5).upper[k]);
    }
}
