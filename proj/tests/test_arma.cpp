#include "fixtures.hpp"
#include "wxd/arma.hpp"
#include "wxd/error.hpp"

#include <doctest.h>

#include <numbers>

using namespace wxd;

namespace {

// Closed-form exact Gaussian log-likelihood of a zero-mean AR(1).
double ar1_loglik(const std::vector<double>& x, double phi, double sigma2) {
    const double n = static_cast<double>(x.size());
    double ss = (1.0 - phi * phi) * x[0] * x[0];
    for (std::size_t t = 1; t < x.size(); ++t) {
        const double e = x[t] - phi * x[t - 1];
        ss += e * e;
    }
    return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma2) + 0.5 * std::log(1.0 - phi * phi) - ss / (2.0 * sigma2);
}

}  // namespace

TEST_CASE("exact likelihood matches the closed-form AR(1) likelihood") {
    Rng rng(11);
    std::uniform_real_distribution<double> u_phi(-0.95, 0.95), u_s2(0.2, 4.0);
    const auto x = fixtures::simulate_arma({0.6}, {}, 1.3, 400, 3);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double phi = u_phi(rng), s2 = u_s2(rng);
        const std::vector<double> ph{phi};
        const double a = arma_exact_loglik(x, ph, {}, s2);
        const double b = ar1_loglik(x, phi, s2);
        worst = std::max(worst, std::abs(a - b) / std::abs(b));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("white noise fit equals the i.i.d. Gaussian likelihood") {
    const auto x = fixtures::simulate_arma({}, {}, 2.0, 3000, 4);
    const auto m = fit_arma(x, 0, 0);
    double mean = 0.0, ss = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) ss += (v - mean) * (v - mean);
    const double n = static_cast<double>(x.size());
    const double s2 = ss / n;
    CHECK(m.sigma2 == doctest::Approx(s2).epsilon(1e-10));
    CHECK(m.loglik == doctest::Approx(-0.5 * n * (std::log(2.0 * std::numbers::pi * s2) + 1.0)).epsilon(1e-10));
    CHECK(m.offset == doctest::Approx(mean));
    CHECK(m.aic == doctest::Approx(-2.0 * m.loglik + 2.0));
    CHECK(m.bic == doctest::Approx(-2.0 * m.loglik + std::log(n)));
}

TEST_CASE("AR(1) recovery and information criteria") {
    const auto x = fixtures::simulate_arma({0.5}, {}, 1.0, 10000, 5);
    const auto m = fit_arma(x, 1, 0);
    CHECK(m.phi[0] >= 0.45);
    CHECK(m.phi[0] <= 0.55);
    CHECK(m.aic == -2.0 * m.loglik + 2.0 * 2.0);
    CHECK(m.bic == -2.0 * m.loglik + std::log(10000.0) * 2.0);
    REQUIRE(m.coef_se.size() == 1);
    CHECK(m.coef_se[0] == doctest::Approx(std::sqrt((1 - 0.25) / 10000.0)).epsilon(0.15));
}

TEST_CASE("ARMA(1,1) recovery with MA sign convention") {
    const auto x = fixtures::simulate_arma({0.7}, {0.4}, 1.0, 10000, 6);
    const auto m = fit_arma(x, 1, 1);
    CHECK(m.phi[0] == doctest::Approx(0.7).epsilon(0.05));
    CHECK(m.theta[0] == doctest::Approx(0.4).epsilon(0.1));
    CHECK(m.sigma2 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fitted models are causal and invertible") {
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto x = fixtures::simulate_arma({0.3 + 0.1 * s}, {-0.2}, 1.0, 600, 40 + s);
        for (int p = 0; p <= 2; ++p) {
            for (int q = 0; q <= 2; ++q) {
                const auto m = fit_arma(x, p, q);
                CHECK(is_stationary(m.phi));
                CHECK(is_invertible(m.theta));
                CHECK(m.sigma2 > 0.0);
            }
        }
    }
}

TEST_CASE("reparameterization round trip") {
    const std::vector<double> u{0.3, -1.2, 2.0};
    const auto ar = pacf_to_ar(u);
    CHECK(is_stationary(ar));
    const auto back = ar_to_pacf(ar);
    REQUIRE(back.has_value());
    for (std::size_t i = 0; i < u.size(); ++i) CHECK((*back)[i] == doctest::Approx(std::tanh(u[i])));
    const std::vector<double> explosive{1.1};
    CHECK_FALSE(is_stationary(explosive));
    CHECK_FALSE(is_invertible(explosive));
}

TEST_CASE("order selection") {
    const auto noise = fixtures::simulate_arma({}, {}, 1.0, 2000, 7);
    const auto sel = select_order(noise, 2, 2);
    CHECK(sel.p == 0);
    CHECK(sel.q == 0);
    CHECK(sel.table.size() == 9);
    CHECK(order_table_csv(sel).find("p,q,ok,loglik,aic,bic") == 0);

    const std::vector<double> tiny(12, 0.0);
    CHECK_THROWS_AS(select_order(tiny, 1, 1), NumericalError);
    CHECK_THROWS_AS(select_order(noise, 6, 0), std::invalid_argument);
}

TEST_CASE("fit errors") {
    CHECK_THROWS_AS(fit_arma(std::vector<double>(30, 1.0), 2, 1), DataError);
    CHECK_THROWS_AS(fit_arma(std::vector<double>(300, 1.0), 1, 0), DataError);
}

TEST_CASE("prediction variances and forecast bands") {
    ArmaModel m;
    m.p = 1;
    m.phi = {0.5};
    m.sigma2 = 1.0;
    m.final_state = {2.0};
    const auto pred = predict_arma(m, 3);
    CHECK(pred.variance[0] == doctest::Approx(1.0));
    CHECK(pred.variance[1] == doctest::Approx(1.25));
    CHECK(pred.mean[0] == doctest::Approx(2.0));
    CHECK(pred.mean[1] == doctest::Approx(1.0));

    HarmonicFit h;
    h.beta = {10.0, 0.0, 1.0, 0.0};
    h.origin_date = Date::from_ymd(2023, 1, 1);
    const auto f = forecast_arma(m, h, Date::from_ymd(2023, 12, 1), 30, {0.75, 0.95});
    CHECK(f.dates.size() == 30);
    const auto& band = f.bands.at(0.95);
    CHECK(band.upper[0] - f.mean[0] == doctest::Approx(1.959964).epsilon(1e-6));
    for (std::size_t k = 0; k < 30; ++k) {
        CHECK(band.lower[k] <= f.mean[k]);
        CHECK(f.mean[k] <= band.upper[k]);
        CHECK(f.bands.at(0.75).upper[k] <= band.upper[k]);
        if (k > 0) CHECK(band.upper[k] - f.mean[k] >= band.upper[k - 1] - f.mean[k - 1] - 1e-12);
    }
    CHECK_THROWS_AS(forecast_arma(m, h, Date::from_ymd(2023, 12, 1), 0, {0.95}), std::invalid_argument);
    CHECK_THROWS_AS(forecast_arma(m, h, Date::from_ymd(2023, 12, 1), 3, {1.0}), std::invalid_argument);
}

TEST_CASE("zero model forecast equals the harmonic curve") {
    ArmaModel m;
    m.sigma2 = 1.0;
    HarmonicFit h;
    h.beta = {3.0, 0.001, -2.0, 4.0};
    h.origin_date = Date::from_ymd(2000, 1, 1);
    const auto f = forecast_arma(m, h, Date::from_ymd(2010, 3, 1), 20, {0.95});
    for (std::size_t k = 0; k < 20; ++k) CHECK(f.mean[k] == h.predict(f.dates[k]));
}

TEST_CASE("long-horizon forecasts approach the stationary moments") {
    const std::vector<double> phi{1.5426, -0.5511}, theta{-0.7387, -0.2842, 0.0947};
    const auto x = fixtures::simulate_arma(phi, theta, 1.0, 5000, 8);
    const auto m = fit_arma(x, 2, 3);
    const auto pred = predict_arma(m, 1000);
    CHECK(std::abs(pred.mean.back() - m.offset) < 1e-3);
    const double sv = stationary_variance(m.phi, m.theta, m.sigma2);
    CHECK(pred.variance.back() == doctest::Approx(sv).epsilon(0.01));
}

TEST_CASE("json round trip") {
    const auto x = fixtures::simulate_arma({0.5}, {0.2}, 1.0, 500, 9);
    const auto m = fit_arma(x, 1, 1);
    const nlohmann::json j = m;
    const ArmaModel back = j.get<ArmaModel>();
    CHECK(back.phi == m.phi);
    CHECK(back.theta == m.theta);
    CHECK(back.sigma2 == m.sigma2);
    CHECK(back.final_state == m.final_state);
}
