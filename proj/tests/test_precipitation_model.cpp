#include "fixtures.hpp"
#include "wxd/error.hpp"
#include "wxd/precipitation_model.hpp"

#include <doctest.h>

#include <cmath>

using namespace wxd;

namespace {

std::vector<double> gamma_draws(double alpha, double beta, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::gamma_distribution<double> g(alpha, 1.0 / beta);
    std::vector<double> out(n);
    for (auto& v : out) v = g(rng);
    return out;
}

// E[min(N, n)] for N ~ Poisson(lambda).
double capped_poisson_mean(double lambda, int n) {
    double pmf = std::exp(-lambda), cdf = 0.0, mean = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k > 0) pmf *= lambda / k;
        mean += k * pmf;
        cdf += pmf;
    }
    return mean + n * (1.0 - cdf);
}

}  // namespace

TEST_CASE("gamma MLE recovers parameters from a large sample") {
    const auto x = gamma_draws(0.354, 0.166, 100000, 1);
    const auto fit = fit_gamma_mle(x);
    CHECK(std::abs(fit.alpha - 0.354) < 0.01);
    CHECK(std::abs(fit.beta - 0.166) < 0.01);
    CHECK(fit.n_obs == 100000);
    CHECK(fit.method == EstimationMethod::mle);
    CHECK(fit.ci_alpha.first == doctest::Approx(fit.alpha - 1.96 * fit.se_alpha));
    CHECK(fit.ci_beta.second == doctest::Approx(fit.beta + 1.96 * fit.se_beta));
}

TEST_CASE("gamma MLE input errors") {
    CHECK_THROWS_AS(fit_gamma_mle(std::vector<double>(29, 1.0)), DataError);
    CHECK_THROWS_AS(fit_gamma_mle(std::vector<double>(40, 2.5)), DataError);
    auto x = gamma_draws(1.0, 1.0, 50, 2);
    x[3] = 0.0;
    CHECK_THROWS_AS(fit_gamma_mle(x), DataError);
    try {
        fit_gamma_mle(std::vector<double>(40, 2.5));
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("degenerate sample") != std::string::npos);
    }
}

TEST_CASE("Fisher standard errors agree with the bootstrap") {
    const auto x = gamma_draws(0.354, 0.166, 3800, 3);
    const auto fit = fit_gamma_mle(x);
    Rng rng(4);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> a, b;
    for (int r = 0; r < 300; ++r) {
        std::vector<double> bs(x.size());
        for (auto& v : bs) v = x[pick(rng)];
        const auto f = fit_gamma_mle(bs);
        a.push_back(f.alpha);
        b.push_back(f.beta);
    }
    const double sa = summary_stats(a).std_dev, sb = summary_stats(b).std_dev;
    CHECK(std::abs(fit.se_alpha / sa - 1.0) < 0.2);
    CHECK(std::abs(fit.se_beta / sb - 1.0) < 0.2);
}

TEST_CASE("estimation error shrinks like one over root n") {
    std::vector<double> logn, logerr;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
        double err = 0.0;
        const int reps = 40;
        for (int r = 0; r < reps; ++r) {
            const auto f = fit_gamma_mle(gamma_draws(0.5, 0.3, n, 100 + n + static_cast<std::size_t>(r)));
            err += std::abs(f.alpha - 0.5);
        }
        logn.push_back(std::log(static_cast<double>(n)));
        logerr.push_back(std::log(err / reps));
    }
    const double slope = (logerr[2] - logerr[0]) / (logn[2] - logn[0]);
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.3));
    CHECK(slope > -0.65);
    CHECK(slope < -0.35);
}

TEST_CASE("seasonal fits report failing seasons") {
    auto s = fixtures::synthetic_precipitation(Date::from_ymd(2000, 3, 1), 3 * 365 - 90, 5, 0.5, 0.5, 0.3);
    // No winter days at all: March 2000 to late November 2002 minus the winters.
    std::vector<Observation> rows;
    for (const auto& e : s.entries()) {
        if (!in_season(Season::winter, e.date.month())) rows.push_back(e);
    }
    const DailySeries no_winter(chicago(), Variable::precipitation_mm, rows);
    const auto fits = seasonal_fits(no_winter);
    CHECK_FALSE(fits.at(Season::winter).fit.has_value());
    CHECK_FALSE(fits.at(Season::winter).error.empty());
    CHECK(fits.at(Season::summer).fit.has_value());
    CHECK(fits.at(Season::full_year).fit.has_value());
    const auto wet = wet_day_amounts(no_winter);
    for (double v : wet) CHECK(v >= kWetDayThreshold);
}

TEST_CASE("compound month simulation moments") {
    const double lambda = 12.0, alpha = 0.6, beta = 0.4;
    const auto sim = simulate_precip_month(lambda, alpha, beta, 31, 20000, 6);
    CHECK(sim.paths.rows() == 20000);
    CHECK(sim.paths.cols() == 31);
    CHECK(sim.truncation_probability == doctest::Approx(poisson_tail(lambda, 31)));
    const auto totals = path_totals(sim);
    const auto st = summary_stats(totals);
    const double mean = lambda * alpha / beta;
    const double var = lambda * alpha * (alpha + 1.0) / (beta * beta);
    CHECK(std::abs(st.mean - mean) < 4.0 * std::sqrt(var / 20000.0));
    CHECK(st.std_dev * st.std_dev == doctest::Approx(var).epsilon(0.05));
    double s = 0.0;
    for (double v : sim.mean_path) s += v;
    CHECK(sim.pr_index_estimate == doctest::Approx(s / 31.0));
}

TEST_CASE("Toronto month index with truncation") {
    const double lambda = 29.79, alpha = 0.580, beta = 0.377;
    const auto sim = simulate_precip_month(lambda, alpha, beta, 31, 1000, 7);
    const double expected = capped_poisson_mean(lambda, 31) * alpha / beta / 31.0;
    CHECK(expected == doctest::Approx(1.40).epsilon(0.03));
    const double mc_sd = std::sqrt(lambda * alpha * (alpha + 1.0) / (beta * beta) / 1000.0) / 31.0;
    CHECK(std::abs(sim.pr_index_estimate - expected) < 4.0 * mc_sd);
    CHECK(sim.truncation_probability > 0.3);
    CHECK(sim.truncated_paths > 0);
}

TEST_CASE("simulation edge cases and determinism") {
    const auto dry = simulate_precip_month(1e-9, 0.5, 0.5, 31, 200, 8);
    CHECK(dry.pr_index_estimate == 0.0);
    const auto a = simulate_precip_month(5.0, 0.5, 0.5, 30, 300, 9);
    const auto b = simulate_precip_month(5.0, 0.5, 0.5, 30, 300, 9);
    CHECK(a.paths == b.paths);
    for (Eigen::Index i = 0; i < a.paths.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.paths.cols(); ++j) CHECK(a.paths(i, j) >= 0.0);
    }
    CHECK_THROWS(simulate_precip_month(-1.0, 0.5, 0.5, 30, 10, 1));
    CHECK_THROWS(simulate_precip_month(1.0, 0.5, 0.5, 0, 10, 1));
}
