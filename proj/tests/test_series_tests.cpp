#include "fixtures.hpp"
#include "wxd/error.hpp"
#include "wxd/series_tests.hpp"

#include <doctest.h>

using namespace wxd;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) { return fixtures::simulate_arma({}, {}, 1.0, n, seed, 0); }

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
    auto e = white_noise(n, seed);
    for (std::size_t i = 1; i < n; ++i) e[i] += e[i - 1];
    return e;
}

}  // namespace

TEST_CASE("correlogram") {
    const auto noise = white_noise(10000, 1);
    const auto c = diagnostics(noise, 40);
    CHECK(c.acf[0] == 1.0);
    CHECK(c.bound == doctest::Approx(1.96 / 100.0));
    int outside = 0;
    for (int k = 1; k <= 40; ++k) outside += std::abs(c.acf[static_cast<std::size_t>(k)]) > c.bound;
    CHECK(outside <= 3);  // about 7% of 40 lags

    const auto ar = fixtures::simulate_arma({0.5}, {}, 1.0, 20000, 2);
    const auto d = diagnostics(ar, 10);
    CHECK(d.acf[1] == doctest::Approx(0.5).epsilon(0.05));
    CHECK(std::abs(d.pacf[2]) < 0.03);
    CHECK(d.pacf[1] == doctest::Approx(d.acf[1]));
    CHECK_THROWS(diagnostics(ar, 6000));
}

TEST_CASE("ADF separates random walks from noise") {
    int walk_rejections = 0, noise_rejections = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        walk_rejections += adf_test(random_walk(2000, 100 + s)).reject_unit_root;
        noise_rejections += adf_test(white_noise(2000, 200 + s)).reject_unit_root;
    }
    CHECK(walk_rejections <= 2);
    CHECK(noise_rejections >= 19);
    CHECK_THROWS_AS(adf_test(std::vector<double>(100, 3.0)), DataError);
    CHECK_THROWS(adf_test(white_noise(30, 1)));
}

TEST_CASE("ADF critical values") {
    CHECK(adf_critical_value_5pct(25) == doctest::Approx(-3.00));
    CHECK(adf_critical_value_5pct(100) == doctest::Approx(-2.89));
    CHECK(adf_critical_value_5pct(75) == doctest::Approx(-2.91));
    CHECK(adf_critical_value_5pct(1000000) == doctest::Approx(-2.86).epsilon(1e-3));
}

TEST_CASE("KS normality") {
    int rejections = 0;
    for (std::uint64_t s = 0; s < 40; ++s) rejections += ks_normal_test(white_noise(5000, 300 + s)).p_value < 0.05;
    CHECK(rejections <= 2);  // conservative with estimated parameters

    Rng rng(5);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> e(5000);
    for (auto& v : e) v = ex(rng);
    const auto r = ks_normal_test(e);
    CHECK(r.p_value < 0.001);
    CHECK(r.parameters_estimated);
    CHECK_THROWS(ks_normal_test(white_noise(19, 1)));
}
