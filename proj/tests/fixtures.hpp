#pragma once

#include "wxd/climate_data.hpp"
#include "wxd/rng.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// Daily temperature: 8.4 + 0.0001 t + 12 sin + -5 cos seasonal curve plus AR(1) noise.
inline wxd::DailySeries synthetic_temperature(wxd::Date start, int n_days, std::uint64_t seed, double phi = 0.7,
                                              double noise_sd = 3.0) {
    wxd::Rng rng(seed);
    std::normal_distribution<double> eps(0.0, noise_sd);
    std::vector<wxd::Observation> rows;
    double ar = 0.0;
    for (int t = 0; t < n_days; ++t) {
        ar = phi * ar + eps(rng);
        const double w = 2.0 * std::numbers::pi * t / 365.25;
        rows.push_back({start + t, 8.4 + 1e-4 * t + 12.0 * std::sin(w) - 5.0 * std::cos(w) + ar});
    }
    return wxd::DailySeries(wxd::toronto(), wxd::Variable::temperature_c, std::move(rows));
}

/// Daily precipitation: wet with probability p_wet, Gamma(alpha, beta) amounts.
inline wxd::DailySeries synthetic_precipitation(wxd::Date start, int n_days, std::uint64_t seed, double p_wet,
                                                double alpha, double beta) {
    wxd::Rng rng(seed);
    std::bernoulli_distribution wet(p_wet);
    std::gamma_distribution<double> amount(alpha, 1.0 / beta);
    std::vector<wxd::Observation> rows;
    for (int t = 0; t < n_days; ++t) {
        double v = 0.0;
        if (wet(rng)) v = std::max(amount(rng), 0.02);
        rows.push_back({start + t, v});
    }
    return wxd::DailySeries(wxd::chicago(), wxd::Variable::precipitation_mm, std::move(rows));
}

/// Fresh scratch directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::current_path() / ("scratch_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures

namespace fixtures {

/// ARMA path x_t = Σφ_i x_{t-i} + e_t + Σθ_j e_{t-j}, after a burn-in.
inline std::vector<double> simulate_arma(const std::vector<double>& phi, const std::vector<double>& theta,
                                         double sigma, std::size_t n, std::uint64_t seed, std::size_t burn = 2000) {
    wxd::Rng rng(seed);
    std::normal_distribution<double> eps(0.0, sigma);
    const std::size_t total = n + burn;
    std::vector<double> x(total, 0.0), e(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        e[t] = eps(rng);
        double v = e[t];
        for (std::size_t i = 0; i < phi.size(); ++i) {
            if (t > i) v += phi[i] * x[t - 1 - i];
        }
        for (std::size_t j = 0; j < theta.size(); ++j) {
            if (t > j) v += theta[j] * e[t - 1 - j];
        }
        x[t] = v;
    }
    return {x.begin() + static_cast<std::ptrdiff_t>(burn), x.end()};
}

}  // namespace fixtures
