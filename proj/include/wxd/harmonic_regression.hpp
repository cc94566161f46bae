#pragma once

#include "wxd/climate_data.hpp"

#include <array>
#include <json.hpp>
#include <vector>

namespace wxd {

/// OLS fit of T(t) = b0 + b1 t + b2 sin(2πt/P) + b3 cos(2πt/P), with t in
/// days since origin_date and P = period (365.25 by default).
struct HarmonicFit {
    std::array<double, 4> beta{};     // intercept, trend per day, sine, cosine
    std::array<double, 4> se{};
    std::array<double, 4> t_stat{};
    std::array<double, 4> p_value{};  // two-sided, normal approximation
    double period = 365.25;
    Date origin_date;
    double residual_variance = 0.0;   // RSS / (n - 4)
    std::size_t n_obs = 0;

    double predict(Date date) const;
};

/// Throws DataError for short or non-temperature series and NumericalError
/// when the column-scaled design is too ill-conditioned to identify all four
/// coefficients (e.g. windows much shorter than one period).
HarmonicFit fit_harmonic(const DailySeries& series, double period = 365.25);

std::vector<double> predict_harmonic(const HarmonicFit& fit, const std::vector<Date>& dates);

/// observed - predicted for each entry of the series.
std::vector<double> harmonic_residuals(const HarmonicFit& fit, const DailySeries& series);

/// Largest acceptable condition number of the column-normalized design.
inline constexpr double kMaxHarmonicCondition = 1e3;

void to_json(nlohmann::json& j, const HarmonicFit& fit);
void from_json(const nlohmann::json& j, HarmonicFit& fit);

}  // namespace wxd
