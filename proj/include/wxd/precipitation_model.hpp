#pragma once

#include "wxd/climate_data.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wxd {

enum class EstimationMethod { mle, neural };

std::string_view to_string(EstimationMethod m);

/// Gamma(shape alpha, rate beta) fit of wet-day amounts.
struct GammaFit {
    double alpha = 1.0;
    double beta = 1.0;  // mm⁻¹
    double se_alpha = 0.0;
    double se_beta = 0.0;
    std::pair<double, double> ci_alpha{};
    std::pair<double, double> ci_beta{};
    std::size_t n_obs = 0;
    EstimationMethod method = EstimationMethod::mle;
    std::vector<std::string> flags;  // e.g. "resampled", "out_of_distribution"

    double mean() const { return alpha / beta; }
};

void to_json(nlohmann::json& j, const GammaFit& f);

/// Maximum likelihood by safeguarded Newton on log α − ψ(α) = log x̄ − mean(log x),
/// β = α / x̄. Standard errors come from the inverse Fisher information and
/// the CIs are ±1.96 SE. Throws DataError for n < 30, non-positive samples or
/// a sample with no spread ("degenerate sample").
GammaFit fit_gamma_mle(const std::vector<double>& samples);

/// Values at or above the wet-day threshold.
std::vector<double> wet_day_amounts(const DailySeries& series, double threshold = kWetDayThreshold);

struct SeasonFit {
    std::optional<GammaFit> fit;
    std::string error;  // set when fit is empty
};

/// MLE per season (winter, spring, summer, fall) and for the full year on
/// wet-day amounts. A failing season is reported in its entry.
std::map<Season, SeasonFit> seasonal_fits(const DailySeries& series, double threshold = kWetDayThreshold);

struct SimulationResult {
    Eigen::MatrixXd paths;         // n_sim × n_days, mm
    std::vector<double> mean_path; // pointwise average over paths
    double pr_index_estimate = 0.0;
    double truncation_probability = 0.0;  // P(N > n_days) under Poisson(λ)
    std::size_t truncated_paths = 0;
};

/// Compound Poisson–Gamma month: N ~ Poisson(λ) capped at n_days, wet days
/// chosen uniformly without replacement, amounts i.i.d. Gamma(α, β). Path i
/// is drawn from its own seed derived from `seed` and i.
SimulationResult simulate_precip_month(double lambda, double alpha, double beta, int n_days, std::size_t n_sim,
                                       std::uint64_t seed);

/// Monthly totals of each path (row sums).
std::vector<double> path_totals(const SimulationResult& sim);

void write_paths_csv(const SimulationResult& sim, const std::filesystem::path& path);
nlohmann::json summary_json(const SimulationResult& sim);

/// P(N > n) for N ~ Poisson(λ).
double poisson_tail(double lambda, int n);

}  // namespace wxd
