#pragma once

#include "wxd/forecast.hpp"
#include "wxd/harmonic_regression.hpp"

#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wxd {

/// Zero-mean ARMA(p, q) on a centered series:
///   x_t = φ₁x_{t-1} + … + φ_p x_{t-p} + e_t + θ₁e_{t-1} + … + θ_q e_{t-q},
/// e_t ~ N(0, σ²). Fitted models are always causal and invertible.
struct ArmaModel {
    int p = 0;
    int q = 0;
    std::vector<double> phi;
    std::vector<double> theta;
    double sigma2 = 1.0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    std::vector<double> coef_se;  // p + q entries, NaN when the Hessian is not positive definite
    double offset = 0.0;          // mean removed before fitting
    std::size_t n_obs = 0;
    bool on_boundary = false;     // some partial autocorrelation pinned near ±1
    int evaluations = 0;
    std::vector<double> final_state;  // one-step-ahead predicted state after the last observation

    std::size_t parameter_count() const { return static_cast<std::size_t>(p + q + 1); }
};

void to_json(nlohmann::json& j, const ArmaModel& m);
void from_json(const nlohmann::json& j, ArmaModel& m);

struct ArmaFitOptions {
    int max_evaluations = 20000;
    int restarts = 2;
};

/// Exact Gaussian maximum likelihood via the Kalman-filter innovations
/// recursion, optimized by Nelder-Mead over partial-autocorrelation
/// coordinates (so every candidate is causal and invertible), started from a
/// Hannan-Rissanen estimate. Throws DataError if the series is too short and
/// NumericalError on non-convergence.
ArmaModel fit_arma(std::span<const double> residuals, int p, int q, const ArmaFitOptions& options = {});

/// Exact log-likelihood of a zero-mean series under the given parameters.
double arma_exact_loglik(std::span<const double> x, std::span<const double> phi,
                         std::span<const double> theta, double sigma2);

/// Map unconstrained reals to coefficients of a stationary AR polynomial
/// (tanh → partial autocorrelations → Durbin-Levinson), and back.
std::vector<double> pacf_to_ar(std::span<const double> unconstrained);
std::optional<std::vector<double>> ar_to_pacf(std::span<const double> ar);

bool is_stationary(std::span<const double> phi);
bool is_invertible(std::span<const double> theta);

/// ψ-weights of the MA(∞) representation, ψ₀ = 1.
std::vector<double> psi_weights(std::span<const double> phi, std::span<const double> theta, std::size_t count);

/// Variance of a stationary ARMA process (σ² Σψ²), summed until the tail is negligible.
double stationary_variance(std::span<const double> phi, std::span<const double> theta, double sigma2);

struct OrderCell {
    int p = 0;
    int q = 0;
    bool ok = false;
    double aic = 0.0;
    double bic = 0.0;
    double loglik = 0.0;
    std::string error;
};

struct OrderSelection {
    int p = 0;
    int q = 0;
    std::vector<OrderCell> table;  // row-major over p = 0..p_max, q = 0..q_max
};

/// Fit every (p, q) in [0, p_max] × [0, q_max] and return the AIC minimizer.
/// Ties go to smaller p + q, then smaller p. Failed cells are kept in the table
/// and excluded from the argmin; throws NumericalError if every cell failed.
OrderSelection select_order(std::span<const double> residuals, int p_max, int q_max,
                            const ArmaFitOptions& options = {});

std::string order_table_csv(const OrderSelection& selection);

struct ArmaPrediction {
    std::vector<double> mean;      // conditional mean of the ARMA component (offset included)
    std::vector<double> variance;  // k-step prediction error variance σ² Σ_{j<k} ψ_j²
};

ArmaPrediction predict_arma(const ArmaModel& model, std::size_t horizon);

/// Harmonic curve plus ARMA conditional mean for the h days starting at
/// `first_date`, with Gaussian bands at each level. The first forecast day is
/// taken to immediately follow the data the model was fitted on.
Forecast forecast_arma(const ArmaModel& model, const HarmonicFit& harmonic, Date first_date, std::size_t h,
                       const std::vector<double>& levels);

}  // namespace wxd
