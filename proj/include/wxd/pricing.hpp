#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wxd {

enum class ContractKind { temperature, precipitation };

std::string_view to_string(ContractKind k);
ContractKind contract_kind_from_string(std::string_view s);

/// Currency per index unit for temperature contracts.
inline constexpr double kTickCelsius = 36.0;
inline constexpr double kTickFahrenheit = 20.0;

/// Strangle on a Pacific Rim index: d_call·(ξ − K_call)₊ + d_put·(K_put − ξ)₊.
struct ContractSpec {
    ContractKind kind = ContractKind::temperature;
    double k_call = 0.0;
    double k_put = 0.0;
    double d_call = kTickCelsius;
    double d_put = kTickCelsius;
    double r = 0.0;    // continuously compounded, per year
    double tau = 0.0;  // years to settlement
    int n_days = 31;

    /// Throws std::invalid_argument unless K_call >= K_put, ticks >= 0,
    /// tau >= 0, n_days >= 1 and everything is finite. K_call == K_put is a
    /// straddle.
    void validate() const;
    double discount() const;
};

void to_json(nlohmann::json& j, const ContractSpec& c);
void from_json(const nlohmann::json& j, ContractSpec& c);

enum class PricingMethod { hba, forecast_plugin, monte_carlo, closed_form };

std::string_view to_string(PricingMethod m);

struct PriceReport {
    PricingMethod method = PricingMethod::closed_form;
    double price = 0.0;
    std::map<std::string, double> components;
    std::optional<double> std_error;
    std::string inputs_digest;  // SHA-256 of the canonical JSON of the inputs
};

void to_json(nlohmann::json& j, const PriceReport& r);

/// Arithmetic mean of daily values (dry days count as zeros). Throws
/// DataError on empty input.
double pacific_rim_index(std::span<const double> values);

/// Percentile (level in [0, 100]) with linear interpolation between order
/// statistics. Throws DataError for fewer than 2 values and
/// std::invalid_argument for a level outside [0, 100].
double percentile_strike(std::vector<double> history, double level);

double strangle_payoff(double xi, const ContractSpec& spec);

/// e^{−rτ}(mean + 0.25·std) of historical payoffs (sample std).
PriceReport hba_price(const std::vector<double>& payoffs, double r, double tau);

/// Discounted payoff at the index of a forecast path.
PriceReport forecast_plugin_price(std::span<const double> forecast_path, const ContractSpec& spec);

/// E(ξ − K_call)₊ and E(K_put − ξ)₊ for ξ ~ Gamma(shape, rate).
struct StrangleLegs {
    double call = 0.0;
    double put = 0.0;
};

StrangleLegs gamma_strangle_legs(double shape, double rate, double k_call, double k_put);

/// Quantile of Gamma(shape, rate).
double gamma_quantile(double shape, double rate, double prob);

/// Precipitation strangle with n_wet i.i.d. Gamma(α, β) wet days in a month
/// of spec.n_days days, so ξ ~ Gamma(n_wet·α, n_days·β). The legs are the
/// regularized incomplete gamma expressions (I3 call, I4 put). With `lambda`
/// the Poisson-mixed price (wet-day count ~ Poisson(λ) capped at n_days, an
/// all-dry month paying d_put·K_put) is added to the components.
PriceReport closed_form_precip_price(double alpha, double beta, int n_wet, const ContractSpec& spec,
                                     std::optional<double> lambda = std::nullopt);

/// Price by simulate_precip_month paths; std_error = e^{−rτ}·sd/√n_sim.
PriceReport mc_precip_price(double lambda, double alpha, double beta, const ContractSpec& spec, std::size_t n_sim,
                            std::uint64_t seed);

struct SurfaceCell {
    double level_call = 0.0;
    double level_put = 0.0;
    double k_call = 0.0;
    double k_put = 0.0;
    double payoff = 0.0;
};

/// Payoff at the forecast index for every (ℓ_call, ℓ_put) pair of percentile
/// strikes from `history`; cells with strike(ℓ_call) <= strike(ℓ_put) are left out.
std::vector<SurfaceCell> temp_payoff_surface(std::span<const double> forecast_path, const std::vector<double>& history,
                                             const std::vector<double>& levels, const ContractSpec& spec_template);

void write_surface_csv(const std::vector<SurfaceCell>& surface, const std::filesystem::path& path);

}  // namespace wxd
