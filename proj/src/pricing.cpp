#include "wxd/pricing.hpp"

#include "wxd/climate_data.hpp"
#include "wxd/digest.hpp"
#include "wxd/error.hpp"
#include "wxd/precipitation_model.hpp"
#include "wxd/special_functions.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace wxd {

std::string_view to_string(ContractKind k) { return k == ContractKind::temperature ? "temperature" : "precipitation"; }

ContractKind contract_kind_from_string(std::string_view s) {
    if (s == "temperature") return ContractKind::temperature;
    if (s == "precipitation") return ContractKind::precipitation;
    throw std::invalid_argument("unknown contract kind '" + std::string(s) + "'");
}

void ContractSpec::validate() const {
    for (double v : {k_call, k_put, d_call, d_put, r, tau}) {
        if (!std::isfinite(v)) throw std::invalid_argument("contract fields must be finite");
    }
    if (k_call < k_put) throw std::invalid_argument("contract requires K_call >= K_put");
    if (d_call < 0.0 || d_put < 0.0) throw std::invalid_argument("tick values must be non-negative");
    if (tau < 0.0) throw std::invalid_argument("tau must be non-negative");
    if (n_days < 1) throw std::invalid_argument("n_days must be at least 1");
}

double ContractSpec::discount() const { return std::exp(-r * tau); }

void to_json(nlohmann::json& j, const ContractSpec& c) {
    j = nlohmann::json{{"kind", std::string(to_string(c.kind))},
                       {"k_call", c.k_call},
                       {"k_put", c.k_put},
                       {"d_call", c.d_call},
                       {"d_put", c.d_put},
                       {"r", c.r},
                       {"tau", c.tau},
                       {"n_days", c.n_days}};
}

void from_json(const nlohmann::json& j, ContractSpec& c) {
    c.kind = contract_kind_from_string(j.at("kind").get<std::string>());
    j.at("k_call").get_to(c.k_call);
    j.at("k_put").get_to(c.k_put);
    j.at("d_call").get_to(c.d_call);
    j.at("d_put").get_to(c.d_put);
    j.at("r").get_to(c.r);
    j.at("tau").get_to(c.tau);
    j.at("n_days").get_to(c.n_days);
}

std::string_view to_string(PricingMethod m) {
    switch (m) {
        case PricingMethod::hba: return "hba";
        case PricingMethod::forecast_plugin: return "forecast_plugin";
        case PricingMethod::monte_carlo: return "monte_carlo";
        case PricingMethod::closed_form: return "closed_form";
    }
    return "?";
}

void to_json(nlohmann::json& j, const PriceReport& r) {
    j = nlohmann::json{{"method", std::string(to_string(r.method))},
                       {"price", r.price},
                       {"components", r.components},
                       {"inputs_digest", r.inputs_digest}};
    j["std_error"] = r.std_error ? nlohmann::json(*r.std_error) : nlohmann::json(nullptr);
}

namespace {

std::string digest_of(const nlohmann::json& inputs) { return sha256_hex(inputs.dump()); }

}  // namespace

double pacific_rim_index(std::span<const double> values) {
    if (values.empty()) throw DataError("index of an empty period");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double percentile_strike(std::vector<double> history, double level) {
    if (history.size() < 2) throw DataError("percentile strikes need at least 2 historical values");
    if (!(level >= 0.0 && level <= 100.0)) throw std::invalid_argument("percentile level outside [0, 100]");
    return empirical_quantile(std::move(history), level / 100.0);
}

double strangle_payoff(double xi, const ContractSpec& spec) {
    return spec.d_call * std::max(xi - spec.k_call, 0.0) + spec.d_put * std::max(spec.k_put - xi, 0.0);
}

PriceReport hba_price(const std::vector<double>& payoffs, double r, double tau) {
    if (payoffs.size() < 2) throw DataError("historic burn needs at least 2 payoffs");
    const StatsSummary s = summary_stats(payoffs);
    PriceReport rep;
    rep.method = PricingMethod::hba;
    const double disc = std::exp(-r * tau);
    rep.price = disc * (s.mean + 0.25 * s.std_dev);
    rep.components = {{"mean", s.mean}, {"std", s.std_dev}, {"loading", 0.25 * s.std_dev}, {"discount", disc}};
    rep.inputs_digest = digest_of({{"method", "hba"}, {"payoffs", payoffs}, {"r", r}, {"tau", tau}});
    return rep;
}

PriceReport forecast_plugin_price(std::span<const double> forecast_path, const ContractSpec& spec) {
    spec.validate();
    const double xi = pacific_rim_index(forecast_path);
    PriceReport rep;
    rep.method = PricingMethod::forecast_plugin;
    const double call = std::max(xi - spec.k_call, 0.0);
    const double put = std::max(spec.k_put - xi, 0.0);
    rep.price = spec.discount() * (spec.d_call * call + spec.d_put * put);
    rep.components = {{"index", xi}, {"call_leg", call}, {"put_leg", put}, {"discount", spec.discount()}};
    nlohmann::json in{{"method", "forecast_plugin"},
                      {"path", std::vector<double>(forecast_path.begin(), forecast_path.end())},
                      {"contract", spec}};
    rep.inputs_digest = digest_of(in);
    return rep;
}

StrangleLegs gamma_strangle_legs(double shape, double rate, double k_call, double k_put) {
    if (!(shape > 0.0 && rate > 0.0)) throw std::invalid_argument("gamma shape and rate must be positive");
    const double mean = shape / rate;
    StrangleLegs legs;
    if (k_call <= 0.0) {
        legs.call = mean - k_call;
    } else {
        const IncompleteGamma g0 = reg_incomplete_gamma(shape, rate * k_call);
        const IncompleteGamma g1 = reg_incomplete_gamma(shape + 1.0, rate * k_call);
        legs.call = std::max(mean * g1.q - k_call * g0.q, 0.0);
    }
    if (k_put > 0.0) {
        const IncompleteGamma g0 = reg_incomplete_gamma(shape, rate * k_put);
        const IncompleteGamma g1 = reg_incomplete_gamma(shape + 1.0, rate * k_put);
        legs.put = std::max(k_put * g0.p - mean * g1.p, 0.0);
    }
    return legs;
}

double gamma_quantile(double shape, double rate, double prob) {
    if (!(shape > 0.0 && rate > 0.0)) throw std::invalid_argument("gamma shape and rate must be positive");
    return inverse_reg_lower_gamma(shape, prob) / rate;
}

PriceReport closed_form_precip_price(double alpha, double beta, int n_wet, const ContractSpec& spec,
                                     std::optional<double> lambda) {
    spec.validate();
    if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("gamma parameters must be positive");
    if (n_wet < 1 || n_wet > spec.n_days) throw std::invalid_argument("wet-day count must lie in [1, n_days]");
    const double rate = static_cast<double>(spec.n_days) * beta;
    const StrangleLegs legs = gamma_strangle_legs(n_wet * alpha, rate, spec.k_call, spec.k_put);

    PriceReport rep;
    rep.method = PricingMethod::closed_form;
    const double disc = spec.discount();
    rep.price = disc * (spec.d_call * legs.call + spec.d_put * legs.put);
    rep.components = {{"I3", legs.call}, {"I4", legs.put}, {"n_wet", n_wet}, {"discount", disc}};

    nlohmann::json in{{"method", "closed_form"}, {"alpha", alpha}, {"beta", beta}, {"n_wet", n_wet},
                      {"contract", spec}};
    if (lambda) {
        if (!(*lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
        // Poisson(λ) weights with the tail mass above n_days put on n_days.
        const int n = spec.n_days;
        double pmf = std::exp(-*lambda);
        double cumulative = 0.0;
        double call = 0.0, put = 0.0;
        for (int k = 0; k <= n; ++k) {
            if (k > 0) pmf *= *lambda / k;
            const double w = k < n ? pmf : 1.0 - cumulative;
            cumulative += pmf;
            if (k == 0) {
                put += w * std::max(spec.k_put, 0.0);
                call += w * std::max(-spec.k_call, 0.0);
                continue;
            }
            const StrangleLegs lk = gamma_strangle_legs(k * alpha, rate, spec.k_call, spec.k_put);
            call += w * lk.call;
            put += w * lk.put;
        }
        rep.components["poisson_I3"] = call;
        rep.components["poisson_I4"] = put;
        rep.components["poisson_price"] = disc * (spec.d_call * call + spec.d_put * put);
        rep.components["lambda"] = *lambda;
        in["lambda"] = *lambda;
    }
    rep.inputs_digest = digest_of(in);
    return rep;
}

PriceReport mc_precip_price(double lambda, double alpha, double beta, const ContractSpec& spec, std::size_t n_sim,
                            std::uint64_t seed) {
    spec.validate();
    if (n_sim < 100) throw std::invalid_argument("Monte Carlo pricing needs at least 100 paths");
    const SimulationResult sim = simulate_precip_month(lambda, alpha, beta, spec.n_days, n_sim, seed);
    const std::vector<double> totals = path_totals(sim);
    double sum = 0.0, sum_sq = 0.0, call = 0.0, put = 0.0;
    for (double t : totals) {
        const double xi = t / static_cast<double>(spec.n_days);
        const double h = strangle_payoff(xi, spec);
        sum += h;
        sum_sq += h * h;
        call += std::max(xi - spec.k_call, 0.0);
        put += std::max(spec.k_put - xi, 0.0);
    }
    const double n = static_cast<double>(n_sim);
    const double mean = sum / n;
    const double var = std::max(sum_sq - n * mean * mean, 0.0) / (n - 1.0);

    PriceReport rep;
    rep.method = PricingMethod::monte_carlo;
    const double disc = spec.discount();
    rep.price = disc * mean;
    rep.std_error = disc * std::sqrt(var / n);
    rep.components = {{"call_leg", call / n},
                      {"put_leg", put / n},
                      {"mean_index", sim.pr_index_estimate},
                      {"truncation_probability", sim.truncation_probability},
                      {"truncated_paths", static_cast<double>(sim.truncated_paths)},
                      {"discount", disc}};
    rep.inputs_digest = digest_of({{"method", "monte_carlo"}, {"lambda", lambda}, {"alpha", alpha}, {"beta", beta},
                                   {"n_sim", n_sim}, {"seed", seed}, {"contract", spec}});
    return rep;
}

std::vector<SurfaceCell> temp_payoff_surface(std::span<const double> forecast_path, const std::vector<double>& history,
                                             const std::vector<double>& levels, const ContractSpec& spec_template) {
    if (levels.empty()) throw std::invalid_argument("strike level grid is empty");
    const double xi = pacific_rim_index(forecast_path);
    std::vector<double> strikes;
    for (double l : levels) strikes.push_back(percentile_strike(history, l));
    std::vector<SurfaceCell> out;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t j = 0; j < levels.size(); ++j) {
            if (!(strikes[i] > strikes[j])) continue;
            ContractSpec spec = spec_template;
            spec.k_call = strikes[i];
            spec.k_put = strikes[j];
            out.push_back({levels[i], levels[j], strikes[i], strikes[j], strangle_payoff(xi, spec)});
        }
    }
    return out;
}

void write_surface_csv(const std::vector<SurfaceCell>& surface, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "level_call,level_put,k_call,k_put,payoff\n" << std::setprecision(17);
    for (const auto& c : surface) {
        out << c.level_call << ',' << c.level_put << ',' << c.k_call << ',' << c.k_put << ',' << c.payoff << '\n';
    }
}

}  // namespace wxd
