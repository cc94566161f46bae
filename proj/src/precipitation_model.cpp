#include "wxd/precipitation_model.hpp"

#include "wxd/error.hpp"
#include "wxd/parallel.hpp"
#include "wxd/rng.hpp"
#include "wxd/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace wxd {

std::string_view to_string(EstimationMethod m) { return m == EstimationMethod::mle ? "mle" : "neural"; }

void to_json(nlohmann::json& j, const GammaFit& f) {
    j = nlohmann::json{{"alpha", f.alpha},
                       {"beta", f.beta},
                       {"se_alpha", f.se_alpha},
                       {"se_beta", f.se_beta},
                       {"ci_alpha", {f.ci_alpha.first, f.ci_alpha.second}},
                       {"ci_beta", {f.ci_beta.first, f.ci_beta.second}},
                       {"n_obs", f.n_obs},
                       {"method", std::string(to_string(f.method))},
                       {"flags", f.flags}};
}

namespace {

// Root of log(a) - digamma(a) = s for s > 0; the left side decreases from +inf to 0.
double solve_shape(double s) {
    double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        const double f = std::log(a) - digamma(a) - s;
        if (f > 0.0) lo = a;
        else hi = a;
        const double df = 1.0 / a - trigamma(a);
        double next = a - f / df;
        if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * a;
        if (std::abs(next - a) <= 1e-14 * a) return next;
        a = next;
    }
    throw NumericalError("gamma shape equation did not converge");
}

}  // namespace

GammaFit fit_gamma_mle(const std::vector<double>& samples) {
    if (samples.size() < 30) throw DataError("gamma fit needs at least 30 samples");
    double sum = 0.0, sum_log = 0.0;
    for (double x : samples) {
        if (!(x > 0.0) || !std::isfinite(x)) throw DataError("gamma fit needs positive samples");
        sum += x;
        sum_log += std::log(x);
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    const double s = std::log(mean) - sum_log / n;
    // Jensen: s >= 0 with equality only for a constant sample.
    if (!(s > 1e-12)) throw DataError("degenerate sample");

    GammaFit fit;
    fit.alpha = solve_shape(s);
    fit.beta = fit.alpha / mean;
    fit.n_obs = samples.size();
    fit.method = EstimationMethod::mle;

    const double tg = trigamma(fit.alpha);
    const double denom = n * (fit.alpha * tg - 1.0);
    if (!(denom > 0.0)) throw NumericalError("singular Fisher information");
    fit.se_alpha = std::sqrt(fit.alpha / denom);
    fit.se_beta = fit.beta * std::sqrt(tg / denom);
    fit.ci_alpha = {fit.alpha - 1.96 * fit.se_alpha, fit.alpha + 1.96 * fit.se_alpha};
    fit.ci_beta = {fit.beta - 1.96 * fit.se_beta, fit.beta + 1.96 * fit.se_beta};
    return fit;
}

std::vector<double> wet_day_amounts(const DailySeries& series, double threshold) {
    std::vector<double> out;
    for (const auto& e : series.entries()) {
        if (e.value >= threshold) out.push_back(e.value);
    }
    return out;
}

std::map<Season, SeasonFit> seasonal_fits(const DailySeries& series, double threshold) {
    if (series.variable() != Variable::precipitation_mm) throw DataError("seasonal_fits needs a precipitation series");
    std::map<Season, SeasonFit> out;
    for (Season s : {Season::winter, Season::spring, Season::summer, Season::fall, Season::full_year}) {
        SeasonFit entry;
        try {
            entry.fit = fit_gamma_mle(wet_day_amounts(seasonal_split(series, s), threshold));
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
        out[s] = std::move(entry);
    }
    return out;
}

double poisson_tail(double lambda, int n) {
    if (n < 0) return 1.0;
    if (!(lambda > 0.0)) return 0.0;
    // P(N <= n) = Q(n + 1, λ).
    return reg_incomplete_gamma(static_cast<double>(n) + 1.0, lambda).p;
}

SimulationResult simulate_precip_month(double lambda, double alpha, double beta, int n_days, std::size_t n_sim,
                                       std::uint64_t seed) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    if (!(alpha > 0.0 && beta > 0.0)) throw std::invalid_argument("gamma parameters must be positive");
    if (n_days < 1) throw std::invalid_argument("n_days must be at least 1");
    if (n_sim < 1) throw std::invalid_argument("n_sim must be at least 1");

    SimulationResult out;
    out.paths = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_sim), n_days);
    std::vector<char> truncated(n_sim, 0);
    parallel_for(n_sim, [&](std::size_t i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::poisson_distribution<long> count_dist(lambda);
        std::gamma_distribution<double> amount(alpha, 1.0 / beta);
        long n_wet = count_dist(rng);
        if (n_wet > n_days) {
            n_wet = n_days;
            truncated[i] = 1;
        }
        std::vector<int> days(static_cast<std::size_t>(n_days));
        std::iota(days.begin(), days.end(), 0);
        for (long k = 0; k < n_wet; ++k) {
            std::uniform_int_distribution<int> pick(static_cast<int>(k), n_days - 1);
            std::swap(days[static_cast<std::size_t>(k)], days[static_cast<std::size_t>(pick(rng))]);
            out.paths(static_cast<Eigen::Index>(i), days[static_cast<std::size_t>(k)]) = amount(rng);
        }
    });
    out.truncated_paths = static_cast<std::size_t>(std::count(truncated.begin(), truncated.end(), 1));
    out.truncation_probability = poisson_tail(lambda, n_days);
    const Eigen::RowVectorXd mean = out.paths.colwise().mean();
    out.mean_path.assign(mean.data(), mean.data() + mean.size());
    out.pr_index_estimate = out.paths.rowwise().sum().mean() / static_cast<double>(n_days);
    return out;
}

std::vector<double> path_totals(const SimulationResult& sim) {
    const Eigen::VectorXd totals = sim.paths.rowwise().sum();
    return {totals.data(), totals.data() + totals.size()};
}

void write_paths_csv(const SimulationResult& sim, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "path,day,value\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < sim.paths.rows(); ++i) {
        for (Eigen::Index d = 0; d < sim.paths.cols(); ++d) out << i << ',' << d + 1 << ',' << sim.paths(i, d) << '\n';
    }
}

nlohmann::json summary_json(const SimulationResult& sim) {
    return {{"n_sim", sim.paths.rows()},
            {"n_days", sim.paths.cols()},
            {"pr_index_estimate", sim.pr_index_estimate},
            {"mean_path", sim.mean_path},
            {"truncation_probability", sim.truncation_probability},
            {"truncated_paths", sim.truncated_paths}};
}

}  // namespace wxd
