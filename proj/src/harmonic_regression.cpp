#include "wxd/harmonic_regression.hpp"

#include "wxd/error.hpp"
#include "wxd/special_functions.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>

namespace wxd {

namespace {

Eigen::Vector4d design_row(double t, double period) {
    const double w = 2.0 * std::numbers::pi * t / period;
    return {1.0, t, std::sin(w), std::cos(w)};
}

}  // namespace

double HarmonicFit::predict(Date date) const {
    const Eigen::Vector4d x = design_row(static_cast<double>(date - origin_date), period);
    return beta[0] * x[0] + beta[1] * x[1] + beta[2] * x[2] + beta[3] * x[3];
}

HarmonicFit fit_harmonic(const DailySeries& series, double period) {
    if (series.variable() != Variable::temperature_c) {
        throw DataError("harmonic regression expects a temperature series");
    }
    const auto n = static_cast<Eigen::Index>(series.size());
    if (n < 10) throw DataError("harmonic regression needs at least 10 observations");

    HarmonicFit fit;
    fit.period = period;
    fit.origin_date = series[0].date;
    fit.n_obs = series.size();

    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = series[static_cast<std::size_t>(i)];
        X.row(i) = design_row(static_cast<double>(e.date - fit.origin_date), period).transpose();
        y[i] = e.value;
    }

    // Scale columns to unit norm so the condition number reflects collinearity, not units.
    const Eigen::Vector4d scale = X.colwise().norm().transpose();
    for (int j = 0; j < 4; ++j) {
        if (scale[j] == 0.0) throw NumericalError("harmonic design has an all-zero column");
    }
    const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Xs);
    const Eigen::Matrix4d R = qr.matrixQR().topLeftCorner(4, 4).triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<Eigen::Matrix4d> svd(R);
    const auto sv = svd.singularValues();
    const double cond = sv[3] > 0.0 ? sv[0] / sv[3] : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxHarmonicCondition)) {
        throw NumericalError("harmonic design is ill-conditioned (condition number " + std::to_string(cond) +
                             "); the window is too short to separate trend and seasonal terms");
    }

    const Eigen::Vector4d coef_scaled = qr.solve(y);
    const Eigen::Vector4d coef = coef_scaled.cwiseQuotient(scale);
    const Eigen::VectorXd resid = y - X * coef;
    const double dof = static_cast<double>(n - 4);
    fit.residual_variance = dof > 0 ? resid.squaredNorm() / dof : 0.0;

    // Cov(coef) = s² (XᵀX)⁻¹ = s² S⁻¹ R⁻¹ R⁻ᵀ S⁻¹ with S the column scaling.
    const Eigen::Matrix4d Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::Matrix4d::Identity());
    const Eigen::Matrix4d cov_scaled = Rinv * Rinv.transpose() * fit.residual_variance;
    for (int j = 0; j < 4; ++j) {
        fit.beta[j] = coef[j];
        fit.se[j] = std::sqrt(cov_scaled(j, j)) / scale[j];
        if (fit.se[j] > 0.0) {
            fit.t_stat[j] = fit.beta[j] / fit.se[j];
            fit.p_value[j] = 2.0 * normal_cdf(-std::abs(fit.t_stat[j]));
        } else {
            // Exact fit: the coefficient is either exactly zero or infinitely significant.
            fit.t_stat[j] = fit.beta[j] == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.beta[j]);
            fit.p_value[j] = fit.beta[j] == 0.0 ? 1.0 : 0.0;
        }
    }
    return fit;
}

std::vector<double> predict_harmonic(const HarmonicFit& fit, const std::vector<Date>& dates) {
    std::vector<double> out;
    out.reserve(dates.size());
    for (Date d : dates) out.push_back(fit.predict(d));
    return out;
}

std::vector<double> harmonic_residuals(const HarmonicFit& fit, const DailySeries& series) {
    std::vector<double> out;
    out.reserve(series.size());
    for (const auto& e : series.entries()) out.push_back(e.value - fit.predict(e.date));
    return out;
}

void to_json(nlohmann::json& j, const HarmonicFit& fit) {
    j = nlohmann::json{{"beta", fit.beta},
                       {"se", fit.se},
                       {"t_stat", fit.t_stat},
                       {"p_value", fit.p_value},
                       {"period", fit.period},
                       {"origin_date", fit.origin_date.iso()},
                       {"residual_variance", fit.residual_variance},
                       {"n_obs", fit.n_obs}};
}

void from_json(const nlohmann::json& j, HarmonicFit& fit) {
    j.at("beta").get_to(fit.beta);
    j.at("se").get_to(fit.se);
    j.at("t_stat").get_to(fit.t_stat);
    j.at("p_value").get_to(fit.p_value);
    j.at("period").get_to(fit.period);
    fit.origin_date = Date::parse(j.at("origin_date").get<std::string>());
    fit.residual_variance = j.value("residual_variance", 0.0);
    fit.n_obs = j.value("n_obs", std::size_t{0});
}

}  // namespace wxd
