#include "wxd/arma.hpp"

#include "wxd/error.hpp"
#include "wxd/nelder_mead.hpp"
#include "wxd/special_functions.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace wxd {

namespace {

constexpr double kBoundaryPacf = 1.0 - 1e-6;
constexpr double kLog2Pi = 1.8378770664093453;

struct FilterResult {
    double sum_sq = 0.0;     // Σ v_t² / F_t
    double sum_log_f = 0.0;  // Σ log F_t
    std::vector<double> final_state;
    bool ok = true;
};

/// Kalman filter for the Harvey state-space form with unit innovation
/// variance. Once the prediction covariance stops changing the gain is frozen
/// and only the state is propagated.
FilterResult run_filter(std::span<const double> x, std::span<const double> phi, std::span<const double> theta,
                        bool keep_state) {
    const int p = static_cast<int>(phi.size());
    const int q = static_cast<int>(theta.size());
    const int r = std::max(p, q + 1);

    std::vector<double> T(r, 0.0);  // first column of the transition matrix
    std::vector<double> R(r, 0.0);
    for (int i = 0; i < p; ++i) T[i] = phi[i];
    R[0] = 1.0;
    for (int j = 0; j < q; ++j) R[j + 1] = theta[j];

    // Stationary covariance: P = T P Tᵀ + R Rᵀ.
    std::vector<double> P(static_cast<std::size_t>(r * r));
    {
        const int r2 = r * r;
        Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(r, r);
        for (int i = 0; i < r; ++i) {
            Tm(i, 0) = T[i];
            if (i + 1 < r) Tm(i, i + 1) = 1.0;
        }
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(r2, r2);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                for (int k = 0; k < r; ++k)
                    for (int l = 0; l < r; ++l) A(i * r + j, k * r + l) -= Tm(i, k) * Tm(j, l);
        Eigen::VectorXd b(r2);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) b(i * r + j) = R[i] * R[j];
        const Eigen::VectorXd sol = A.partialPivLu().solve(b);
        for (int k = 0; k < r2; ++k) P[k] = sol(k);
    }

    FilterResult out;
    std::vector<double> a(r, 0.0), a_upd(r), P_upd(P.size()), M(P.size()), P_next(P.size()), K(r);
    bool steady = false;
    double F = 0.0;

    for (std::size_t t = 0; t < x.size(); ++t) {
        const double v = x[t] - a[0];
        if (!steady) {
            F = P[0];
            if (!(F > 1e-12) || !std::isfinite(F)) {
                out.ok = false;
                return out;
            }
            for (int i = 0; i < r; ++i) K[i] = P[i * r] / F;
        }
        out.sum_sq += v * v / F;
        out.sum_log_f += std::log(F);
        for (int i = 0; i < r; ++i) a_upd[i] = a[i] + K[i] * v;
        for (int i = 0; i < r; ++i) a[i] = T[i] * a_upd[0] + (i + 1 < r ? a_upd[i + 1] : 0.0);

        if (steady) continue;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) P_upd[i * r + j] = P[i * r + j] - P[i * r] * P[j] / F;
        // M = T P_upd, then P_next = M Tᵀ + R Rᵀ.
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j)
                M[i * r + j] = T[i] * P_upd[j] + (i + 1 < r ? P_upd[(i + 1) * r + j] : 0.0);
        double change = 0.0;
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < r; ++j) {
                const double val = M[i * r] * T[j] + (j + 1 < r ? M[i * r + j + 1] : 0.0) + R[i] * R[j];
                change = std::max(change, std::abs(val - P[i * r + j]));
                P_next[i * r + j] = val;
            }
        }
        P.swap(P_next);
        if (change < 1e-13) {
            steady = true;
            F = P[0];
            for (int i = 0; i < r; ++i) K[i] = P[i * r] / F;
        }
    }
    if (keep_state) out.final_state = a;
    return out;
}

double concentrated_loglik(std::span<const double> x, std::span<const double> phi, std::span<const double> theta,
                           double* sigma2_out = nullptr, std::vector<double>* state_out = nullptr) {
    const FilterResult f = run_filter(x, phi, theta, state_out != nullptr);
    if (!f.ok) return -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(x.size());
    const double sigma2 = f.sum_sq / n;
    if (sigma2_out) *sigma2_out = sigma2;
    if (state_out) *state_out = f.final_state;
    return -0.5 * (n * kLog2Pi + n * std::log(sigma2) + f.sum_log_f + n);
}

std::vector<double> negate(std::vector<double> v) {
    for (double& x : v) x = -x;
    return v;
}

std::vector<double> yule_walker(std::span<const double> x, int order) {
    const std::size_t n = x.size();
    std::vector<double> acov(static_cast<std::size_t>(order) + 1, 0.0);
    for (int k = 0; k <= order; ++k) {
        double s = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) s += x[t] * x[t - k];
        acov[k] = s / static_cast<double>(n);
    }
    std::vector<double> phi(order, 0.0), prev(order, 0.0);
    double v = acov[0];
    for (int k = 1; k <= order; ++k) {
        double num = acov[k];
        for (int j = 1; j < k; ++j) num -= prev[j - 1] * acov[k - j];
        const double refl = v > 0.0 ? num / v : 0.0;
        phi[k - 1] = refl;
        for (int j = 1; j < k; ++j) phi[j - 1] = prev[j - 1] - refl * prev[k - j - 1];
        v *= (1.0 - refl * refl);
        prev = phi;
    }
    return phi;
}

/// Pull coefficients inside the admissible region by geometric shrinkage.
std::vector<double> shrink_to_stationary(std::vector<double> coef) {
    for (int iter = 0; iter < 200 && !ar_to_pacf(coef); ++iter) {
        for (double& c : coef) c *= 0.9;
    }
    if (!ar_to_pacf(coef)) std::fill(coef.begin(), coef.end(), 0.0);
    return coef;
}

/// Hannan-Rissanen: long AR by Yule-Walker for innovations, then OLS on lags.
void hannan_rissanen(std::span<const double> x, int p, int q, std::vector<double>& phi, std::vector<double>& theta) {
    phi.assign(p, 0.0);
    theta.assign(q, 0.0);
    if (p + q == 0) return;
    const auto n = static_cast<int>(x.size());
    if (q == 0) {
        phi = yule_walker(x, p);
        return;
    }
    const int m = std::clamp(static_cast<int>(10.0 * std::log10(static_cast<double>(n))), p + q + 1,
                             std::max(p + q + 1, n / 10));
    const std::vector<double> long_ar = yule_walker(x, m);
    std::vector<double> e(n, 0.0);
    for (int t = m; t < n; ++t) {
        double pred = 0.0;
        for (int j = 0; j < m; ++j) pred += long_ar[j] * x[t - 1 - j];
        e[t] = x[t] - pred;
    }
    const int start = m + q;
    const int rows = n - start;
    if (rows <= p + q) return;
    Eigen::MatrixXd X(rows, p + q);
    Eigen::VectorXd y(rows);
    for (int t = start; t < n; ++t) {
        const int row = t - start;
        for (int i = 0; i < p; ++i) X(row, i) = x[t - 1 - i];
        for (int j = 0; j < q; ++j) X(row, p + j) = e[t - 1 - j];
        y(row) = x[t];
    }
    const Eigen::VectorXd b = X.colPivHouseholderQr().solve(y);
    for (int i = 0; i < p; ++i) phi[i] = std::isfinite(b(i)) ? b(i) : 0.0;
    for (int j = 0; j < q; ++j) theta[j] = std::isfinite(b(p + j)) ? b(p + j) : 0.0;
}

std::vector<double> to_unconstrained(const std::vector<double>& ar_like) {
    const auto pacf = ar_to_pacf(ar_like);
    std::vector<double> u;
    for (double r : *pacf) u.push_back(std::atanh(std::clamp(r, -0.995, 0.995)));
    return u;
}

}  // namespace

std::vector<double> pacf_to_ar(std::span<const double> unconstrained) {
    const std::size_t k = unconstrained.size();
    std::vector<double> phi(k, 0.0), prev(k, 0.0);
    for (std::size_t m = 0; m < k; ++m) {
        const double r = std::tanh(unconstrained[m]);
        phi[m] = r;
        for (std::size_t j = 0; j < m; ++j) phi[j] = prev[j] - r * prev[m - 1 - j];
        std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(m) + 1, prev.begin());
    }
    return phi;
}

std::optional<std::vector<double>> ar_to_pacf(std::span<const double> ar) {
    std::vector<double> cur(ar.begin(), ar.end());
    std::vector<double> pacf(ar.size(), 0.0);
    for (std::size_t m = ar.size(); m-- > 0;) {
        const double r = cur[m];
        if (!(std::abs(r) < 1.0)) return std::nullopt;
        pacf[m] = r;
        const double denom = 1.0 - r * r;
        std::vector<double> next(m);
        for (std::size_t j = 0; j < m; ++j) next[j] = (cur[j] + r * cur[m - 1 - j]) / denom;
        cur = std::move(next);
    }
    return pacf;
}

bool is_stationary(std::span<const double> phi) { return ar_to_pacf(phi).has_value(); }

bool is_invertible(std::span<const double> theta) {
    return ar_to_pacf(negate(std::vector<double>(theta.begin(), theta.end()))).has_value();
}

std::vector<double> psi_weights(std::span<const double> phi, std::span<const double> theta, std::size_t count) {
    std::vector<double> psi(count, 0.0);
    if (count == 0) return psi;
    psi[0] = 1.0;
    for (std::size_t j = 1; j < count; ++j) {
        double v = j <= theta.size() ? theta[j - 1] : 0.0;
        for (std::size_t i = 1; i <= phi.size() && i <= j; ++i) v += phi[i - 1] * psi[j - i];
        psi[j] = v;
    }
    return psi;
}

double stationary_variance(std::span<const double> phi, std::span<const double> theta, double sigma2) {
    // Σψ², extending the truncation point until the tail is negligible.
    double total = 0.0;
    std::size_t chunk = 1024;
    std::vector<double> psi = psi_weights(phi, theta, chunk);
    while (true) {
        total = 0.0;
        for (double w : psi) total += w * w;
        const double tail = psi.back() * psi.back() + psi[psi.size() - 2] * psi[psi.size() - 2];
        if (tail < 1e-18 * total || chunk > (1u << 22)) break;
        chunk *= 4;
        psi = psi_weights(phi, theta, chunk);
    }
    return sigma2 * total;
}

double arma_exact_loglik(std::span<const double> x, std::span<const double> phi, std::span<const double> theta,
                         double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
    const FilterResult f = run_filter(x, phi, theta, false);
    if (!f.ok) return -std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(x.size());
    return -0.5 * (n * kLog2Pi + n * std::log(sigma2) + f.sum_log_f + f.sum_sq / sigma2);
}

ArmaModel fit_arma(std::span<const double> residuals, int p, int q, const ArmaFitOptions& options) {
    if (p < 0 || q < 0) throw std::invalid_argument("ARMA orders must be non-negative");
    const std::size_t n = residuals.size();
    if (n <= static_cast<std::size_t>(10 * (p + q + 1))) {
        throw DataError("ARMA(" + std::to_string(p) + "," + std::to_string(q) + ") needs more than " +
                        std::to_string(10 * (p + q + 1)) + " observations");
    }

    ArmaModel model;
    model.p = p;
    model.q = q;
    model.n_obs = n;
    double mean = 0.0;
    for (double v : residuals) mean += v;
    mean /= static_cast<double>(n);
    model.offset = mean;
    std::vector<double> x(residuals.begin(), residuals.end());
    for (double& v : x) v -= mean;

    double var = 0.0;
    for (double v : x) var += v * v;
    if (!(var > 0.0)) throw DataError("ARMA fit on a zero-variance series");

    std::vector<double> phi0, theta0;
    hannan_rissanen(x, p, q, phi0, theta0);
    phi0 = shrink_to_stationary(phi0);
    theta0 = negate(shrink_to_stationary(negate(theta0)));

    std::vector<double> start = to_unconstrained(phi0);
    const std::vector<double> ma_start = to_unconstrained(negate(theta0));
    start.insert(start.end(), ma_start.begin(), ma_start.end());

    auto unpack = [p, q](const std::vector<double>& u, std::vector<double>& phi, std::vector<double>& theta) {
        phi = pacf_to_ar(std::span<const double>(u.data(), static_cast<std::size_t>(p)));
        theta = negate(pacf_to_ar(std::span<const double>(u.data() + p, static_cast<std::size_t>(q))));
    };
    auto objective = [&](const std::vector<double>& u) {
        std::vector<double> phi, theta;
        unpack(u, phi, theta);
        return -concentrated_loglik(x, phi, theta);
    };

    NelderMeadOptions nm;
    nm.max_evaluations = options.max_evaluations;
    nm.f_tolerance = 1e-9;
    nm.x_tolerance = 1e-6;
    nm.initial_step = 0.2;
    NelderMeadResult best = nelder_mead(objective, start, nm);
    int evaluations = best.evaluations;
    for (int restart = 0; restart < options.restarts && p + q > 0; ++restart) {
        nm.initial_step = 0.05;
        const NelderMeadResult again = nelder_mead(objective, best.x, nm);
        evaluations += again.evaluations;
        const double gain = best.value - again.value;
        if (again.value <= best.value) best = again;
        if (gain < 1e-9 && again.converged) break;
    }
    model.evaluations = evaluations;
    if (!best.converged || !std::isfinite(best.value)) {
        throw NumericalError("ARMA(" + std::to_string(p) + "," + std::to_string(q) + ") did not converge after " +
                             std::to_string(evaluations) + " likelihood evaluations");
    }
    for (double u : best.x) {
        if (std::abs(std::tanh(u)) > kBoundaryPacf) model.on_boundary = true;
    }

    unpack(best.x, model.phi, model.theta);
    model.loglik = concentrated_loglik(x, model.phi, model.theta, &model.sigma2, &model.final_state);
    const double k = static_cast<double>(model.parameter_count());
    model.aic = -2.0 * model.loglik + 2.0 * k;
    model.bic = -2.0 * model.loglik + std::log(static_cast<double>(n)) * k;

    // Standard errors from the numerical Hessian of the profile likelihood in (φ, θ).
    const int dim = p + q;
    model.coef_se.assign(static_cast<std::size_t>(dim), std::numeric_limits<double>::quiet_NaN());
    if (dim > 0) {
        std::vector<double> coef(model.phi);
        coef.insert(coef.end(), model.theta.begin(), model.theta.end());
        auto f = [&](const std::vector<double>& c) {
            std::span<const double> ph(c.data(), static_cast<std::size_t>(p));
            std::span<const double> th(c.data() + p, static_cast<std::size_t>(q));
            if (!is_stationary(ph) || !is_invertible(th)) return std::numeric_limits<double>::quiet_NaN();
            return -concentrated_loglik(x, ph, th);
        };
        const double h = 1e-4;
        const double f0 = f(coef);
        Eigen::MatrixXd H(dim, dim);
        bool finite = true;
        for (int i = 0; i < dim && finite; ++i) {
            for (int j = i; j < dim && finite; ++j) {
                std::vector<double> c = coef;
                double val;
                if (i == j) {
                    c[i] = coef[i] + h;
                    const double fp = f(c);
                    c[i] = coef[i] - h;
                    const double fm = f(c);
                    val = (fp - 2.0 * f0 + fm) / (h * h);
                } else {
                    c[i] = coef[i] + h; c[j] = coef[j] + h;
                    const double fpp = f(c);
                    c[j] = coef[j] - h;
                    const double fpm = f(c);
                    c[i] = coef[i] - h;
                    const double fmm = f(c);
                    c[j] = coef[j] + h;
                    const double fmp = f(c);
                    val = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                }
                finite = std::isfinite(val);
                H(i, j) = H(j, i) = val;
            }
        }
        if (finite) {
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
            if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
                const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
                for (int i = 0; i < dim; ++i) {
                    if (cov(i, i) > 0.0) model.coef_se[i] = std::sqrt(cov(i, i));
                }
            }
        }
    }
    return model;
}

OrderSelection select_order(std::span<const double> residuals, int p_max, int q_max, const ArmaFitOptions& options) {
    if (p_max < 0 || q_max < 0 || p_max > 5 || q_max > 5) {
        throw std::invalid_argument("order grid bounds must lie in [0, 5]");
    }
    OrderSelection sel;
    const OrderCell* best = nullptr;
    for (int p = 0; p <= p_max; ++p) {
        for (int q = 0; q <= q_max; ++q) {
            OrderCell cell;
            cell.p = p;
            cell.q = q;
            try {
                const ArmaModel m = fit_arma(residuals, p, q, options);
                cell.ok = true;
                cell.aic = m.aic;
                cell.bic = m.bic;
                cell.loglik = m.loglik;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            sel.table.push_back(cell);
        }
    }
    for (const auto& cell : sel.table) {
        if (!cell.ok) continue;
        if (!best || cell.aic < best->aic ||
            (cell.aic == best->aic && (cell.p + cell.q < best->p + best->q ||
                                       (cell.p + cell.q == best->p + best->q && cell.p < best->p)))) {
            best = &cell;
        }
    }
    if (!best) throw NumericalError("no admissible model in the ARMA order grid");
    sel.p = best->p;
    sel.q = best->q;
    return sel;
}

std::string order_table_csv(const OrderSelection& selection) {
    std::ostringstream out;
    out.precision(12);
    out << "p,q,ok,loglik,aic,bic,selected,error\n";
    for (const auto& c : selection.table) {
        out << c.p << ',' << c.q << ',' << (c.ok ? 1 : 0) << ',';
        if (c.ok) out << c.loglik << ',' << c.aic << ',' << c.bic;
        else out << ",,";
        out << ',' << (c.p == selection.p && c.q == selection.q ? 1 : 0) << ',';
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        out << err << '\n';
    }
    return out.str();
}

ArmaPrediction predict_arma(const ArmaModel& model, std::size_t horizon) {
    ArmaPrediction out;
    const int r = std::max(model.p, model.q + 1);
    std::vector<double> a = model.final_state;
    a.resize(static_cast<std::size_t>(r), 0.0);
    std::vector<double> next(a.size());
    const std::vector<double> psi = psi_weights(model.phi, model.theta, horizon);
    double cum = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        out.mean.push_back(model.offset + a[0]);
        cum += psi[k] * psi[k];
        out.variance.push_back(model.sigma2 * cum);
        for (int i = 0; i < r; ++i) {
            const double phi_i = i < model.p ? model.phi[i] : 0.0;
            next[i] = phi_i * a[0] + (i + 1 < r ? a[i + 1] : 0.0);
        }
        a.swap(next);
    }
    return out;
}

Forecast forecast_arma(const ArmaModel& model, const HarmonicFit& harmonic, Date first_date, std::size_t h,
                       const std::vector<double>& levels) {
    if (h < 1) throw std::invalid_argument("forecast horizon must be at least 1");
    for (double level : levels) {
        if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence levels must lie in (0, 1)");
    }
    const ArmaPrediction pred = predict_arma(model, h);
    Forecast f;
    for (std::size_t k = 0; k < h; ++k) {
        const Date d = first_date + static_cast<std::int32_t>(k);
        f.dates.push_back(d);
        f.mean.push_back(harmonic.predict(d) + pred.mean[k]);
    }
    for (double level : levels) {
        const double z = normal_quantile(0.5 * (1.0 + level));
        Band band;
        for (std::size_t k = 0; k < h; ++k) {
            const double half = z * std::sqrt(pred.variance[k]);
            band.lower.push_back(f.mean[k] - half);
            band.upper.push_back(f.mean[k] + half);
        }
        f.bands[level] = std::move(band);
    }
    return f;
}

void to_json(nlohmann::json& j, const ArmaModel& m) {
    auto nan_safe = [](const std::vector<double>& v) {
        nlohmann::json arr = nlohmann::json::array();
        for (double x : v) arr.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
        return arr;
    };
    j = nlohmann::json{{"p", m.p},           {"q", m.q},           {"phi", m.phi},
                       {"theta", m.theta},   {"sigma2", m.sigma2}, {"loglik", m.loglik},
                       {"aic", m.aic},       {"bic", m.bic},       {"coef_se", nan_safe(m.coef_se)},
                       {"offset", m.offset}, {"n_obs", m.n_obs},   {"on_boundary", m.on_boundary},
                       {"final_state", m.final_state}};
}

void from_json(const nlohmann::json& j, ArmaModel& m) {
    j.at("p").get_to(m.p);
    j.at("q").get_to(m.q);
    j.at("phi").get_to(m.phi);
    j.at("theta").get_to(m.theta);
    j.at("sigma2").get_to(m.sigma2);
    j.at("loglik").get_to(m.loglik);
    j.at("aic").get_to(m.aic);
    j.at("bic").get_to(m.bic);
    m.coef_se.clear();
    for (const auto& v : j.value("coef_se", nlohmann::json::array())) {
        m.coef_se.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
    j.at("offset").get_to(m.offset);
    m.n_obs = j.value("n_obs", std::size_t{0});
    m.on_boundary = j.value("on_boundary", false);
    m.final_state = j.value("final_state", std::vector<double>{});
}

}  // namespace wxd
