#include "wxd/special_functions.hpp"

#include "wxd/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace wxd {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// log of x^a e^{-x} / Γ(a)
double log_prefactor(double a, double x) { return a * std::log(x) - x - std::lgamma(a); }

double lower_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) {
            return sum * std::exp(log_prefactor(a, x));
        }
    }
    throw NumericalError("incomplete gamma series did not converge");
}

double upper_continued_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return std::exp(log_prefactor(a, x)) * h;
    }
    throw NumericalError("incomplete gamma continued fraction did not converge");
}

}  // namespace

IncompleteGamma reg_incomplete_gamma(double a, double x) {
    if (!(a > 0.0)) throw std::invalid_argument("incomplete gamma requires a > 0");
    if (!(x >= 0.0)) throw std::invalid_argument("incomplete gamma requires x >= 0");
    if (x == 0.0) return {0.0, 1.0};
    if (std::isinf(x)) return {1.0, 0.0};
    if (x < a + 1.0) {
        const double p = lower_series(a, x);
        return {p, 1.0 - p};
    }
    const double q = upper_continued_fraction(a, x);
    return {1.0 - q, q};
}

double inverse_reg_lower_gamma(double a, double prob) {
    if (!(a > 0.0)) throw std::invalid_argument("gamma quantile requires a > 0");
    if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("probability outside [0, 1]");
    if (prob == 0.0) return 0.0;
    if (prob == 1.0) return std::numeric_limits<double>::infinity();

    // Bracket, then Newton steps in log x safeguarded by bisection.
    double lo = 0.0;
    double hi = std::max(1.0, a);
    while (reg_incomplete_gamma(a, hi).p < prob) {
        lo = hi;
        hi *= 2.0;
    }
    double x = 0.5 * (lo + hi);
    const double z = normal_quantile(prob);
    const double wh = a * std::pow(1.0 - 1.0 / (9.0 * a) + z / (3.0 * std::sqrt(a)), 3);
    // Leading series term P(a, x) ~ x^a / Γ(a + 1) for small x.
    const double small = std::exp((std::log(prob) + std::lgamma(a + 1.0)) / a);
    if (a >= 1.0 && wh > lo && wh < hi) x = wh;
    else if (small > lo && small < hi) x = small;

    for (int iter = 0; iter < 300; ++iter) {
        const double f = reg_incomplete_gamma(a, x).p - prob;
        if (std::abs(f) <= 1e-14 * prob) return x;
        if (f < 0.0) lo = x; else hi = x;
        // dP/d(log x) = x^a e^{-x} / Γ(a).
        const double slope = std::exp(log_prefactor(a, x));
        double next = 0.0;
        if (slope > 0.0) next = x * std::exp(std::clamp(-f / slope, -30.0, 30.0));
        if (std::abs(next - x) <= 1e-15 * x) return next;
        if (!(next > lo && next < hi)) next = lo > 0.0 ? std::sqrt(lo * hi) : hi * 1e-3;
        x = next;
        if (lo > 0.0 && hi - lo <= 1e-15 * hi) return x;
    }
    return x;
}

double digamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("digamma implemented for x > 0");
    double result = 0.0;
    while (x < 12.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    result += std::log(x) - 0.5 / x -
              f * (1.0 / 12 - f * (1.0 / 120 - f * (1.0 / 252 - f * (1.0 / 240 - f * (1.0 / 132)))));
    return result;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("trigamma implemented for x > 0");
    double result = 0.0;
    while (x < 12.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double f = 1.0 / (x * x);
    result += 1.0 / x + f / 2.0 +
              f / x * (1.0 / 6 - f * (1.0 / 30 - f * (1.0 / 42 - f * (1.0 / 30 - f * 5.0 / 66))));
    return result;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double prob) {
    if (!(prob > 0.0 && prob < 1.0)) {
        if (prob == 0.0) return -std::numeric_limits<double>::infinity();
        if (prob == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("normal quantile requires prob in [0, 1]");
    }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (prob < p_low) {
        const double q = std::sqrt(-2.0 * std::log(prob));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (prob <= 1.0 - p_low) {
        const double q = prob - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-prob));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley refinement against erfc.
    const double e = normal_cdf(x) - prob;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.0) {
        // Small-lambda form converges faster: 1 - sqrt(2π)/λ Σ exp(-(2k-1)²π²/(8λ²)).
        const double w = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
        double sum = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double term = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * w);
            sum += term;
            if (term < 1e-18) break;
        }
        return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace wxd
