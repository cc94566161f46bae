#pragma once

namespace wxd {

/// Regularized incomplete gamma pair: p = γ(a,x)/Γ(a), q = Γ(a,x)/Γ(a).
struct IncompleteGamma {
    double p = 0.0;
    double q = 1.0;
};

/// Series expansion for x < a + 1, Lentz continued fraction otherwise.
/// Throws std::invalid_argument for a <= 0 or x < 0, NumericalError if
/// neither expansion converges.
IncompleteGamma reg_incomplete_gamma(double a, double x);

/// x with P(a, x) = prob, i.e. the prob-quantile of Gamma(shape a, rate 1).
double inverse_reg_lower_gamma(double a, double prob);

double digamma(double x);
double trigamma(double x);

double normal_cdf(double z);
/// Inverse standard normal CDF (Acklam's rational approximation, one Halley step).
double normal_quantile(double prob);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

}  // namespace wxd
