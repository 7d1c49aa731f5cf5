#pragma once

namespace cbdi {

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(long k, long n, double p);

/// One-sided Clopper-Pearson upper confidence bound for a binomial
/// proportion with k successes in n trials at the given confidence level
/// (e.g. 0.95). Exact closed form for k = 0.
double clopper_pearson_upper(long k, long n, double confidence);

} // namespace cbdi
