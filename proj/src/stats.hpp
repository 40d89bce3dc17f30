#pragma once

namespace stpp {

// Standard normal quantile, Acklam's rational approximation with one Halley
// refinement step (relative error well below 1e-10 on (0,1)).
double normal_quantile(double p);

double normal_cdf(double z);

// Upper-tail probability P(X >= x) for a chi-square with k degrees of freedom.
// k == 0 is the degenerate point mass at zero.
double chisq_upper_tail(double x, int dof);

// Regularized incomplete gamma functions.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

}  // namespace stpp
