#pragma once

namespace rnv::special {

// psi(x) for x > 0.
double digamma(double x);
// psi'(x) for x > 0.
double trigamma(double x);

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly.
double gamma_q(double a, double x);

}  // namespace rnv::special
