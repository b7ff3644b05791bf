#include "rnv/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rnv::special {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 1000;

// Shift x upward with the recurrence, then use the asymptotic expansion.
constexpr double kAsymptoticFrom = 10.0;

double lower_series(double a, double x) {
    // sum_{n>=0} x^n / (a (a+1) ... (a+n)), scaled by x^a e^-x / Gamma(a)
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double upper_continued_fraction(double a, double x) {
    // Modified Lentz evaluation of the Legendre continued fraction for Q(a, x).
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_args(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("incomplete gamma: shape must be positive");
    if (!(x >= 0.0)) throw std::domain_error("incomplete gamma: x must be non-negative");
}

}  // namespace

double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive");
    double result = 0.0;
    while (x < kAsymptoticFrom) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv2 = 1.0 / (x * x);
    // ln x - 1/2x - sum B_2n / (2n x^2n)
    const double tail =
        inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))));
    return result + std::log(x) - 0.5 / x - tail;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: argument must be positive");
    double result = 0.0;
    while (x < kAsymptoticFrom) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 1/x + 1/2x^2 + sum B_2n / x^(2n+1)
    const double tail = inv * inv2 * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30))));
    return result + inv + 0.5 * inv2 + tail;
}

double gamma_p(double a, double x) {
    check_args(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return lower_series(a, x);
    return 1.0 - upper_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
    check_args(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - lower_series(a, x);
    return upper_continued_fraction(a, x);
}

}  // namespace rnv::special
