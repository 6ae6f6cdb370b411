#ifndef ORDCROWD_NUMERICS_SPECIAL_HPP
#define ORDCROWD_NUMERICS_SPECIAL_HPP

#include <cmath>
#include <limits>
#include <numbers>

#include "ordcrowd/errors.hpp"

namespace ordcrowd::numerics {

/// Scaled complementary error function exp(x^2) erfc(x).
inline double erfcx(double x) {
    if (std::isnan(x)) return x;
    if (x < 0.0) {
        if (x < -26.6) return std::numeric_limits<double>::infinity();
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x < 10.0) return std::exp(x * x) * std::erfc(x);
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
    // evaluated bottom-up; 40 levels are far more than needed for x >= 10.
    double f = x;
    for (int k = 40; k >= 1; --k) f = x + (0.5 * k) / f;
    return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

/// Digamma for x > 0: recurrence up to x >= 10, then the asymptotic series.
inline double digamma(double x) {
    if (!(x > 0.0)) throw InvalidInput("digamma requires a positive argument");
    double shift = 0.0;
    while (x < 10.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double r = 1.0 / x;
    const double r2 = r * r;
    // Bernoulli-number coefficients B_2k / (2k)
    const double series =
        r2 * (1.0 / 12 -
              r2 * (1.0 / 120 -
                    r2 * (1.0 / 252 -
                          r2 * (1.0 / 240 - r2 * (1.0 / 132 - r2 * (691.0 / 32760 - r2 / 12.0))))));
    return shift + std::log(x) - 0.5 * r - series;
}

/// Trigamma for x > 0, same scheme as digamma.
inline double trigamma(double x) {
    if (!(x > 0.0)) throw InvalidInput("trigamma requires a positive argument");
    double shift = 0.0;
    while (x < 10.0) {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    const double r = 1.0 / x;
    const double r2 = r * r;
    const double series =
        r * (1.0 + r * (0.5 + r * (1.0 / 6 -
                                   r2 * (1.0 / 30 -
                                         r2 * (1.0 / 42 -
                                               r2 * (1.0 / 30 - r2 * (5.0 / 66 - r2 * (691.0 / 2730 - r2 * 7.0 / 6))))))));
    return shift + series;
}

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) noexcept {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

/// x log x with the 0 log 0 = 0 convention.
inline double xlogx(double x) noexcept { return x > 0.0 ? x * std::log(x) : 0.0; }

/// log(sum(exp(v))) over a range.
template <typename Range>
double log_sum_exp(const Range& v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) hi = x > hi ? x : hi;
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

} // namespace ordcrowd::numerics

#endif // ORDCROWD_NUMERICS_SPECIAL_HPP
