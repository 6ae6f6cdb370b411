#ifndef ORDCROWD_NUMERICS_TRUNCATED_NORMAL_HPP
#define ORDCROWD_NUMERICS_TRUNCATED_NORMAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ordcrowd/errors.hpp"
#include "ordcrowd/numerics/special.hpp"

namespace ordcrowd::numerics {

/// First two moments and log normalizer of N(mu, var) restricted to [l, u).
struct TruncatedNormalMoments {
    double mean;
    double second_moment;
    double log_mass;

    double variance() const noexcept { return std::max(second_moment - mean * mean, 0.0); }
};

namespace detail {

struct StandardMoments {
    double m1;       // E[t]
    double m2;       // E[t^2]
    double log_mass; // log P(a <= t < b)
};

// 0 <= a < b (b may be +inf). Every term is scaled by exp(a^2/2) so that
// nothing underflows when the interval sits far in the upper tail.
inline StandardMoments upper_tail_moments(double a, double b) {
    const double sqrt_half = std::numbers::sqrt2 / 2.0;
    const bool bounded = std::isfinite(b);
    // exp(-(b^2 - a^2)/2), written to keep precision for narrow intervals.
    const double gap = bounded ? -0.5 * (b - a) * (b + a) : -std::numeric_limits<double>::infinity();
    const double decay = std::exp(gap);
    const double d = erfcx(a * sqrt_half) - (bounded ? decay * erfcx(b * sqrt_half) : 0.0);
    if (!(d > 0.0) || !std::isfinite(d)) throw DegenerateMass("interval mass is not representable");
    const double k = std::sqrt(2.0 / std::numbers::pi) / d;
    const double r1 = k * (bounded ? -std::expm1(gap) : 1.0);
    const double r2 = k * (a - (bounded ? b * decay : 0.0));
    return {r1, 1.0 + r2, std::log(0.5) - 0.5 * a * a + std::log(d)};
}

inline StandardMoments central_moments(double a, double b) {
    const double sqrt_half = std::numbers::sqrt2 / 2.0;
    const double z = 0.5 * (std::erf(b * sqrt_half) - std::erf(a * sqrt_half));
    if (!(z > 0.0) || !std::isfinite(z)) throw DegenerateMass("interval mass is not representable");
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double pa = std::isfinite(a) ? inv_sqrt_2pi * std::exp(-0.5 * a * a) : 0.0;
    const double pb = std::isfinite(b) ? inv_sqrt_2pi * std::exp(-0.5 * b * b) : 0.0;
    const double apa = std::isfinite(a) ? a * pa : 0.0;
    const double bpb = std::isfinite(b) ? b * pb : 0.0;
    return {(pa - pb) / z, 1.0 + (apa - bpb) / z, std::log(z)};
}

inline StandardMoments standard_moments(double a, double b) {
    if (a >= 0.0) return upper_tail_moments(a, b);
    if (b <= 0.0) {
        // Mirror the lower tail onto the upper one.
        StandardMoments s = upper_tail_moments(-b, -a);
        s.m1 = -s.m1;
        return s;
    }
    return central_moments(a, b);
}

} // namespace detail

/// Moments of N(mu, var) truncated to [l, u). `u` may be +infinity and `l`
/// may be -infinity. Throws InvalidVariance, InvalidInterval or DegenerateMass.
inline TruncatedNormalMoments truncated_normal_moments(double mu, double var, double l, double u) {
    if (!(var > 0.0) || !std::isfinite(var)) throw InvalidVariance("variance must be positive and finite");
    if (!(l < u)) throw InvalidInterval("truncation interval must satisfy l < u");
    const double sd = std::sqrt(var);
    const double a = (l - mu) / sd;
    const double b = (u - mu) / sd;
    const detail::StandardMoments s = detail::standard_moments(a, b);

    double mean = mu + sd * s.m1;
    double v = var * (s.m2 - s.m1 * s.m1);
    if (!std::isfinite(mean) || !std::isfinite(v) || !std::isfinite(s.log_mass))
        throw DegenerateMass("non-finite truncated moments");
    mean = std::clamp(mean, l, u);
    v = std::max(v, 0.0);
    return {mean, mean * mean + v, std::min(s.log_mass, 0.0)};
}

/// Differential entropy of the truncated normal with the given moments.
inline double truncated_normal_entropy(double mu, double var, const TruncatedNormalMoments& m) {
    const double sq = m.second_moment - 2.0 * m.mean * mu + mu * mu;
    return 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5 * sq / var + m.log_mass;
}

} // namespace ordcrowd::numerics

#endif // ORDCROWD_NUMERICS_TRUNCATED_NORMAL_HPP
