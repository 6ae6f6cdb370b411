#ifndef ORDCROWD_NUMERICS_GAMMA_ML_HPP
#define ORDCROWD_NUMERICS_GAMMA_ML_HPP

#include <cmath>

#include "ordcrowd/errors.hpp"
#include "ordcrowd/numerics/special.hpp"

namespace ordcrowd::numerics {

struct GammaFit {
    double shape;
    double rate;
    /// Shape hit max_gamma_shape (near-zero Jensen gap).
    bool capped;
};

inline constexpr double max_gamma_shape = 1e6;
inline constexpr double min_jensen_gap = 1e-12;

/// Maximum-likelihood gamma(shape, rate) from the sufficient statistics
/// mean(x) and mean(log x). Solves log a - digamma(a) = log(mean) - mean_log
/// by Newton's method; the rate follows as shape / mean.
inline GammaFit fit_gamma_ml(double sample_mean, double sample_log_mean) {
    if (!(sample_mean > 0.0) || !std::isfinite(sample_mean) || !std::isfinite(sample_log_mean))
        throw InvalidInput("gamma fit needs a positive finite mean and a finite log mean");
    const double gap = std::log(sample_mean) - sample_log_mean;
    if (!(gap > min_jensen_gap))
        return {max_gamma_shape, max_gamma_shape / sample_mean, true};

    double shape = (3.0 - gap + std::sqrt((gap - 3.0) * (gap - 3.0) + 24.0 * gap)) / (12.0 * gap);
    for (int it = 0; it < 100; ++it) {
        const double f = std::log(shape) - digamma(shape) - gap;
        const double df = 1.0 / shape - trigamma(shape);
        double next = shape - f / df;
        if (!(next > 0.0)) next = 0.5 * shape;
        const bool done = std::abs(next - shape) <= 1e-13 * shape;
        shape = next;
        if (done || shape > max_gamma_shape) break;
    }
    if (shape >= max_gamma_shape) return {max_gamma_shape, max_gamma_shape / sample_mean, true};
    return {shape, shape / sample_mean, false};
}

/// Gamma(shape, rate) log density.
inline double gamma_log_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

} // namespace ordcrowd::numerics

#endif // ORDCROWD_NUMERICS_GAMMA_ML_HPP
