#ifndef ORDCROWD_NUMERICS_CG_MINIMIZE_HPP
#define ORDCROWD_NUMERICS_CG_MINIMIZE_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "ordcrowd/errors.hpp"

namespace ordcrowd::numerics {

/// f(x, grad) -> value; writes the gradient into grad.
template <typename F>
concept DifferentiableObjective = requires(F f, std::span<const double> x, std::span<double> g) {
    { f(x, g) } -> std::convertible_to<double>;
};

struct CgOptions {
    std::size_t max_evals = 100;
    double grad_tol = 1e-8;
    double rel_f_tol = 1e-10;
};

struct CgResult {
    std::vector<double> x;
    double f;
    double f_start;
    std::size_t evaluations;
    /// Two consecutive line searches failed; x is the best point seen.
    bool line_search_stalled;
    bool converged;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace detail

/// Polak-Ribiere nonlinear conjugate gradients with a cubic/quadratic
/// interpolating line search enforcing the strong Wolfe conditions
/// (sufficient decrease rho = 0.05, curvature sigma = 0.1). The search
/// schedule follows Rasmussen's minimize.m.
template <DifferentiableObjective F>
CgResult cg_minimize(F&& objective, std::vector<double> x0, const CgOptions& opt = {}) {
    constexpr double interp_guard = 0.1; // stay this far inside the bracket
    constexpr double extrap_limit = 3.0; // max growth of the step per extrapolation
    constexpr int max_ls_evals = 20;
    constexpr double max_slope_ratio = 100.0;
    constexpr double sig = 0.1;
    constexpr double rho = sig / 2.0;

    const std::size_t dim = x0.size();
    std::vector<double> x = std::move(x0);
    std::vector<double> df0(dim), df3(dim), s(dim), trial(dim), x_best(dim), df_best(dim);
    std::size_t evals = 0;

    auto eval_at = [&](double step, std::vector<double>& grad) {
        for (std::size_t i = 0; i < dim; ++i) trial[i] = x[i] + step * s[i];
        ++evals;
        return static_cast<double>(objective(std::span<const double>(trial), std::span<double>(grad)));
    };

    double f0 = objective(std::span<const double>(x), std::span<double>(df0));
    ++evals;
    if (!std::isfinite(f0) || !detail::all_finite(df0))
        throw InvalidStart("objective is not finite at the starting point");

    CgResult result{x, f0, f0, 0, false, false};
    for (std::size_t i = 0; i < dim; ++i) s[i] = -df0[i];
    double d0 = -detail::dot(s, s);
    if (std::sqrt(-d0) < opt.grad_tol) {
        result.evaluations = evals;
        result.converged = true;
        return result;
    }
    double x3 = 1.0 / (1.0 - d0);
    bool ls_failed = false;

    while (evals < opt.max_evals) {
        // Best point of this line search.
        x_best = x;
        double f_best = f0;
        df_best = df0;
        int budget = static_cast<int>(std::min<std::size_t>(max_ls_evals, opt.max_evals - evals));

        double x1 = 0, f1 = 0, d1 = 0;
        double x2 = 0, f2 = f0, d2 = d0;
        double f3 = f0, d3 = d0;
        double x4 = 0, f4 = 0, d4 = 0;

        auto track_best = [&](double step) {
            if (f3 < f_best) {
                for (std::size_t i = 0; i < dim; ++i) x_best[i] = x[i] + step * s[i];
                f_best = f3;
                df_best = df3;
            }
        };

        // Extrapolate until the step brackets a Wolfe point.
        while (true) {
            x2 = 0;
            f2 = f0;
            d2 = d0;
            f3 = f0;
            df3 = df0;
            bool ok = false;
            while (!ok && budget > 0) {
                --budget;
                f3 = eval_at(x3, df3);
                if (std::isfinite(f3) && detail::all_finite(df3))
                    ok = true;
                else
                    x3 = 0.5 * (x2 + x3);
            }
            if (!ok) {
                f3 = f0;
                df3 = df0;
            }
            track_best(x3);
            d3 = detail::dot(df3, s);
            if (d3 > sig * d0 || f3 > f0 + x3 * rho * d0 || budget == 0) break;
            x1 = x2;
            f1 = f2;
            d1 = d2;
            x2 = x3;
            f2 = f3;
            d2 = d3;
            const double a = 6.0 * (f1 - f2) + 3.0 * (d2 + d1) * (x2 - x1);
            const double b = 3.0 * (f2 - f1) - (2.0 * d1 + d2) * (x2 - x1);
            const double disc = b * b - a * d1 * (x2 - x1);
            x3 = disc >= 0.0 ? x1 - d1 * (x2 - x1) * (x2 - x1) / (b + std::sqrt(disc))
                             : std::numeric_limits<double>::quiet_NaN();
            if (!std::isfinite(x3) || x3 < 0.0 || x3 > x2 * extrap_limit)
                x3 = x2 * extrap_limit;
            else if (x3 < x2 + interp_guard * (x2 - x1))
                x3 = x2 + interp_guard * (x2 - x1);
        }

        // Interpolate inside the bracket until the strong Wolfe conditions hold.
        while ((std::abs(d3) > -sig * d0 || f3 > f0 + x3 * rho * d0) && budget > 0) {
            if (d3 > 0.0 || f3 > f0 + x3 * rho * d0) {
                x4 = x3;
                f4 = f3;
                d4 = d3;
            } else {
                x2 = x3;
                f2 = f3;
                d2 = d3;
            }
            if (f4 > f0) {
                x3 = x2 - (0.5 * d2 * (x4 - x2) * (x4 - x2)) / (f4 - f2 - d2 * (x4 - x2));
            } else {
                const double a = 6.0 * (f2 - f4) / (x4 - x2) + 3.0 * (d4 + d2);
                const double b = 3.0 * (f4 - f2) - (2.0 * d2 + d4) * (x4 - x2);
                const double disc = b * b - a * d2 * (x4 - x2) * (x4 - x2);
                x3 = disc >= 0.0 ? x2 + (std::sqrt(disc) - b) / a : std::numeric_limits<double>::quiet_NaN();
            }
            if (!std::isfinite(x3)) x3 = 0.5 * (x2 + x4);
            x3 = std::max(std::min(x3, x4 - interp_guard * (x4 - x2)), x2 + interp_guard * (x4 - x2));
            f3 = eval_at(x3, df3);
            --budget;
            if (!std::isfinite(f3) || !detail::all_finite(df3)) {
                // Treat a non-finite trial as an overshoot.
                f3 = std::numeric_limits<double>::infinity();
                d3 = std::numeric_limits<double>::infinity();
                x4 = x3;
                f4 = f3;
                d4 = 0.0;
                continue;
            }
            track_best(x3);
            d3 = detail::dot(df3, s);
        }

        if (std::abs(d3) < -sig * d0 && f3 < f0 + x3 * rho * d0) {
            for (std::size_t i = 0; i < dim; ++i) x[i] += x3 * s[i];
            const double f_prev = f0;
            f0 = f3;
            const double g33 = detail::dot(df3, df3);
            const double beta = (g33 - detail::dot(df0, df3)) / detail::dot(df0, df0);
            for (std::size_t i = 0; i < dim; ++i) s[i] = beta * s[i] - df3[i];
            df0 = df3;
            const double d_prev = d0;
            d0 = detail::dot(df0, s);
            if (d0 > 0.0) {
                for (std::size_t i = 0; i < dim; ++i) s[i] = -df0[i];
                d0 = -detail::dot(s, s);
            }
            x3 = x3 * std::min(max_slope_ratio, d_prev / (d0 - std::numeric_limits<double>::min()));
            ls_failed = false;
            if (std::sqrt(g33) < opt.grad_tol ||
                std::abs(f_prev - f0) < opt.rel_f_tol * std::max(std::abs(f_prev), std::abs(f0))) {
                result.converged = true;
                break;
            }
        } else {
            x = x_best;
            f0 = f_best;
            df0 = df_best;
            if (ls_failed || evals >= opt.max_evals) {
                result.line_search_stalled = ls_failed;
                break;
            }
            for (std::size_t i = 0; i < dim; ++i) s[i] = -df0[i];
            d0 = -detail::dot(s, s);
            x3 = 1.0 / (1.0 - d0);
            ls_failed = true;
        }
    }

    result.x = std::move(x);
    result.f = f0;
    result.evaluations = evals;
    return result;
}

} // namespace ordcrowd::numerics

#endif // ORDCROWD_NUMERICS_CG_MINIMIZE_HPP
