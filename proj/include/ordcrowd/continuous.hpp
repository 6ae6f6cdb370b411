#ifndef ORDCROWD_CONTINUOUS_HPP
#define ORDCROWD_CONTINUOUS_HPP

// Ord-Continuous-ML: ratings read as real values v_r with
// r_nm ~ N(z_m, 1/tau_n), fitted by alternating maximum likelihood. Pure ML
// lets tau_n grow without bound, so the precision update carries a small
// ridge and a hard cap.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/fit.hpp"

namespace ordcrowd::continuous {

inline constexpr double default_tau_cap = 1e6;
inline constexpr double default_ridge = 1e-8;

struct Params {
    std::vector<double> z;
    std::vector<double> tau;
    double tau_cap = default_tau_cap;
    double ridge = default_ridge;
};

struct FitResult {
    ModelFit fit;
    Params params;
    /// Annotators whose precision ended at the cap.
    std::vector<bool> capped;
};

/// One start suffices for this objective.
inline FitConfig default_config() {
    FitConfig c;
    c.restarts = 1;
    return c;
}

inline std::vector<double> instance_means(const RatingsTable& table, const OrdinalScale& scale) {
    std::vector<double> z(table.instances());
    for (std::size_t m = 0; m < table.instances(); ++m) {
        const auto rated = table.by_instance(m);
        if (rated.empty()) throw NoRatings("instance '" + table.instance_id(m) + "' has no ratings");
        double s = 0.0;
        for (std::size_t e : rated) s += scale.value(table.entry(e).level);
        z[m] = s / static_cast<double>(rated.size());
    }
    return z;
}

/// tau_n <- |l_n| / (sum of squared residuals + ridge), capped.
inline void update_tau(Params& p, const RatingsTable& table, const OrdinalScale& scale) {
    for (std::size_t n = 0; n < table.annotators(); ++n) {
        const auto rated = table.by_annotator(n);
        if (rated.empty()) {
            p.tau[n] = 1.0;
            continue;
        }
        double sq = 0.0;
        for (std::size_t e : rated) {
            const Rating& r = table.entry(e);
            const double d = scale.value(r.level) - p.z[r.instance];
            sq += d * d;
        }
        p.tau[n] = std::min(static_cast<double>(rated.size()) / (sq + p.ridge), p.tau_cap);
    }
}

/// z_m <- precision-weighted mean of its ratings.
inline void update_z(Params& p, const RatingsTable& table, const OrdinalScale& scale) {
    for (std::size_t m = 0; m < table.instances(); ++m) {
        double w = 0.0, wx = 0.0;
        for (std::size_t e : table.by_instance(m)) {
            const Rating& r = table.entry(e);
            w += p.tau[r.annotator];
            wx += p.tau[r.annotator] * scale.value(r.level);
        }
        if (!(w > 0.0)) throw NoRatings("instance '" + table.instance_id(m) + "' has no ratings");
        p.z[m] = wx / w;
    }
}

/// Gaussian log likelihood including the ridge term -tau_n ridge / 2.
inline double log_likelihood(const Params& p, const RatingsTable& table, const OrdinalScale& scale) {
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double ll = 0.0;
    for (const Rating& r : table.entries()) {
        const double d = scale.value(r.level) - p.z[r.instance];
        ll += 0.5 * std::log(p.tau[r.annotator]) - half_log_2pi - 0.5 * p.tau[r.annotator] * d * d;
    }
    for (std::size_t n = 0; n < table.annotators(); ++n)
        if (!table.by_annotator(n).empty()) ll -= 0.5 * p.tau[n] * p.ridge;
    return ll;
}

inline std::vector<double> predict(const Params& p) { return p.z; }

inline FitResult fit(const RatingsTable& table, const OrdinalScale& scale, const FitConfig& config = default_config()) {
    if (table.empty()) throw InvalidInput("cannot fit an empty ratings table");
    return best_of_restarts<FitResult>(config, [&](std::size_t, Rng&) {
        FitResult res;
        res.params.z = instance_means(table, scale);
        res.params.tau.assign(table.annotators(), 1.0);
        iterate_to_convergence(config, res.fit, [&] {
            update_tau(res.params, table, scale);
            update_z(res.params, table, scale);
            return log_likelihood(res.params, table, scale);
        });
        res.capped.resize(table.annotators());
        for (std::size_t n = 0; n < table.annotators(); ++n)
            res.capped[n] = res.params.tau[n] >= res.params.tau_cap;
        res.fit.z_hat = predict(res.params);
        return res;
    });
}

} // namespace ordcrowd::continuous

#endif // ORDCROWD_CONTINUOUS_HPP
