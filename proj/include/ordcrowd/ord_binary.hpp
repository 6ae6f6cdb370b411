#ifndef ORDCROWD_ORD_BINARY_HPP
#define ORDCROWD_ORD_BINARY_HPP

// Ord-Binary: each K-level label is split into K - 1 Frank-Hall indicators
// 1[level > k]. Every annotator has a sensitivity and a specificity per
// threshold (two-coin model); the ground truth keeps K valid codes only.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/fit.hpp"
#include "ordcrowd/numerics/special.hpp"

namespace ordcrowd::ord_binary {

/// bits[k] = 1[level > k + 1] for k = 0 .. K-2.
struct FrankHallCode {
    std::vector<std::uint8_t> bits;

    bool valid() const noexcept {
        for (std::size_t k = 1; k < bits.size(); ++k)
            if (bits[k] > bits[k - 1]) return false;
        return true;
    }
    bool operator==(const FrankHallCode&) const = default;
};

inline FrankHallCode encode(int level, int levels) {
    if (levels < 2 || level < 1 || level > levels) throw InvalidLevel("level out of range for encoding");
    FrankHallCode code;
    code.bits.resize(static_cast<std::size_t>(levels - 1));
    for (int k = 1; k < levels; ++k) code.bits[static_cast<std::size_t>(k - 1)] = level > k ? 1 : 0;
    return code;
}

inline int decode(const FrankHallCode& code) {
    if (!code.valid()) throw InvalidCode("Frank-Hall code is not monotone");
    int level = 1;
    for (auto b : code.bits) level += b;
    return level;
}

struct Params {
    std::vector<double> pi;                // K
    std::vector<std::vector<double>> sens; // N x (K-1): p(r~ = 1 | z~ = 1)
    std::vector<std::vector<double>> spec; // N x (K-1): p(r~ = 0 | z~ = 0)
};

using Posterior = std::vector<std::vector<double>>;

/// p(code | z = k) as a product of two-coin terms over the thresholds; `code`
/// may be any of the 2^(K-1) bit patterns.
inline double code_likelihood(const FrankHallCode& code, int k, const Params& p, std::size_t n) {
    double prob = 1.0;
    for (std::size_t t = 0; t < code.bits.size(); ++t) {
        const bool truth = k > static_cast<int>(t) + 1;
        const bool observed = code.bits[t] != 0;
        if (truth)
            prob *= observed ? p.sens[n][t] : 1.0 - p.sens[n][t];
        else
            prob *= observed ? 1.0 - p.spec[n][t] : p.spec[n][t];
    }
    return prob;
}

inline double rating_likelihood(int r, int k, const Params& p, std::size_t n) {
    return code_likelihood(encode(r, static_cast<int>(p.pi.size())), k, p, n);
}

namespace detail {

inline double log_rating_likelihood(int r, int k, const Params& p, std::size_t n) {
    double lp = 0.0;
    for (std::size_t t = 0; t + 1 < p.pi.size(); ++t) {
        const int thr = static_cast<int>(t) + 1;
        const bool truth = k > thr, observed = r > thr;
        if (truth)
            lp += std::log(observed ? p.sens[n][t] : 1.0 - p.sens[n][t]);
        else
            lp += std::log(observed ? 1.0 - p.spec[n][t] : p.spec[n][t]);
    }
    return lp;
}

inline void instance_log_joint(const Params& p, const RatingsTable& table, std::size_t m, std::vector<double>& logp) {
    const auto k_count = p.pi.size();
    for (std::size_t k = 0; k < k_count; ++k) logp[k] = std::log(p.pi[k]);
    for (std::size_t e : table.by_instance(m)) {
        const Rating& r = table.entry(e);
        for (std::size_t k = 0; k < k_count; ++k)
            logp[k] += log_rating_likelihood(r.level, static_cast<int>(k) + 1, p, r.annotator);
    }
}

} // namespace detail

/// Posterior over the K valid truths (invalid codes carry zero prior mass).
inline Posterior e_step(const Params& params, const RatingsTable& table) {
    const std::size_t k_count = params.pi.size();
    Posterior lambda(table.instances(), std::vector<double>(k_count));
    std::vector<double> logp(k_count);
    for (std::size_t m = 0; m < table.instances(); ++m) {
        detail::instance_log_joint(params, table, m, logp);
        const double norm = numerics::log_sum_exp(logp);
        if (!std::isfinite(norm)) throw NumericalFailure("all-zero posterior row for instance " + std::to_string(m));
        for (std::size_t k = 0; k < k_count; ++k) lambda[m][k] = std::exp(logp[k] - norm);
    }
    return lambda;
}

/// gamma[m][t] = p(z~_mt = 1) = sum_{k > t+1} lambda[m][k].
inline std::vector<std::vector<double>> threshold_posteriors(const Posterior& lambda) {
    std::vector<std::vector<double>> gamma(lambda.size());
    for (std::size_t m = 0; m < lambda.size(); ++m) {
        const std::size_t k_count = lambda[m].size();
        gamma[m].assign(k_count - 1, 0.0);
        for (std::size_t t = 0; t + 1 < k_count; ++t)
            for (std::size_t k = t + 1; k < k_count; ++k) gamma[m][t] += lambda[m][k];
    }
    return gamma;
}

/// Ratio updates for sensitivity/specificity with add-one smoothing
/// ((count + 1) / (total + 2)); pi from posterior averages.
inline Params m_step(const Posterior& lambda, const RatingsTable& table) {
    const auto k_count = static_cast<std::size_t>(table.levels());
    const std::size_t n_count = table.annotators();
    Params p;
    p.pi.assign(k_count, 0.0);
    for (const auto& row : lambda)
        for (std::size_t k = 0; k < k_count; ++k) p.pi[k] += row[k];
    for (double& v : p.pi) v /= static_cast<double>(lambda.size());

    const auto gamma = threshold_posteriors(lambda);
    std::vector<std::vector<double>> sens_num(n_count, std::vector<double>(k_count - 1, 1.0));
    std::vector<std::vector<double>> sens_den(n_count, std::vector<double>(k_count - 1, 2.0));
    auto spec_num = sens_num;
    auto spec_den = sens_den;
    for (const Rating& r : table.entries()) {
        for (std::size_t t = 0; t + 1 < k_count; ++t) {
            const double g = gamma[r.instance][t];
            const bool observed = r.level > static_cast<int>(t) + 1;
            sens_num[r.annotator][t] += observed ? g : 0.0;
            sens_den[r.annotator][t] += g;
            spec_num[r.annotator][t] += observed ? 0.0 : 1.0 - g;
            spec_den[r.annotator][t] += 1.0 - g;
        }
    }
    p.sens.assign(n_count, std::vector<double>(k_count - 1));
    p.spec.assign(n_count, std::vector<double>(k_count - 1));
    for (std::size_t n = 0; n < n_count; ++n)
        for (std::size_t t = 0; t + 1 < k_count; ++t) {
            p.sens[n][t] = sens_num[n][t] / sens_den[n][t];
            p.spec[n][t] = spec_num[n][t] / spec_den[n][t];
        }
    return p;
}

inline double log_likelihood(const Params& params, const RatingsTable& table) {
    std::vector<double> logp(params.pi.size());
    double total = 0.0;
    for (std::size_t m = 0; m < table.instances(); ++m) {
        if (table.by_instance(m).empty()) continue;
        detail::instance_log_joint(params, table, m, logp);
        total += numerics::log_sum_exp(logp);
    }
    return total;
}

/// Log likelihood plus the Beta(2, 2) log prior implied by the smoothing.
inline double log_posterior(const Params& params, const RatingsTable& table) {
    double prior = 0.0;
    for (std::size_t n = 0; n < params.sens.size(); ++n)
        for (std::size_t t = 0; t < params.sens[n].size(); ++t) {
            const double a = params.sens[n][t], b = params.spec[n][t];
            prior += std::log(a) + std::log1p(-a) + std::log(b) + std::log1p(-b);
        }
    return log_likelihood(params, table) + prior;
}

/// Uniform pi; sensitivities and specificities at 0.7 + U(-0.05, 0.05).
inline Params initial_params(const RatingsTable& table, Rng& rng) {
    const auto k_count = static_cast<std::size_t>(table.levels());
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    Params p;
    p.pi.assign(k_count, 1.0 / static_cast<double>(k_count));
    p.sens.assign(table.annotators(), std::vector<double>(k_count - 1));
    p.spec.assign(table.annotators(), std::vector<double>(k_count - 1));
    for (std::size_t n = 0; n < table.annotators(); ++n)
        for (std::size_t t = 0; t + 1 < k_count; ++t) {
            p.sens[n][t] = 0.7 + jitter(rng);
            p.spec[n][t] = 0.7 + jitter(rng);
        }
    return p;
}

inline std::vector<double> predict(const Posterior& lambda, const OrdinalScale& scale) {
    return posterior_mean(lambda, scale);
}

struct FitResult {
    ModelFit fit;
    Params params;
    Posterior posterior;
};

inline FitResult fit(const RatingsTable& table, const OrdinalScale& scale, const FitConfig& config = {}) {
    if (table.empty()) throw InvalidInput("cannot fit an empty ratings table");
    return best_of_restarts<FitResult>(config, [&](std::size_t, Rng& rng) {
        FitResult res;
        res.params = initial_params(table, rng);
        iterate_to_convergence(config, res.fit, [&] {
            res.posterior = e_step(res.params, table);
            res.params = m_step(res.posterior, table);
            return log_posterior(res.params, table);
        });
        res.posterior = e_step(res.params, table);
        res.fit.z_hat = predict(res.posterior, scale);
        return res;
    });
}

} // namespace ordcrowd::ord_binary

#endif // ORDCROWD_ORD_BINARY_HPP
