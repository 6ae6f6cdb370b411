#ifndef ORDCROWD_DAWID_SKENE_HPP
#define ORDCROWD_DAWID_SKENE_HPP

// Dawid-Skene: ordinal labels treated as K unordered classes, one K x K
// confusion matrix per annotator, fitted by EM. A symmetric Dirichlet(1)
// prior on each confusion row enters the M-step as add-one smoothing.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/fit.hpp"
#include "ordcrowd/numerics/special.hpp"

namespace ordcrowd::dawid_skene {

struct Params {
    std::vector<double> pi;                             // p(z = k)
    std::vector<std::vector<std::vector<double>>> phi; // phi[n][k][j] = p(r = j | z = k)

    std::size_t levels() const noexcept { return pi.size(); }

    static Params uniform(std::size_t annotators, std::size_t levels) {
        Params p;
        p.pi.assign(levels, 1.0 / static_cast<double>(levels));
        p.phi.assign(annotators, std::vector<std::vector<double>>(
                                     levels, std::vector<double>(levels, 1.0 / static_cast<double>(levels))));
        return p;
    }
};

/// q(z_m = k), one row per instance.
using Posterior = std::vector<std::vector<double>>;

inline constexpr double dirichlet_smoothing = 1.0;

/// lambda_mk ∝ pi_k prod_n phi[n][k][r_nm], normalized in log space.
inline Posterior e_step(const Params& params, const RatingsTable& table) {
    const std::size_t k_count = params.levels();
    Posterior lambda(table.instances(), std::vector<double>(k_count));
    std::vector<double> logp(k_count);
    for (std::size_t m = 0; m < table.instances(); ++m) {
        for (std::size_t k = 0; k < k_count; ++k) logp[k] = std::log(params.pi[k]);
        for (std::size_t e : table.by_instance(m)) {
            const Rating& r = table.entry(e);
            const auto j = static_cast<std::size_t>(r.level - 1);
            for (std::size_t k = 0; k < k_count; ++k) logp[k] += std::log(params.phi[r.annotator][k][j]);
        }
        const double norm = numerics::log_sum_exp(logp);
        if (!std::isfinite(norm)) throw NumericalFailure("all-zero posterior row for instance " + std::to_string(m));
        for (std::size_t k = 0; k < k_count; ++k) lambda[m][k] = std::exp(logp[k] - norm);
    }
    return lambda;
}

/// pi_k = mean_m lambda_mk; phi[n][k][j] ∝ sum_m lambda_mk 1[r_nm = j] + 1.
inline Params m_step(const Posterior& lambda, const RatingsTable& table) {
    const auto k_count = static_cast<std::size_t>(table.levels());
    Params p;
    p.pi.assign(k_count, 0.0);
    for (const auto& row : lambda)
        for (std::size_t k = 0; k < k_count; ++k) p.pi[k] += row[k];
    for (double& v : p.pi) v /= static_cast<double>(lambda.size());

    p.phi.assign(table.annotators(),
                 std::vector<std::vector<double>>(k_count, std::vector<double>(k_count, dirichlet_smoothing)));
    for (const Rating& r : table.entries()) {
        const auto j = static_cast<std::size_t>(r.level - 1);
        for (std::size_t k = 0; k < k_count; ++k) p.phi[r.annotator][k][j] += lambda[r.instance][k];
    }
    for (auto& confusion : p.phi)
        for (auto& row : confusion) {
            double s = 0.0;
            for (double v : row) s += v;
            for (double& v : row) v /= s;
        }
    return p;
}

/// Observed-data log likelihood sum_m log sum_k pi_k prod_n phi[n][k][r_nm].
inline double log_likelihood(const Params& params, const RatingsTable& table) {
    const std::size_t k_count = params.levels();
    std::vector<double> logp(k_count);
    double total = 0.0;
    for (std::size_t m = 0; m < table.instances(); ++m) {
        const auto rated = table.by_instance(m);
        if (rated.empty()) continue;
        for (std::size_t k = 0; k < k_count; ++k) logp[k] = std::log(params.pi[k]);
        for (std::size_t e : rated) {
            const Rating& r = table.entry(e);
            for (std::size_t k = 0; k < k_count; ++k)
                logp[k] += std::log(params.phi[r.annotator][k][static_cast<std::size_t>(r.level - 1)]);
        }
        total += numerics::log_sum_exp(logp);
    }
    return total;
}

/// Log likelihood plus the Dirichlet log prior (up to a constant): the
/// quantity EM with add-one smoothing increases monotonically.
inline double log_posterior(const Params& params, const RatingsTable& table) {
    double prior = 0.0;
    for (const auto& confusion : params.phi)
        for (const auto& row : confusion)
            for (double v : row) prior += dirichlet_smoothing * std::log(v);
    return log_likelihood(params, table) + prior;
}

inline std::vector<double> predict(const Posterior& lambda, const OrdinalScale& scale) {
    return posterior_mean(lambda, scale);
}

struct FitResult {
    ModelFit fit;
    Params params;
    Posterior posterior;
};

/// EM from jittered vote shares; the trace holds log_posterior after each
/// M-step.
inline FitResult fit(const RatingsTable& table, const OrdinalScale& scale, const FitConfig& config = {}) {
    if (table.empty()) throw InvalidInput("cannot fit an empty ratings table");
    return best_of_restarts<FitResult>(config, [&](std::size_t, Rng& rng) {
        FitResult res;
        res.posterior = jittered_vote_shares(table, rng);
        iterate_to_convergence(config, res.fit, [&] {
            res.params = m_step(res.posterior, table);
            const double obj = log_posterior(res.params, table);
            res.posterior = e_step(res.params, table);
            return obj;
        });
        res.fit.z_hat = predict(res.posterior, scale);
        return res;
    });
}

} // namespace ordcrowd::dawid_skene

#endif // ORDCROWD_DAWID_SKENE_HPP
