#ifndef ORDCROWD_GLAD_HPP
#define ORDCROWD_GLAD_HPP

// Multi-class GLAD: p(r = z) = sigmoid(a_n b_m), with the remaining mass spread
// evenly over the K - 1 wrong labels. a_n is the annotator expertise (negative
// for adversarial annotators), b_m > 0 the inverse difficulty of instance m,
// optimized as log b_m. Priors a_n ~ N(1, 1), log b_m ~ N(1, 1).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/fit.hpp"
#include "ordcrowd/numerics/cg_minimize.hpp"
#include "ordcrowd/numerics/special.hpp"

namespace ordcrowd::glad {

struct Params {
    std::vector<double> pi;
    std::vector<double> a;     // per annotator
    std::vector<double> log_b; // per instance

    static Params initial(std::size_t annotators, std::size_t instances, std::size_t levels) {
        return {std::vector<double>(levels, 1.0 / static_cast<double>(levels)),
                std::vector<double>(annotators, 1.0), std::vector<double>(instances, 1.0)};
    }
};

using Posterior = std::vector<std::vector<double>>;

inline constexpr std::size_t cg_evals_per_m_step = 25;

/// p(r | z = k, a, b) for K levels.
inline double likelihood_term(int r, int k, double a, double b, int levels) {
    const double p = numerics::sigmoid(a * b);
    return r == k ? p : (1.0 - p) / static_cast<double>(levels - 1);
}

inline double log_likelihood_term(int r, int k, double a, double b, int levels) {
    const double x = a * b;
    return r == k ? numerics::log_sigmoid(x) : numerics::log_sigmoid(-x) - std::log(levels - 1.0);
}

namespace detail {

inline void instance_log_joint(const Params& p, const RatingsTable& table, std::size_t m, std::vector<double>& logp) {
    const int k_count = table.levels();
    const double b = std::exp(p.log_b[m]);
    for (int k = 1; k <= k_count; ++k) logp[static_cast<std::size_t>(k - 1)] = std::log(p.pi[static_cast<std::size_t>(k - 1)]);
    for (std::size_t e : table.by_instance(m)) {
        const Rating& r = table.entry(e);
        for (int k = 1; k <= k_count; ++k)
            logp[static_cast<std::size_t>(k - 1)] += log_likelihood_term(r.level, k, p.a[r.annotator], b, k_count);
    }
}

} // namespace detail

inline Posterior e_step(const Params& params, const RatingsTable& table) {
    const auto k_count = static_cast<std::size_t>(table.levels());
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

/// Expected complete-data log likelihood in (a, log b) plus the Gaussian log
/// priors, at x = [a_1..a_N, log b_1..log b_M]. Writes the gradient if grad
/// is non-empty.
inline double penalized_q(std::span<const double> x, std::span<double> grad, const Posterior& lambda,
                          const RatingsTable& table) {
    const std::size_t n_count = table.annotators();
    const int k_count = table.levels();
    const double log_wrong = std::log(k_count - 1.0);
    const bool want_grad = !grad.empty();
    double q = 0.0;
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    for (const Rating& r : table.entries()) {
        const double a = x[r.annotator];
        const double b = std::exp(x[n_count + r.instance]);
        const double ab = a * b;
        const double correct = lambda[r.instance][static_cast<std::size_t>(r.level - 1)];
        q += correct * numerics::log_sigmoid(ab) + (1.0 - correct) * (numerics::log_sigmoid(-ab) - log_wrong);
        if (want_grad) {
            const double d = correct - numerics::sigmoid(ab);
            grad[r.annotator] += b * d;
            grad[n_count + r.instance] += a * b * d;
        }
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - 1.0;
        q -= 0.5 * d * d;
        if (want_grad) grad[i] -= d;
    }
    return q;
}

/// Observed-data log likelihood plus log priors on (a, log b), the quantity
/// generalized EM increases.
inline double penalized_log_likelihood(const Params& p, const RatingsTable& table) {
    std::vector<double> logp(static_cast<std::size_t>(table.levels()));
    double total = 0.0;
    for (std::size_t m = 0; m < table.instances(); ++m) {
        if (table.by_instance(m).empty()) continue;
        detail::instance_log_joint(p, table, m, logp);
        total += numerics::log_sum_exp(logp);
    }
    for (double a : p.a) total -= 0.5 * (a - 1.0) * (a - 1.0);
    for (double lb : p.log_b) total -= 0.5 * (lb - 1.0) * (lb - 1.0);
    return total;
}

struct MStepResult {
    Params params;
    double q_before;
    double q_after;
    bool cg_stalled;
};

/// pi from posterior averages; (a, log b) by conjugate gradients on -Q
/// started at the current values.
inline MStepResult m_step(const Params& current, const Posterior& lambda, const RatingsTable& table,
                          std::size_t cg_evals = cg_evals_per_m_step) {
    const std::size_t n_count = table.annotators(), m_count = table.instances();
    const auto k_count = static_cast<std::size_t>(table.levels());
    MStepResult out{current, 0.0, 0.0, false};
    out.params.pi.assign(k_count, 0.0);
    for (const auto& row : lambda)
        for (std::size_t k = 0; k < k_count; ++k) out.params.pi[k] += row[k];
    for (double& v : out.params.pi) v /= static_cast<double>(m_count);

    std::vector<double> x0(n_count + m_count);
    std::copy(current.a.begin(), current.a.end(), x0.begin());
    std::copy(current.log_b.begin(), current.log_b.end(), x0.begin() + static_cast<std::ptrdiff_t>(n_count));
    auto neg_q = [&](std::span<const double> x, std::span<double> g) {
        const double q = penalized_q(x, g, lambda, table);
        for (double& v : g) v = -v;
        return -q;
    };
    numerics::CgOptions opt;
    opt.max_evals = cg_evals;
    const auto res = numerics::cg_minimize(neg_q, std::move(x0), opt);
    out.q_before = -res.f_start;
    out.q_after = -res.f;
    out.cg_stalled = res.line_search_stalled;
    std::copy(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(n_count), out.params.a.begin());
    std::copy(res.x.begin() + static_cast<std::ptrdiff_t>(n_count), res.x.end(), out.params.log_b.begin());
    return out;
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
    if (table.levels() < 2) throw InvalidInput("GLAD needs at least two levels");
    return best_of_restarts<FitResult>(config, [&](std::size_t, Rng& rng) {
        FitResult res;
        res.posterior = jittered_vote_shares(table, rng);
        res.params = Params::initial(table.annotators(), table.instances(), static_cast<std::size_t>(table.levels()));
        iterate_to_convergence(config, res.fit, [&] {
            res.params = m_step(res.params, res.posterior, table).params;
            const double obj = penalized_log_likelihood(res.params, table);
            res.posterior = e_step(res.params, table);
            return obj;
        });
        res.fit.z_hat = predict(res.posterior, scale);
        return res;
    });
}

} // namespace ordcrowd::glad

#endif // ORDCROWD_GLAD_HPP
