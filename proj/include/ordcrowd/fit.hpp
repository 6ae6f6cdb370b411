#ifndef ORDCROWD_FIT_HPP
#define ORDCROWD_FIT_HPP

// Restart/convergence protocol shared by every iterative model: run several
// independently seeded restarts, iterate each until the objective changes by
// less than `tol` (or `max_iters` is reached), keep the restart with the
// highest final objective.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"

namespace ordcrowd {

struct FitConfig {
    std::size_t restarts = 10;
    std::size_t max_iters = 1000;
    double tol = 0.1;
    std::uint64_t seed = 0;
};

/// Common summary of a fitted model.
struct ModelFit {
    std::vector<double> z_hat;
    double objective = 0.0;
    std::vector<double> trace;
    std::size_t iterations = 0;
    std::size_t restarts_run = 0;
    std::size_t best_restart = 0;
    bool converged = false;
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer; maps (seed, restart) to a well-mixed stream seed.
inline std::uint64_t restart_seed(std::uint64_t seed, std::size_t restart) noexcept {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(restart) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Drives the iterate-until-converged loop of one restart. `step` performs one
/// full iteration and returns the objective after it.
template <typename Step>
void iterate_to_convergence(const FitConfig& config, ModelFit& fit, Step&& step) {
    fit.trace.clear();
    fit.converged = false;
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        const double f = step();
        if (!std::isfinite(f)) throw NumericalFailure("objective became non-finite");
        fit.trace.push_back(f);
        fit.iterations = it + 1;
        if (fit.trace.size() >= 2 && std::abs(f - fit.trace[fit.trace.size() - 2]) < config.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.objective = fit.trace.empty() ? 0.0 : fit.trace.back();
}

/// Runs `run(restart_index, rng)` for every restart and returns the result with
/// the largest `.fit.objective`. Restarts failing numerically are skipped;
/// FitFailed is thrown when none succeeds.
template <typename Result, typename Run>
Result best_of_restarts(const FitConfig& config, Run&& run) {
    if (config.restarts == 0) throw InvalidInput("at least one restart is required");
    std::optional<Result> best;
    std::string failures;
    std::size_t ran = 0;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        Rng rng(restart_seed(config.seed, r));
        try {
            Result res = run(r, rng);
            ++ran;
            res.fit.best_restart = r;
            if (!best || res.fit.objective > best->fit.objective) best = std::move(res);
        } catch (const NumericalFailure& e) {
            failures += "\n  restart " + std::to_string(r) + ": " + e.what();
        } catch (const DegenerateMass& e) {
            failures += "\n  restart " + std::to_string(r) + ": " + e.what();
        }
    }
    if (!best) throw FitFailed("all restarts failed:" + failures);
    best->fit.restarts_run = ran;
    return std::move(*best);
}

/// Posterior-mean prediction sum_k lambda[m][k] v_k shared by the categorical models.
inline std::vector<double> posterior_mean(const std::vector<std::vector<double>>& lambda,
                                          const OrdinalScale& scale) {
    std::vector<double> z(lambda.size(), 0.0);
    for (std::size_t m = 0; m < lambda.size(); ++m)
        for (std::size_t k = 0; k < lambda[m].size(); ++k)
            z[m] += lambda[m][k] * scale.value(static_cast<int>(k) + 1);
    return z;
}

/// Per-instance normalized vote shares, jittered multiplicatively and
/// renormalized; unrated instances start uniform.
inline std::vector<std::vector<double>> jittered_vote_shares(const RatingsTable& table, Rng& rng,
                                                             double jitter = 0.1) {
    const auto k_count = static_cast<std::size_t>(table.levels());
    std::vector<std::vector<double>> lambda(table.instances(), std::vector<double>(k_count, 0.0));
    std::uniform_real_distribution<double> u(0.0, jitter);
    for (std::size_t m = 0; m < table.instances(); ++m) {
        auto& row = lambda[m];
        for (std::size_t e : table.by_instance(m))
            row[static_cast<std::size_t>(table.entry(e).level - 1)] += 1.0;
        double s = 0.0;
        for (double& v : row) {
            v += 1e-3 + u(rng);
            s += v;
        }
        for (double& v : row) v /= s;
    }
    return lambda;
}

} // namespace ordcrowd

#endif // ORDCROWD_FIT_HPP
