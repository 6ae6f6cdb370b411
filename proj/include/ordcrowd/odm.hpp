#ifndef ORDCROWD_ODM_HPP
#define ORDCROWD_ODM_HPP

// Ordinal-discrete-mixture model with variational Bayesian inference.
//
// Each rating r_nm comes from a two-component mixture selected by
// y_nm ~ Bernoulli(eps_n): with y = 1 a latent x_nm ~ N(z_m, 1/(tau_n delta_c(m)))
// is thresholded into the bin [b_{r-1}, b_r); with y = 0 the rating is drawn
// from the spam distribution pi. Priors: z_m ~ N(mu, 1/lambda),
// tau_n ~ Gamma(alpha, beta), delta_c ~ Gamma(phi, eta).
//
// The mean-field posterior q(z) q(tau) q(delta) q(x, y) is fitted by
// coordinate ascent; eps and (alpha, beta) are learned by type-II maximum
// likelihood between sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/fit.hpp"
#include "ordcrowd/numerics/gamma_ml.hpp"
#include "ordcrowd/numerics/special.hpp"
#include "ordcrowd/numerics/truncated_normal.hpp"

namespace ordcrowd::odm {

/// How the spam responsibility omega_nm is recomputed in the E-step.
enum class ResponsibilityRule {
    /// Exact coordinate-ascent optimum of the lower bound: uses E[log tau],
    /// E[log delta] and the entropy (bin mass) of q(x | y = 1).
    bound_optimal,
    /// Gaussian kernel sqrt(tau delta / 2pi) exp(-tau delta E[(x - z)^2] / 2)
    /// evaluated at the point estimates, without the bin mass.
    printed,
};

inline constexpr double epsilon_floor = 1e-4;

struct HyperParams {
    double alpha = 1.0; // shape of the expertise prior, learned
    double beta = 1.0;  // rate of the expertise prior, learned
    double phi = 10.0;  // fixed for identifiability
    double eta = 5.0;
    double mu = 0.0;
    double lambda = 0.1;
    std::vector<double> pi;
    std::vector<double> epsilon;
    OrdinalScale scale = OrdinalScale::standard(5);
    bool use_ordinal_link = true;
    bool use_spam_mixture = true;
    ResponsibilityRule responsibility = ResponsibilityRule::bound_optimal;

    /// pi uniform, mu = mean of the scale values, eps_n = 0.9 (1 without the
    /// spam component).
    static HyperParams defaults(const OrdinalScale& scale, std::size_t annotators) {
        HyperParams h;
        h.scale = scale;
        h.mu = scale.mean_value();
        h.pi.assign(static_cast<std::size_t>(scale.levels()), 1.0 / scale.levels());
        h.epsilon.assign(annotators, 0.9);
        return h;
    }

    void validate(std::size_t annotators) const {
        if (!(alpha > 0 && beta > 0 && phi > 0 && eta > 0 && lambda > 0))
            throw InvalidInput("alpha, beta, phi, eta and lambda must be positive");
        if (!std::isfinite(mu)) throw InvalidInput("mu must be finite");
        if (pi.size() != static_cast<std::size_t>(scale.levels()))
            throw InvalidInput("pi must have one entry per level");
        double s = 0.0;
        for (double p : pi) {
            if (!(p > 0.0)) throw InvalidInput("pi entries must be positive");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) throw InvalidInput("pi must sum to one");
        if (epsilon.size() != annotators) throw InvalidInput("epsilon must have one entry per annotator");
        for (double e : epsilon)
            if (!(e >= 0.0 && e <= 1.0)) throw InvalidInput("epsilon entries must lie in [0, 1]");
    }
};

/// Variational parameters. Per-rating vectors are indexed like table.entries().
struct VariationalState {
    std::vector<double> mu_m, lambda_m;  // q(z_m) = N(mu_m, 1/lambda_m)
    std::vector<double> alpha_n, beta_n; // q(tau_n) = Gamma(alpha_n, beta_n)
    std::vector<double> phi_c, eta_c;    // q(delta_c) = Gamma(phi_c, eta_c)
    std::vector<double> omega;           // q(y_nm = 1)
    std::vector<double> nu, rho;         // q(x_nm | y = 1) = TN(nu, 1/rho, bin)
    std::vector<double> xbar, x2bar;     // E[x], E[x^2] under q(x | y = 1)
    std::vector<double> x_entropy;       // entropy of q(x | y = 1)

    double tau_mean(std::size_t n) const { return alpha_n[n] / beta_n[n]; }
    double log_tau_mean(std::size_t n) const { return numerics::digamma(alpha_n[n]) - std::log(beta_n[n]); }
    double delta_mean(std::size_t c) const { return phi_c[c] / eta_c[c]; }
    double log_delta_mean(std::size_t c) const { return numerics::digamma(phi_c[c]) - std::log(eta_c[c]); }
    double z_second_moment(std::size_t m) const { return mu_m[m] * mu_m[m] + 1.0 / lambda_m[m]; }

    /// E_q[(x_nm - z_m)^2] for entry e on instance m.
    double expected_sq_residual(std::size_t e, std::size_t m) const {
        return x2bar[e] - 2.0 * xbar[e] * mu_m[m] + z_second_moment(m);
    }
};

namespace detail {

struct Summaries {
    std::vector<double> tau, log_tau, delta, log_delta;
};

inline Summaries summaries(const VariationalState& s) {
    Summaries out;
    const std::size_t n_count = s.alpha_n.size(), c_count = s.phi_c.size();
    out.tau.resize(n_count);
    out.log_tau.resize(n_count);
    out.delta.resize(c_count);
    out.log_delta.resize(c_count);
    for (std::size_t n = 0; n < n_count; ++n) {
        out.tau[n] = s.tau_mean(n);
        out.log_tau[n] = s.log_tau_mean(n);
    }
    for (std::size_t c = 0; c < c_count; ++c) {
        out.delta[c] = s.delta_mean(c);
        out.log_delta[c] = s.log_delta_mean(c);
    }
    return out;
}

inline const double log_2pi = std::log(2.0 * std::numbers::pi);

/// Expected log density of x under the y = 1 branch plus the entropy of
/// q(x | y = 1): the y = 1 contribution of rating e to the bound, excluding log eps.
inline double signal_branch(const VariationalState& s, std::size_t e, std::size_t m, double log_tau,
                            double log_delta, double precision) {
    return 0.5 * (log_tau + log_delta) - 0.5 * log_2pi -
           0.5 * precision * s.expected_sq_residual(e, m) + s.x_entropy[e];
}

} // namespace detail

/// Recomputes q(x_nm | y = 1) for entry e with location nu and precision rho.
inline void update_latent_x(VariationalState& s, std::size_t e, int level, double nu, double rho,
                            const HyperParams& h) {
    s.nu[e] = nu;
    s.rho[e] = rho;
    if (!h.use_ordinal_link) {
        const double v = h.scale.value(level);
        s.xbar[e] = v;
        s.x2bar[e] = v * v;
        s.x_entropy[e] = 0.0;
        return;
    }
    const double lo = h.scale.lower(level), hi = h.scale.upper(level);
    try {
        const auto mom = numerics::truncated_normal_moments(nu, 1.0 / rho, lo, hi);
        s.xbar[e] = mom.mean;
        s.x2bar[e] = mom.second_moment;
        s.x_entropy[e] = numerics::truncated_normal_entropy(nu, 1.0 / rho, mom);
    } catch (const DegenerateMass&) {
        // Uniform over the bin.
        const double mid = 0.5 * (lo + hi), w = hi - lo;
        s.xbar[e] = mid;
        s.x2bar[e] = mid * mid + w * w / 12.0;
        s.x_entropy[e] = std::log(w);
    }
}

/// Initial state: mu_m = mean observed value of instance m plus N(0, 0.25^2)
/// jitter (prior mu when unrated), lambda_m as if every rating were signal,
/// remaining posteriors at their priors,
/// omega = eps_n and q(x | y = 1) centred on mu_m.
inline VariationalState init_state(const RatingsTable& table, const CategoryMap& cats,
                                   const HyperParams& h, Rng& rng) {
    if (table.empty()) throw InvalidInput("cannot fit an empty ratings table");
    h.validate(table.annotators());
    const std::size_t m_count = table.instances(), n_count = table.annotators();
    const std::size_t c_count = cats.categories(), l_count = table.size();

    VariationalState s;
    s.mu_m.assign(m_count, h.mu);
    s.lambda_m.assign(m_count, h.lambda);
    s.alpha_n.assign(n_count, h.alpha);
    s.beta_n.assign(n_count, h.beta);
    s.phi_c.assign(c_count, h.phi);
    s.eta_c.assign(c_count, h.eta);
    s.omega.resize(l_count);
    s.nu.resize(l_count);
    s.rho.resize(l_count);
    s.xbar.resize(l_count);
    s.x2bar.resize(l_count);
    s.x_entropy.resize(l_count);

    std::normal_distribution<double> jitter(0.0, 0.25);
    for (std::size_t m = 0; m < m_count; ++m) {
        const auto rated = table.by_instance(m);
        if (rated.empty()) continue;
        double sum = 0.0;
        for (std::size_t e : rated) sum += h.scale.value(table.entry(e).level);
        s.mu_m[m] = sum / static_cast<double>(rated.size()) + jitter(rng);
        double weight = 0.0;
        for (std::size_t e : rated) weight += s.tau_mean(table.entry(e).annotator);
        s.lambda_m[m] = h.lambda + s.delta_mean(cats.category_of(m)) * weight;
    }
    for (std::size_t e = 0; e < l_count; ++e) {
        const Rating& r = table.entry(e);
        s.omega[e] = h.use_spam_mixture ? h.epsilon[r.annotator] : 1.0;
        const double rho = s.tau_mean(r.annotator) * s.delta_mean(cats.category_of(r.instance));
        update_latent_x(s, e, r.level, s.mu_m[r.instance], rho, h);
    }
    return s;
}

/// Phase 1 of the sweep: q(x, y) for every rating given the current q(z),
/// q(tau), q(delta).
inline void update_ratings(VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                           const HyperParams& h) {
    const auto sum = detail::summaries(s);
    for (std::size_t e = 0; e < table.size(); ++e) {
        const Rating& r = table.entry(e);
        const std::size_t c = cats.category_of(r.instance);
        const double precision = sum.tau[r.annotator] * sum.delta[c];
        update_latent_x(s, e, r.level, s.mu_m[r.instance], precision, h);

        if (!h.use_spam_mixture) {
            s.omega[e] = 1.0;
            continue;
        }
        const double eps = h.epsilon[r.annotator];
        if (eps >= 1.0) {
            s.omega[e] = 1.0;
            continue;
        }
        if (eps <= 0.0) {
            s.omega[e] = 0.0;
            continue;
        }
        double signal;
        if (h.responsibility == ResponsibilityRule::printed) {
            signal = 0.5 * std::log(precision) - 0.5 * detail::log_2pi -
                     0.5 * precision * s.expected_sq_residual(e, r.instance);
        } else {
            signal = detail::signal_branch(s, e, r.instance, sum.log_tau[r.annotator], sum.log_delta[c],
                                           precision);
        }
        const double spam = std::log(h.pi[static_cast<std::size_t>(r.level - 1)]);
        const double logit = std::log(eps) - std::log1p(-eps) + signal - spam;
        s.omega[e] = numerics::sigmoid(logit);
        if (!std::isfinite(s.omega[e]))
            throw NumericalFailure("non-finite responsibility", r.annotator, r.instance);
    }
}

/// Phase 2: q(z_m) for every instance.
inline void update_instances(VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                             const HyperParams& h) {
    std::vector<double> tau(table.annotators());
    for (std::size_t n = 0; n < tau.size(); ++n) tau[n] = s.tau_mean(n);
    for (std::size_t m = 0; m < table.instances(); ++m) {
        const double delta = s.delta_mean(cats.category_of(m));
        double weight = 0.0, weighted_x = 0.0;
        for (std::size_t e : table.by_instance(m)) {
            const double w = s.omega[e] * tau[table.entry(e).annotator];
            weight += w;
            weighted_x += w * s.xbar[e];
        }
        s.lambda_m[m] = h.lambda + delta * weight;
        s.mu_m[m] = (h.mu * h.lambda + delta * weighted_x) / s.lambda_m[m];
        if (!std::isfinite(s.mu_m[m]) || !(s.lambda_m[m] > 0.0))
            throw NumericalFailure("non-finite q(z) for instance " + std::to_string(m));
    }
}

/// Phase 3: q(tau_n) for every annotator.
inline void update_annotators(VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                              const HyperParams& h) {
    std::vector<double> delta(cats.categories());
    for (std::size_t c = 0; c < delta.size(); ++c) delta[c] = s.delta_mean(c);
    for (std::size_t n = 0; n < table.annotators(); ++n) {
        double count = 0.0, sq = 0.0;
        for (std::size_t e : table.by_annotator(n)) {
            const Rating& r = table.entry(e);
            count += s.omega[e];
            sq += delta[cats.category_of(r.instance)] * s.omega[e] * s.expected_sq_residual(e, r.instance);
        }
        s.alpha_n[n] = h.alpha + 0.5 * count;
        s.beta_n[n] = h.beta + 0.5 * sq;
        if (!std::isfinite(s.beta_n[n]) || !(s.beta_n[n] > 0.0))
            throw NumericalFailure("non-finite q(tau) for annotator " + std::to_string(n));
    }
}

/// Phase 4: q(delta_c) for every category.
inline void update_categories(VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                              const HyperParams& h) {
    std::vector<double> tau(table.annotators());
    for (std::size_t n = 0; n < tau.size(); ++n) tau[n] = s.tau_mean(n);
    for (std::size_t c = 0; c < cats.categories(); ++c) {
        double count = 0.0, sq = 0.0;
        for (std::size_t e : cats.ratings(c)) {
            const Rating& r = table.entry(e);
            count += s.omega[e];
            sq += tau[r.annotator] * s.omega[e] * s.expected_sq_residual(e, r.instance);
        }
        s.phi_c[c] = h.phi + 0.5 * count;
        s.eta_c[c] = h.eta + 0.5 * sq;
        if (!std::isfinite(s.eta_c[c]) || !(s.eta_c[c] > 0.0))
            throw NumericalFailure("non-finite q(delta) for category " + std::to_string(c));
    }
}

/// One coordinate-ascent sweep in the order q(x, y) -> q(z) -> q(tau) -> q(delta).
inline void e_step(VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                   const HyperParams& h) {
    update_ratings(s, table, cats, h);
    update_instances(s, table, cats, h);
    update_annotators(s, table, cats, h);
    update_categories(s, table, cats, h);
}

struct MStepReport {
    bool gamma_capped = false;
};

/// Type-II maximum likelihood for eps_n and (alpha, beta); mu, lambda, phi,
/// eta and pi stay fixed.
inline MStepReport m_step(const VariationalState& s, const RatingsTable& table, HyperParams& h) {
    MStepReport report;
    if (h.use_spam_mixture) {
        for (std::size_t n = 0; n < table.annotators(); ++n) {
            const auto rated = table.by_annotator(n);
            if (rated.empty()) continue;
            double sum = 0.0;
            for (std::size_t e : rated) sum += s.omega[e];
            h.epsilon[n] = std::clamp(sum / static_cast<double>(rated.size()), epsilon_floor,
                                      1.0 - epsilon_floor);
        }
    }
    const std::size_t n_count = s.alpha_n.size();
    double mean_tau = 0.0, mean_log_tau = 0.0;
    for (std::size_t n = 0; n < n_count; ++n) {
        mean_tau += s.tau_mean(n);
        mean_log_tau += s.log_tau_mean(n);
    }
    mean_tau /= static_cast<double>(n_count);
    mean_log_tau /= static_cast<double>(n_count);
    const auto g = numerics::fit_gamma_ml(mean_tau, mean_log_tau);
    h.alpha = g.shape;
    h.beta = g.rate;
    report.gamma_capped = g.capped;
    return report;
}

/// Decomposition of the variational lower bound.
struct ElboTerms {
    double ratings = 0.0;     // E[log p(r, x, y | z, tau, delta, eps, pi)] + H[q(x, y)]
    double z_prior = 0.0;     // E[log p(z)]
    double tau_prior = 0.0;   // E[log p(tau)]
    double delta_prior = 0.0; // E[log p(delta)]
    double z_entropy = 0.0;
    double tau_entropy = 0.0;
    double delta_entropy = 0.0;

    double total() const noexcept {
        return ratings + z_prior + tau_prior + delta_prior + z_entropy + tau_entropy + delta_entropy;
    }
};

namespace detail {

inline double gamma_cross(double shape, double rate, double q_shape, double q_rate) {
    const double mean = q_shape / q_rate;
    const double log_mean = numerics::digamma(q_shape) - std::log(q_rate);
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * log_mean - rate * mean;
}

inline double gamma_entropy(double shape, double rate) {
    return shape - std::log(rate) + std::lgamma(shape) + (1.0 - shape) * numerics::digamma(shape);
}

} // namespace detail

inline ElboTerms elbo_terms(const VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                            const HyperParams& h) {
    ElboTerms t;
    const auto sum = detail::summaries(s);
    for (std::size_t e = 0; e < table.size(); ++e) {
        const Rating& r = table.entry(e);
        const std::size_t c = cats.category_of(r.instance);
        const double signal = detail::signal_branch(s, e, r.instance, sum.log_tau[r.annotator], sum.log_delta[c],
                                                    sum.tau[r.annotator] * sum.delta[c]);
        if (!h.use_spam_mixture) {
            t.ratings += signal;
            continue;
        }
        const double w = s.omega[e];
        const double eps = h.epsilon[r.annotator];
        if (w > 0.0) t.ratings += w * (std::log(eps) + signal);
        if (w < 1.0) t.ratings += (1.0 - w) * (std::log1p(-eps) + std::log(h.pi[static_cast<std::size_t>(r.level - 1)]));
        t.ratings -= numerics::xlogx(w) + numerics::xlogx(1.0 - w);
    }
    for (std::size_t m = 0; m < s.mu_m.size(); ++m) {
        const double d = s.mu_m[m] - h.mu;
        t.z_prior += 0.5 * std::log(h.lambda) - 0.5 * detail::log_2pi - 0.5 * h.lambda * (d * d + 1.0 / s.lambda_m[m]);
        t.z_entropy += 0.5 * (detail::log_2pi + 1.0 - std::log(s.lambda_m[m]));
    }
    for (std::size_t n = 0; n < s.alpha_n.size(); ++n) {
        t.tau_prior += detail::gamma_cross(h.alpha, h.beta, s.alpha_n[n], s.beta_n[n]);
        t.tau_entropy += detail::gamma_entropy(s.alpha_n[n], s.beta_n[n]);
    }
    for (std::size_t c = 0; c < s.phi_c.size(); ++c) {
        t.delta_prior += detail::gamma_cross(h.phi, h.eta, s.phi_c[c], s.eta_c[c]);
        t.delta_entropy += detail::gamma_entropy(s.phi_c[c], s.eta_c[c]);
    }
    return t;
}

/// Variational lower bound F(q, theta) = E_q[log p(R, latents | theta)] + H[q].
inline double elbo(const VariationalState& s, const RatingsTable& table, const CategoryMap& cats,
                   const HyperParams& h) {
    return elbo_terms(s, table, cats, h).total();
}

/// Posterior mean of z under q; unrated instances keep the prior mean.
inline std::vector<double> predict(const VariationalState& s) { return s.mu_m; }

struct FitResult {
    ModelFit fit;
    VariationalState state;
    HyperParams hypers;
    std::vector<double> spamminess;     // 1 - eps_n
    std::vector<double> expertise;      // E[tau_n]
    std::vector<double> inv_difficulty; // E[delta_c]
    std::vector<double> restart_elbos;
};

/// One restart: init, then alternate e_step / m_step until the bound moves by
/// less than config.tol.
inline FitResult fit_once(const RatingsTable& table, const CategoryMap& cats, const HyperParams& hypers,
                          const FitConfig& config, Rng& rng) {
    FitResult res;
    res.hypers = hypers;
    if (!hypers.use_spam_mixture) res.hypers.epsilon.assign(table.annotators(), 1.0);
    res.state = init_state(table, cats, res.hypers, rng);
    iterate_to_convergence(config, res.fit, [&] {
        e_step(res.state, table, cats, res.hypers);
        m_step(res.state, table, res.hypers);
        return elbo(res.state, table, cats, res.hypers);
    });
    res.fit.z_hat = predict(res.state);
    res.spamminess.resize(table.annotators());
    res.expertise.resize(table.annotators());
    for (std::size_t n = 0; n < table.annotators(); ++n) {
        res.spamminess[n] = 1.0 - res.hypers.epsilon[n];
        res.expertise[n] = res.state.tau_mean(n);
    }
    res.inv_difficulty.resize(cats.categories());
    for (std::size_t c = 0; c < cats.categories(); ++c) res.inv_difficulty[c] = res.state.delta_mean(c);
    return res;
}

inline FitResult fit(const RatingsTable& table, const CategoryMap& cats, const HyperParams& hypers,
                     const FitConfig& config = {}) {
    std::vector<double> elbos;
    auto best = best_of_restarts<FitResult>(config, [&](std::size_t, Rng& rng) {
        auto r = fit_once(table, cats, hypers, config, rng);
        elbos.push_back(r.fit.objective);
        return r;
    });
    best.restart_elbos = std::move(elbos);
    return best;
}

} // namespace ordcrowd::odm

#endif // ORDCROWD_ODM_HPP
