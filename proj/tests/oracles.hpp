#ifndef ORDCROWD_TESTS_ORACLES_HPP
#define ORDCROWD_TESTS_ORACLES_HPP

// Reference computations shared by the unit tests and the acceptance runner.
// Nothing here calls into the library's numerics.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/odm.hpp"

namespace oracle {

using namespace ordcrowd;

inline const double log_2pi_q = std::log(2.0 * std::numbers::pi);

template <typename F>
inline double gk(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

template <typename F>
inline double half_line(F f) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

inline double gamma_log_density(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double normal_log_density(double x, double mean, double precision) {
    return 0.5 * std::log(precision) - 0.5 * log_2pi_q - 0.5 * precision * (x - mean) * (x - mean);
}

// E_q[log p(x | prior)] + H[q] for gamma prior / posterior, by quadrature.
inline double gamma_kl_terms(double prior_shape, double prior_rate, double q_shape, double q_rate) {
    return half_line([&](double x) {
        if (x <= 0.0) return 0.0;
        const double lq = gamma_log_density(x, q_shape, q_rate);
        const double q = std::exp(lq);
        return q == 0.0 ? 0.0 : q * (gamma_log_density(x, prior_shape, prior_rate) - lq);
    });
}

inline double gamma_log_mean(double shape, double rate) {
    return half_line([&](double x) {
        if (x <= 0.0) return 0.0;
        const double q = std::exp(gamma_log_density(x, shape, rate));
        return q == 0.0 ? 0.0 : q * std::log(x);
    });
}

// Lower bound evaluated from the variational parameters alone (mu_m, lambda_m,
// alpha_n, beta_n, phi_c, eta_c, omega, nu, rho); every expectation by quadrature.
inline double oracle_elbo(const odm::VariationalState& s, const RatingsTable& t, const CategoryMap& cats,
                   const odm::HyperParams& h) {
    double total = 0.0;
    for (std::size_t e = 0; e < t.size(); ++e) {
        const Rating& r = t.entry(e);
        const std::size_t c = cats.category_of(r.instance);
        const double mu = s.mu_m[r.instance], ez2 = mu * mu + 1.0 / s.lambda_m[r.instance];
        const double tau = s.alpha_n[r.annotator] / s.beta_n[r.annotator];
        const double delta = s.phi_c[c] / s.eta_c[c];
        double sq, ent;
        if (h.use_ordinal_link) {
            const double lo = h.scale.lower(r.level), hi = h.scale.upper(r.level);
            const double nu = s.nu[e], rho = s.rho[e];
            const double mass = gk([&](double x) { return std::exp(normal_log_density(x, nu, rho)); }, lo, hi);
            auto q = [&](double x) { return std::exp(normal_log_density(x, nu, rho)) / mass; };
            sq = gk([&](double x) { return q(x) * (x * x - 2.0 * x * mu); }, lo, hi) + ez2;
            ent = -gk([&](double x) {
                const double v = q(x);
                return v > 0.0 ? v * std::log(v) : 0.0;
            }, lo, hi);
        } else {
            const double v = h.scale.value(r.level);
            sq = v * v - 2.0 * v * mu + ez2;
            ent = 0.0;
        }
        const double signal = 0.5 * (gamma_log_mean(s.alpha_n[r.annotator], s.beta_n[r.annotator]) +
                                     gamma_log_mean(s.phi_c[c], s.eta_c[c])) -
                              0.5 * log_2pi_q - 0.5 * tau * delta * sq + ent;
        if (!h.use_spam_mixture) {
            total += signal;
            continue;
        }
        const double w = s.omega[e], eps = h.epsilon[r.annotator];
        const double pi = h.pi[static_cast<std::size_t>(r.level - 1)];
        total += w * (std::log(eps) + signal) + (1.0 - w) * (std::log(1.0 - eps) + std::log(pi));
        if (w > 0.0) total -= w * std::log(w);
        if (w < 1.0) total -= (1.0 - w) * std::log(1.0 - w);
    }
    for (std::size_t m = 0; m < s.mu_m.size(); ++m) {
        const double mu = s.mu_m[m], prec = s.lambda_m[m], sd = 1.0 / std::sqrt(prec);
        total += gk([&](double z) {
            const double lq = normal_log_density(z, mu, prec);
            return std::exp(lq) * (normal_log_density(z, h.mu, h.lambda) - lq);
        }, mu - 12.0 * sd, mu + 12.0 * sd);
    }
    for (std::size_t n = 0; n < s.alpha_n.size(); ++n)
        total += gamma_kl_terms(h.alpha, h.beta, s.alpha_n[n], s.beta_n[n]);
    for (std::size_t c = 0; c < s.phi_c.size(); ++c) total += gamma_kl_terms(h.phi, h.eta, s.phi_c[c], s.eta_c[c]);
    return total;
}

template <typename F>
inline double integrate(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, 1e-12);
}

struct Quadrature {
    double mean, second, log_mass, entropy;
};

// Moments of N(mu, var) restricted to [l, u] by adaptive Gauss-Kronrod on the
// standardized density, rescaled by exp(c^2 / 2) so tail bins stay O(1).
inline Quadrature quadrature_moments(double mu, double var, double l, double u) {
    const double sd = std::sqrt(var);
    const double a = (l - mu) / sd, b = (u - mu) / sd;
    const double c = (a > 0.0) ? a : (b < 0.0 ? b : 0.0);
    auto f = [&](double t) { return std::exp(-0.5 * (t * t - c * c)); };
    const double z0 = integrate(f, a, b);
    const double z1 = integrate([&](double t) { return t * f(t); }, a, b);
    const double z2 = integrate([&](double t) { return t * t * f(t); }, a, b);
    const double m1 = z1 / z0, m2 = z2 / z0;
    const double log_mass = std::log(z0) - 0.5 * c * c - 0.5 * std::log(2.0 * std::numbers::pi);
    // -E[log q] in x units: q(x) = phi(t) / (sd * mass)
    const double ent = 0.5 * std::log(2.0 * std::numbers::pi) + 0.5 * m2 + std::log(sd) + log_mass;
    return {mu + sd * m1, mu * mu + 2.0 * mu * sd * m1 + var * m2, log_mass, ent};
}

// Profile log likelihood of the gamma shape with the rate at its optimum.
inline double profile(double a, double mean, double log_mean) {
    return a * std::log(a / mean) - std::lgamma(a) + (a - 1.0) * log_mean - a;
}

inline double grid_search_shape(double mean, double log_mean) {
    double lo = std::log(1e-3), hi = std::log(1e5);
    for (int round = 0; round < 6; ++round) {
        const int points = 2000;
        double best = lo, best_v = -INFINITY;
        for (int i = 0; i <= points; ++i) {
            const double la = lo + (hi - lo) * i / points;
            const double v = profile(std::exp(la), mean, log_mean);
            if (v > best_v) {
                best_v = v;
                best = la;
            }
        }
        const double step = (hi - lo) / points;
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    return std::exp(0.5 * (lo + hi));
}

// Posterior marginals by enumerating all K^M joint truth assignments.
// `lik(m, k)` is the probability of instance m's ratings given z_m = k.
inline std::vector<std::vector<double>> enumerate_posterior(
    std::size_t m_count, std::size_t k_count, const std::vector<double>& pi,
    const std::function<double(std::size_t, std::size_t)>& lik) {
    std::vector<std::vector<double>> marg(m_count, std::vector<double>(k_count, 0.0));
    std::vector<std::size_t> z(m_count, 0);
    double total = 0.0;
    while (true) {
        double p = 1.0;
        for (std::size_t m = 0; m < m_count; ++m) p *= pi[z[m]] * lik(m, z[m]);
        total += p;
        for (std::size_t m = 0; m < m_count; ++m) marg[m][z[m]] += p;
        std::size_t i = 0;
        while (i < m_count && ++z[i] == k_count) z[i++] = 0;
        if (i == m_count) break;
    }
    for (auto& row : marg)
        for (double& v : row) v /= total;
    return marg;
}

// NDCG by counting each item's rank directly; ties go to the lower index.
inline double ndcg_by_rank(const std::vector<double>& rel, const std::vector<double>& score) {
    const std::size_t n = rel.size();
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rank = 0, ideal_rank = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (score[j] > score[i] || (score[j] == score[i] && j < i)) ++rank;
            if (rel[j] > rel[i] || (rel[j] == rel[i] && j < i)) ++ideal_rank;
        }
        dcg += (std::pow(2.0, rel[i]) - 1.0) / std::log2(rank + 2.0);
        idcg += (std::pow(2.0, rel[i]) - 1.0) / std::log2(ideal_rank + 2.0);
    }
    return idcg == 0.0 ? 1.0 : dcg / idcg;
}

} // namespace oracle

#endif // ORDCROWD_TESTS_ORACLES_HPP
