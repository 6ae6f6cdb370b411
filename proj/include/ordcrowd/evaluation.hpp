#ifndef ORDCROWD_EVALUATION_HPP
#define ORDCROWD_EVALUATION_HPP

// Accuracy metrics (MSE, Pearson correlation, per-query NDCG), fake-spammer
// injection and a sampler for the ordinal mixture generative process.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ordcrowd/dataset.hpp"
#include "ordcrowd/errors.hpp"
#include "ordcrowd/fit.hpp"

namespace ordcrowd::evaluation {

inline double mse(std::span<const double> z_true, std::span<const double> z_hat,
                  std::span<const std::size_t> coverage) {
    if (coverage.empty()) throw InvalidInput("MSE needs at least one covered instance");
    double s = 0.0;
    for (std::size_t m : coverage) {
        const double d = z_true[m] - z_hat[m];
        s += d * d;
    }
    return s / static_cast<double>(coverage.size());
}

inline double pearson(std::span<const double> z_true, std::span<const double> z_hat,
                      std::span<const std::size_t> coverage) {
    if (coverage.size() < 2) throw UndefinedCorrelation("correlation needs at least two covered instances");
    const double n = static_cast<double>(coverage.size());
    double mt = 0.0, mh = 0.0;
    for (std::size_t m : coverage) {
        mt += z_true[m];
        mh += z_hat[m];
    }
    mt /= n;
    mh /= n;
    double stt = 0.0, shh = 0.0, sth = 0.0;
    for (std::size_t m : coverage) {
        const double a = z_true[m] - mt, b = z_hat[m] - mh;
        stt += a * a;
        shh += b * b;
        sth += a * b;
    }
    if (!(stt > 0.0) || !(shh > 0.0)) throw UndefinedCorrelation("correlation undefined for zero variance");
    return std::clamp(sth / std::sqrt(stt * shh), -1.0, 1.0);
}

struct NdcgResult {
    double mean = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> per_query;
};

/// NDCG of one ranked list: items ordered by score descending (ties by
/// position), gain 2^rel - 1, discount log2(rank + 1), full depth.
/// A list whose ideal DCG is zero scores 1.
inline double ndcg_list(std::span<const double> relevance, std::span<const double> score) {
    const std::size_t n = relevance.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    std::vector<double> ideal(relevance.begin(), relevance.end());
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double discount = std::log2(static_cast<double>(i) + 2.0);
        dcg += (std::exp2(relevance[order[i]]) - 1.0) / discount;
        idcg += (std::exp2(ideal[i]) - 1.0) / discount;
    }
    if (idcg == 0.0) return 1.0;
    return dcg / idcg;
}

/// Mean NDCG over the queries of `queries`, each restricted to covered
/// instances; queries with fewer than two covered instances are skipped.
/// Score ties are broken by instance id when `instance_ids` is given, by
/// instance index otherwise.
inline NdcgResult ndcg(std::span<const double> z_true, std::span<const double> z_hat,
                       std::span<const std::size_t> coverage, const CategoryMap& queries,
                       std::span<const std::string> instance_ids = {}) {
    std::vector<std::vector<std::size_t>> members(queries.categories());
    std::vector<std::size_t> sorted(coverage.begin(), coverage.end());
    if (instance_ids.empty())
        std::sort(sorted.begin(), sorted.end());
    else
        std::sort(sorted.begin(), sorted.end(),
                  [&](std::size_t a, std::size_t b) { return instance_ids[a] < instance_ids[b]; });
    for (std::size_t m : sorted) members[queries.category_of(m)].push_back(m);
    NdcgResult out;
    double total = 0.0;
    std::vector<double> rel, score;
    for (std::size_t q = 0; q < members.size(); ++q) {
        if (members[q].size() < 2) continue;
        rel.clear();
        score.clear();
        for (std::size_t m : members[q]) {
            rel.push_back(z_true[m]);
            score.push_back(z_hat[m]);
        }
        const double v = ndcg_list(rel, score);
        out.per_query[queries.category_id(q)] = v;
        total += v;
    }
    if (!out.per_query.empty()) out.mean = total / static_cast<double>(out.per_query.size());
    return out;
}

struct EvalReport {
    double mse = 0.0;
    double correlation = std::numeric_limits<double>::quiet_NaN();
    double ndcg = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> per_query_ndcg;
    std::size_t covered = 0;
};

/// All three metrics over the covered instances. An undefined correlation is
/// reported as NaN.
inline EvalReport evaluate(const GroundTruth& truth, std::span<const double> z_hat, const CategoryMap& queries,
                           std::span<const std::string> instance_ids = {}) {
    const auto cov = truth.coverage();
    EvalReport r;
    r.covered = cov.size();
    r.mse = mse(truth.z, z_hat, cov);
    try {
        r.correlation = pearson(truth.z, z_hat, cov);
    } catch (const UndefinedCorrelation&) {
    }
    auto nd = ndcg(truth.z, z_hat, cov, queries, instance_ids);
    r.ndcg = nd.mean;
    r.per_query_ndcg = std::move(nd.per_query);
    return r;
}

inline void write_report_header(std::ostream& out) { out << "method\tspam_level\tmse\tcorrelation\tndcg\n"; }

inline void write_report_row(std::ostream& out, const std::string& method, std::size_t spam_level,
                             const EvalReport& r) {
    out << method << '\t' << spam_level << '\t' << r.mse << '\t' << r.correlation << '\t' << r.ndcg << '\n';
}

// ---------------------------------------------------------------------------
// Spam injection

struct SpamConfig {
    std::size_t fake_per_instance = 0; // 0..9
    std::uint64_t seed = 0;
};

/// round(M * f / (|L| / N)), at least f so that no fake annotator rates an
/// instance twice.
inline std::size_t fake_annotator_count(const RatingsTable& table, std::size_t fake_per_instance) {
    if (fake_per_instance == 0) return 0;
    const double load = table.mean_annotator_load();
    const double wanted = load > 0.0 ? std::round(static_cast<double>(table.instances() * fake_per_instance) / load) : 0.0;
    return std::max(static_cast<std::size_t>(wanted), fake_per_instance);
}

/// Adds fake_per_instance uniformly random ratings to every instance, spread
/// round-robin over fake annotators whose average load matches the real one.
/// Original ratings keep their indices.
inline RatingsTable inject_spam(const RatingsTable& table, const SpamConfig& cfg) {
    if (cfg.fake_per_instance > 9) throw InvalidInput("fake_per_instance must lie in 0..9");
    if (cfg.fake_per_instance == 0) return table;
    const std::size_t n_fake = fake_annotator_count(table, cfg.fake_per_instance);

    std::unordered_set<std::string> taken(table.annotator_ids().begin(), table.annotator_ids().end());
    std::string prefix = "spam_";
    auto collides = [&] {
        for (std::size_t i = 0; i < n_fake; ++i)
            if (taken.count(prefix + std::to_string(i))) return true;
        return false;
    };
    while (collides()) prefix = "_" + prefix;

    std::vector<std::string> annotators = table.annotator_ids();
    const std::size_t first_fake = annotators.size();
    for (std::size_t i = 0; i < n_fake; ++i) annotators.push_back(prefix + std::to_string(i));

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(table.instances());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> level(1, table.levels());

    std::vector<Rating> entries = table.entries();
    entries.reserve(entries.size() + order.size() * cfg.fake_per_instance);
    std::size_t slot = 0;
    for (std::size_t m : order)
        for (std::size_t j = 0; j < cfg.fake_per_instance; ++j, ++slot)
            entries.push_back({m, first_fake + slot % n_fake, level(rng)});
    return RatingsTable(table.levels(), table.instance_ids(), std::move(annotators), std::move(entries));
}

// ---------------------------------------------------------------------------
// Synthetic data from the ordinal mixture generative process

struct EpsilonGroup {
    double fraction;
    double epsilon;
};

struct SynthConfig {
    std::size_t instances = 500;
    std::size_t annotators = 30;
    int levels = 5;
    std::size_t categories = 1;
    double alpha = 10.0; // tau ~ Gamma(alpha, beta)
    double beta = 5.0;
    double phi = 10.0; // delta ~ Gamma(phi, eta)
    double eta = 5.0;
    std::optional<double> mu; // defaults to the mean scale value
    double lambda = 0.5;      // z ~ N(mu, 1/lambda)
    /// Annotator groups sharing one eps; counts are round(fraction * N), the
    /// last group takes the remainder.
    std::vector<EpsilonGroup> epsilon_groups = {{1.0, 0.95}};
    std::vector<double> pi; // defaults to uniform
    std::size_t ratings_per_instance = 4;
    std::uint64_t seed = 0;
};

struct SynthParams {
    std::vector<double> tau;
    std::vector<double> delta;
    std::vector<double> epsilon;
    std::vector<std::size_t> category_of;
    /// y_nm per entry: 1 when drawn from the signal branch.
    std::vector<std::uint8_t> signal;
};

struct SynthData {
    OrdinalScale scale = OrdinalScale::standard(5);
    RatingsTable table;
    GroundTruth truth;
    CategoryMap categories;
    SynthParams params;
};

inline SynthData synth_generate(const SynthConfig& cfg) {
    if (cfg.instances == 0 || cfg.annotators == 0 || cfg.categories == 0 || cfg.ratings_per_instance == 0)
        throw InvalidInput("synthetic counts must be positive");
    if (cfg.ratings_per_instance > cfg.annotators)
        throw InvalidInput("ratings_per_instance cannot exceed the number of annotators");
    if (cfg.categories > cfg.instances) throw InvalidInput("more categories than instances");
    if (!(cfg.alpha > 0 && cfg.beta > 0 && cfg.phi > 0 && cfg.eta > 0 && cfg.lambda > 0))
        throw InvalidInput("gamma and Gaussian hyperparameters must be positive");

    SynthData out;
    out.scale = OrdinalScale::standard(cfg.levels);
    const auto k_count = static_cast<std::size_t>(cfg.levels);
    std::vector<double> pi = cfg.pi.empty() ? std::vector<double>(k_count, 1.0 / static_cast<double>(k_count)) : cfg.pi;
    if (pi.size() != k_count) throw InvalidInput("pi must have one entry per level");
    const double mu = cfg.mu.value_or(out.scale.mean_value());

    Rng rng(cfg.seed);
    SynthParams& p = out.params;

    p.epsilon.reserve(cfg.annotators);
    for (std::size_t g = 0; g < cfg.epsilon_groups.size(); ++g) {
        const auto& grp = cfg.epsilon_groups[g];
        if (!(grp.epsilon >= 0.0 && grp.epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
        std::size_t count = g + 1 == cfg.epsilon_groups.size()
                                ? cfg.annotators - p.epsilon.size()
                                : static_cast<std::size_t>(std::round(grp.fraction * static_cast<double>(cfg.annotators)));
        count = std::min(count, cfg.annotators - p.epsilon.size());
        p.epsilon.insert(p.epsilon.end(), count, grp.epsilon);
    }
    if (p.epsilon.size() != cfg.annotators) throw InvalidInput("epsilon groups do not cover every annotator");
    std::shuffle(p.epsilon.begin(), p.epsilon.end(), rng);

    std::gamma_distribution<double> tau_dist(cfg.alpha, 1.0 / cfg.beta);
    std::gamma_distribution<double> delta_dist(cfg.phi, 1.0 / cfg.eta);
    std::normal_distribution<double> z_dist(mu, 1.0 / std::sqrt(cfg.lambda));
    p.tau.resize(cfg.annotators);
    for (double& t : p.tau) t = tau_dist(rng);
    p.delta.resize(cfg.categories);
    for (double& d : p.delta) d = delta_dist(rng);
    p.category_of.resize(cfg.instances);
    for (std::size_t m = 0; m < cfg.instances; ++m) p.category_of[m] = m % cfg.categories;

    std::vector<double> z(cfg.instances);
    for (double& v : z) v = z_dist(rng);

    std::vector<std::string> instance_ids(cfg.instances), annotator_ids(cfg.annotators), category_ids(cfg.categories);
    for (std::size_t m = 0; m < cfg.instances; ++m) instance_ids[m] = "i" + std::to_string(m);
    for (std::size_t n = 0; n < cfg.annotators; ++n) annotator_ids[n] = "a" + std::to_string(n);
    for (std::size_t c = 0; c < cfg.categories; ++c) category_ids[c] = "c" + std::to_string(c);

    std::discrete_distribution<int> spam_dist(pi.begin(), pi.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::vector<std::size_t> pool(cfg.annotators);
    std::vector<Rating> entries;
    entries.reserve(cfg.instances * cfg.ratings_per_instance);
    for (std::size_t m = 0; m < cfg.instances; ++m) {
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t j = 0; j < cfg.ratings_per_instance; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, cfg.annotators - 1);
            std::swap(pool[j], pool[pick(rng)]);
            const std::size_t n = pool[j];
            const bool signal = unit(rng) < p.epsilon[n];
            int level;
            if (signal) {
                const double sd = 1.0 / std::sqrt(p.tau[n] * p.delta[p.category_of[m]]);
                level = out.scale.level_of(z[m] + sd * std_normal(rng));
            } else {
                level = spam_dist(rng) + 1;
            }
            entries.push_back({m, n, level});
            p.signal.push_back(signal ? 1 : 0);
        }
    }
    out.table = RatingsTable(cfg.levels, std::move(instance_ids), std::move(annotator_ids), std::move(entries));
    out.truth = GroundTruth::full(std::move(z));
    out.categories = CategoryMap(out.table, p.category_of, std::move(category_ids));
    return out;
}

} // namespace ordcrowd::evaluation

#endif // ORDCROWD_EVALUATION_HPP
