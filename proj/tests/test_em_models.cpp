#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ordcrowd/dawid_skene.hpp"
#include "ordcrowd/evaluation.hpp"
#include "ordcrowd/glad.hpp"
#include "ordcrowd/ord_binary.hpp"

#include "oracles.hpp"

using namespace ordcrowd;
using namespace oracle;

namespace {

// Three instances, three annotators, K = 3, with one missing rating.
RatingsTable tiny_table() {
    RatingsTableBuilder b(3);
    b.add("x", "a", 1);
    b.add("x", "b", 2);
    b.add("x", "c", 1);
    b.add("y", "a", 3);
    b.add("y", "b", 3);
    b.add("z", "a", 2);
    b.add("z", "b", 1);
    b.add("z", "c", 3);
    return std::move(b).build();
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    std::vector<double> v(k);
    double s = 0.0;
    for (double& x : v) s += (x = g(rng) + 1e-3);
    for (double& x : v) x /= s;
    return v;
}

evaluation::SynthData synth(std::uint64_t seed, std::size_t m = 100, std::size_t n = 10) {
    evaluation::SynthConfig cfg;
    cfg.instances = m;
    cfg.annotators = n;
    cfg.epsilon_groups = {{0.8, 0.95}, {0.2, 0.05}};
    cfg.seed = seed;
    return evaluation::synth_generate(cfg);
}

void expect_nondecreasing(const std::vector<double>& trace, double rel_tol, const std::string& what) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        ASSERT_GE(trace[i] - trace[i - 1], -rel_tol * (1.0 + std::abs(trace[i - 1]))) << what << " iter " << i;
}

} // namespace

TEST(DawidSkene, EStepMatchesBruteForceEnumeration) {
    const auto t = tiny_table();
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        dawid_skene::Params p;
        p.pi = random_simplex(3, rng);
        p.phi.resize(3);
        for (auto& c : p.phi) {
            c.clear();
            for (int k = 0; k < 3; ++k) c.push_back(random_simplex(3, rng));
        }
        const auto got = dawid_skene::e_step(p, t);
        const auto want = enumerate_posterior(3, 3, p.pi, [&](std::size_t m, std::size_t k) {
            double l = 1.0;
            for (std::size_t e : t.by_instance(m)) {
                const Rating& r = t.entry(e);
                l *= p.phi[r.annotator][k][static_cast<std::size_t>(r.level - 1)];
            }
            return l;
        });
        for (std::size_t m = 0; m < 3; ++m)
            for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[m][k], want[m][k], 1e-10);
    }
}

TEST(DawidSkene, MStepAppliesAddOneSmoothing) {
    RatingsTableBuilder b(2);
    b.add("x", "a", 1);
    b.add("y", "a", 2);
    const auto t = std::move(b).build();
    const dawid_skene::Posterior lambda = {{1.0, 0.0}, {0.25, 0.75}};
    const auto p = dawid_skene::m_step(lambda, t);
    EXPECT_NEAR(p.pi[0], 0.625, 1e-15);
    // Row k=1: counts (1, 0.25) + 1 -> (2, 1.25) / 3.25.
    EXPECT_NEAR(p.phi[0][0][0], 2.0 / 3.25, 1e-15);
    // Row k=2: counts (0, 0.75) + 1 -> (1, 1.75) / 2.75.
    EXPECT_NEAR(p.phi[0][1][1], 1.75 / 2.75, 1e-15);
}

TEST(DawidSkene, LogPosteriorTraceIsMonotoneAndFitIsDeterministic) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = synth(seed);
        FitConfig fc;
        fc.restarts = 3;
        fc.tol = 1e-9;
        fc.seed = seed;
        const auto r = dawid_skene::fit(d.table, d.scale, fc);
        expect_nondecreasing(r.fit.trace, 1e-8, "dawid-skene seed " + std::to_string(seed));
        EXPECT_EQ(dawid_skene::fit(d.table, d.scale, fc).fit.z_hat, r.fit.z_hat);
    }
}

TEST(Glad, EStepMatchesBruteForceEnumeration) {
    const auto t = tiny_table();
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        glad::Params p;
        p.pi = random_simplex(3, rng);
        for (int i = 0; i < 3; ++i) {
            p.a.push_back(n(rng));
            p.log_b.push_back(n(rng));
        }
        const auto got = glad::e_step(p, t);
        const auto want = enumerate_posterior(3, 3, p.pi, [&](std::size_t m, std::size_t k) {
            double l = 1.0;
            for (std::size_t e : t.by_instance(m)) {
                const Rating& r = t.entry(e);
                const double s = 1.0 / (1.0 + std::exp(-p.a[r.annotator] * std::exp(p.log_b[m])));
                l *= r.level == static_cast<int>(k) + 1 ? s : (1.0 - s) / 2.0;
            }
            return l;
        });
        for (std::size_t m = 0; m < 3; ++m)
            for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[m][k], want[m][k], 1e-10);
    }
}

TEST(Glad, AnalyticGradientMatchesCentralDifferences) {
    const auto d = synth(3, 30, 6);
    const auto& t = d.table;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.5, 1.0);
    const std::size_t dim = t.annotators() + t.instances();
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
        glad::Posterior lambda(t.instances());
        for (auto& row : lambda) row = random_simplex(5, rng);
        std::vector<double> x(dim), g(dim);
        for (double& v : x) v = n(rng);
        glad::penalized_q(x, g, lambda, t);
        double diff2 = 0.0, norm2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double keep = x[i], h = 1e-5;
            x[i] = keep + h;
            const double up = glad::penalized_q(x, {}, lambda, t);
            x[i] = keep - h;
            const double down = glad::penalized_q(x, {}, lambda, t);
            x[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            diff2 += (fd - g[i]) * (fd - g[i]);
            norm2 += g[i] * g[i];
        }
        worst = std::max(worst, std::sqrt(diff2 / norm2));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Glad, PenalizedObjectiveTraceIsMonotone) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto d = synth(seed);
        FitConfig fc;
        fc.restarts = 2;
        fc.tol = 1e-9;
        fc.max_iters = 200;
        fc.seed = seed;
        const auto r = glad::fit(d.table, d.scale, fc);
        expect_nondecreasing(r.fit.trace, 1e-8, "glad seed " + std::to_string(seed));
    }
}

TEST(Glad, MStepNeverDecreasesExpectedObjective) {
    const auto d = synth(5, 50, 8);
    Rng rng(0);
    const auto lambda = jittered_vote_shares(d.table, rng);
    const auto p = glad::Params::initial(d.table.annotators(), d.table.instances(), 5);
    const auto r = glad::m_step(p, lambda, d.table);
    EXPECT_GE(r.q_after, r.q_before);
}

TEST(FrankHall, EncodeDecodeRoundTrip) {
    for (int k_count = 2; k_count <= 7; ++k_count)
        for (int level = 1; level <= k_count; ++level) {
            const auto code = ord_binary::encode(level, k_count);
            EXPECT_EQ(code.bits.size(), static_cast<std::size_t>(k_count - 1));
            EXPECT_TRUE(code.valid());
            EXPECT_EQ(ord_binary::decode(code), level);
        }
    EXPECT_EQ(ord_binary::encode(3, 5).bits, (std::vector<std::uint8_t>{1, 1, 0, 0}));
    EXPECT_THROW(ord_binary::decode({{0, 1, 0}}), InvalidCode);
    EXPECT_THROW(ord_binary::encode(0, 5), InvalidLevel);
}

TEST(OrdBinary, CodeLikelihoodSumsToOneOverAllCodes) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    ord_binary::Params p;
    p.pi.assign(4, 0.25);
    p.sens = {{u(rng), u(rng), u(rng)}};
    p.spec = {{u(rng), u(rng), u(rng)}};
    for (int k = 1; k <= 4; ++k) {
        double total = 0.0;
        for (int mask = 0; mask < 8; ++mask) {
            ord_binary::FrankHallCode c;
            for (int b = 0; b < 3; ++b) c.bits.push_back(static_cast<std::uint8_t>((mask >> b) & 1));
            total += ord_binary::code_likelihood(c, k, p, 0);
        }
        EXPECT_NEAR(total, 1.0, 1e-14);
    }
}

TEST(OrdBinary, EStepMatchesBruteForceEnumeration) {
    const auto t = tiny_table();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int trial = 0; trial < 20; ++trial) {
        ord_binary::Params p;
        p.pi = random_simplex(3, rng);
        p.sens.assign(3, std::vector<double>(2));
        p.spec.assign(3, std::vector<double>(2));
        for (int n = 0; n < 3; ++n)
            for (int k = 0; k < 2; ++k) {
                p.sens[n][k] = u(rng);
                p.spec[n][k] = u(rng);
            }
        const auto got = ord_binary::e_step(p, t);
        const auto want = enumerate_posterior(3, 3, p.pi, [&](std::size_t m, std::size_t k) {
            double l = 1.0;
            for (std::size_t e : t.by_instance(m)) {
                const Rating& r = t.entry(e);
                for (int thr = 1; thr <= 2; ++thr) {
                    const bool truth = static_cast<int>(k) + 1 > thr, seen = r.level > thr;
                    const double sens = p.sens[r.annotator][thr - 1], spec = p.spec[r.annotator][thr - 1];
                    l *= truth ? (seen ? sens : 1.0 - sens) : (seen ? 1.0 - spec : spec);
                }
            }
            return l;
        });
        for (std::size_t m = 0; m < 3; ++m)
            for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[m][k], want[m][k], 1e-10);
    }
}

TEST(OrdBinary, LogPosteriorTraceIsMonotone) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto d = synth(seed);
        FitConfig fc;
        fc.restarts = 3;
        fc.tol = 1e-9;
        fc.seed = seed;
        const auto r = ord_binary::fit(d.table, d.scale, fc);
        expect_nondecreasing(r.fit.trace, 1e-8, "ord-binary seed " + std::to_string(seed));
    }
}

TEST(EmModels, FitsBeatChanceOnSyntheticData) {
    const auto d = synth(11, 200, 12);
    const auto cov = d.truth.coverage();
    FitConfig fc;
    fc.restarts = 2;
    EXPECT_GT(evaluation::pearson(d.truth.z, dawid_skene::fit(d.table, d.scale, fc).fit.z_hat, cov), 0.7);
    EXPECT_GT(evaluation::pearson(d.truth.z, glad::fit(d.table, d.scale, fc).fit.z_hat, cov), 0.7);
    EXPECT_GT(evaluation::pearson(d.truth.z, ord_binary::fit(d.table, d.scale, fc).fit.z_hat, cov), 0.7);
}

TEST(EmModels, EmptyTableIsRejected) {
    const RatingsTable empty(5, {"x"}, {"a"}, {});
    const auto scale = OrdinalScale::standard(5);
    EXPECT_THROW(dawid_skene::fit(empty, scale), InvalidInput);
    EXPECT_THROW(glad::fit(empty, scale), InvalidInput);
    EXPECT_THROW(ord_binary::fit(empty, scale), InvalidInput);
}
