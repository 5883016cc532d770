#include <gtest/gtest.h>

#include <map>
#include <random>

#include "support.hpp"

using namespace xflow;

namespace {

FlowDataset triangle() {
    return make_dataset({{"a", 0, 0, {}}, {"b", 1, 0, {}}, {"c", 0, 1, {}}}, {{"a", "b", 1}, {"b", "c", 1}, {"c", "a", 1}});
}

void expect_conserves(const FlowDataset& in, const FlowDataset& out) {
    EXPECT_EQ(in.outflows(), out.outflows());
    EXPECT_EQ(in.inflows(), out.inflows());
    EXPECT_EQ(in.total_flow(), out.total_flow());
    for (const Flow& f : out.flows()) EXPECT_NE(f.origin, f.dest);
}

std::vector<double> gumbel_samples(std::uint64_t seed, std::size_t n, double mu, double beta) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) x = mu - beta * std::log(-std::log(rng.open_uniform()));
    return out;
}

}  // namespace

TEST(Permute, TriangleKeepsMarginals) {
    const auto data = triangle();
    for (std::uint64_t seed = 0; seed < 20; ++seed) expect_conserves(data, permute(data, seed).dataset);
}

TEST(Permute, SameSeedSameData) {
    std::mt19937_64 gen(5);
    const auto data = xtest::random_instance(gen);
    const auto a = permute(data, 99).dataset;
    const auto b = permute(data, 99).dataset;
    EXPECT_EQ(a.flows(), b.flows());
}

TEST(Permute, ConservationOnRandomData) {
    std::mt19937_64 gen(6);
    for (int rep = 0; rep < 100; ++rep) {
        const auto data = xtest::random_instance(gen);
        std::size_t destinations = 0;
        for (Volume v : data.inflows()) destinations += v > 0;
        if (destinations < 2) continue;
        expect_conserves(data, permute(data, gen()).dataset);
    }
}

TEST(Permute, SingleDestinationIsInfeasible) {
    const auto data = make_dataset({{"a", 0, 0, {}}, {"b", 1, 0, {}}, {"c", 2, 0, {}}}, {{"a", "c", 2}, {"b", "c", 1}});
    EXPECT_THROW(permute(data, 1), InfeasibleError);
}

TEST(Permute, SkippedSwapsAreCounted) {
    // every swap between the two trips would create a self-flow
    const auto data = make_dataset({{"a", 0, 0, {}}, {"b", 1, 0, {}}}, {{"a", "b", 1}, {"b", "a", 1}});
    const auto p = permute(data, 3, {.passes = 10});
    EXPECT_EQ(p.dataset.flows(), data.flows());
    EXPECT_GT(p.skipped_swaps, 0u);
}

TEST(Permute, SinglePassShuffleIsUniform) {
    // four trips with disjoint origin and destination sets: no swap is skipped
    std::vector<Location> locs;
    std::vector<FlowRecord> recs;
    for (int i = 0; i < 4; ++i) {
        locs.push_back({"o" + std::to_string(i), double(i), 0, {}});
        locs.push_back({"d" + std::to_string(i), double(i), 5, {}});
        recs.push_back({"o" + std::to_string(i), "d" + std::to_string(i), 1});
    }
    const auto data = make_dataset(locs, recs);
    std::map<std::vector<LocIndex>, int> counts;
    const int runs = 40000;
    for (int s = 0; s < runs; ++s) {
        const auto p = permute(data, static_cast<std::uint64_t>(s), {.passes = 1});
        ASSERT_EQ(p.skipped_swaps, 0u);
        std::vector<LocIndex> assignment(4);
        for (const Flow& f : p.dataset.flows()) assignment[f.origin / 2] = f.dest;
        ++counts[assignment];
    }
    ASSERT_EQ(counts.size(), 24u);
    const double expected = runs / 24.0;
    double chi2 = 0.0;
    for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 23 degrees of freedom, upper 0.001 point
    EXPECT_LT(chi2, 49.728);
}

TEST(Permute, MeanFlowMatchesIndependence) {
    std::mt19937_64 gen(17);
    std::vector<Location> locs;
    for (int i = 0; i < 30; ++i) locs.push_back({"n" + std::to_string(i), double(i % 6), double(i / 6), {}});
    std::vector<FlowRecord> recs;
    std::uniform_int_distribution<int> pick(0, 29), vol(1, 8);
    Volume total = 0;
    while (total < 2000) {
        const int a = pick(gen);
        int b = pick(gen);
        if (a == b) continue;
        // skew destinations so the data is far from independent
        if (b % 3 == 0 && a < 10) b = (b + 1) % 30;
        if (a == b) continue;
        const int v = vol(gen);
        recs.push_back({locs[a].id, locs[b].id, v});
        total += v;
    }
    const auto data = make_dataset(locs, recs);
    const int L = 100;
    const std::vector<std::pair<std::size_t, std::size_t>> probes{{0, 5}, {3, 9}, {12, 2}, {20, 27}};
    for (const auto& [oc, dc] : probes) {
        const auto o = neighborhood(data, static_cast<LocIndex>(oc), 3);
        const auto d = neighborhood(data, static_cast<LocIndex>(dc), 2);
        if (members_intersect(o.members, d.members)) continue;
        double sum = 0, sum2 = 0;
        for (int s = 0; s < L; ++s) {
            const auto p = permute(data, static_cast<std::uint64_t>(1000 + s)).dataset;
            const double y = static_cast<double>(flow_between(p, neighborhood(p, o.center, 3), neighborhood(p, d.center, 2)));
            sum += y;
            sum2 += y * y;
        }
        const double mean = sum / L;
        const double se = std::sqrt((sum2 / L - mean * mean) / (L - 1));
        const double e = expected_flow(o.outflow_total, d.inflow_total, data.total_flow());
        EXPECT_LE(std::abs(mean - e), 3 * se + 0.05) << "probe " << oc << "->" << dc;
    }
}

TEST(MonteCarlo, SingleRunEqualsScanOfThatPermutation) {
    const auto data = synth::generate(synth::default_spec(300, 2)).dataset;
    ScanConfig c;
    const auto null = monte_carlo(data, c, 1, 55);
    ASSERT_EQ(null.size(), 1u);
    const auto p = permute(data, 55).dataset;
    double best = 0;
    for (const auto& cl : scan_all(p, c).clusters) best = std::max(best, cl.lglr);
    EXPECT_EQ(null.maxima[0], best);
}

TEST(MonteCarlo, DeterministicAndWorkerInvariant) {
    const auto data = synth::generate(synth::default_spec(300, 4)).dataset;
    ScanConfig one;
    ScanConfig many;
    many.workers = 8;
    const auto a = monte_carlo(data, one, 12, 7);
    const auto b = monte_carlo(data, one, 12, 7);
    const auto c = monte_carlo(data, many, 12, 7);
    EXPECT_EQ(a.maxima, b.maxima);
    EXPECT_EQ(a.maxima, c.maxima);
    EXPECT_EQ(a.skipped_swaps_total, c.skipped_swaps_total);
    for (double m : a.maxima) EXPECT_GE(m, 0.0);
}

TEST(GumbelFit, ParametricRecovery) {
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        const auto xs = gumbel_samples(1000 + rep, 10000, 10.0, 2.0);
        const auto fit = fit_gumbel(xs);
        EXPECT_GE(fit.mu, 9.9);
        EXPECT_LE(fit.mu, 10.1);
        EXPECT_GE(fit.beta, 1.9);
        EXPECT_LE(fit.beta, 2.1);
    }
}

TEST(GumbelFit, MomentsStageClosedForm) {
    const std::vector<double> xs{3, 7, 1, 9, 4, 4, 8, 2, 6, 5, 11};
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double s = std::sqrt(ss / (xs.size() - 1));
    const auto fit = fit_gumbel(xs, {.refine = false});
    const double beta = s * std::sqrt(6.0) / std::numbers::pi;
    EXPECT_DOUBLE_EQ(fit.beta, beta);
    EXPECT_DOUBLE_EQ(fit.mu, mean - 0.5772156649015329 * beta);
}

TEST(GumbelFit, RefinementSatisfiesLikelihoodEquation) {
    const auto xs = gumbel_samples(3, 500, 4.0, 0.7);
    const auto fit = fit_gumbel(xs);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= xs.size();
    double sw = 0, sxw = 0;
    for (double x : xs) {
        const double w = std::exp(-x / fit.beta);
        sw += w;
        sxw += x * w;
    }
    EXPECT_NEAR(fit.beta, mean - sxw / sw, 1e-7);
    EXPECT_NEAR(fit.mu, -fit.beta * std::log(sw / xs.size()), 1e-7);
}

TEST(GumbelFit, DegenerateInput) {
    EXPECT_THROW(fit_gumbel(std::vector<double>(20, 3.0)), std::invalid_argument);
    EXPECT_THROW(fit_gumbel(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Threshold, PublishedConstants) {
    EXPECT_NEAR(threshold({14.145, 0.763}, 0.01), 17.65, 0.01);
    EXPECT_NEAR(threshold({16.12, 1.06}, 1e-5), 28.3, 0.05);
    EXPECT_NEAR(threshold({3.5, 1.25}, 1.0 - std::exp(-1.0)), 3.5, 1e-12);
    EXPECT_THROW(threshold({0, 1}, 0.0), std::invalid_argument);
    EXPECT_THROW(threshold({0, 1}, 1.0), std::invalid_argument);
}

TEST(PValueGumbel, KnownPoints) {
    EXPECT_NEAR(p_value_gumbel(5.0, {5.0, 2.0}), 1.0 - std::exp(-1.0), 1e-15);
    const double p = p_value_gumbel(28.3, {16.12, 1.06});
    EXPECT_GT(p, 0.9e-5);
    EXPECT_LT(p, 1.1e-5);
}

TEST(PValueGumbel, InverseOfThreshold) {
    for (double p : {0.5, 0.05, 0.01, 1e-5}) EXPECT_LT(std::abs(p_value_gumbel(threshold({16.12, 1.06}, p), {16.12, 1.06}) - p), 1e-12);
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> mu(-50, 50), beta(0.05, 20), lp(-12, -0.01);
    for (int i = 0; i < 2000; ++i) {
        const GumbelFit f{mu(gen), beta(gen)};
        const double p = std::pow(10.0, lp(gen));
        EXPECT_LT(std::abs(p_value_gumbel(threshold(f, p), f) - p), 1e-12 + 1e-9 * p);
    }
}

TEST(PValueRank, PublishedRankExample) {
    std::vector<double> null(999);
    for (std::size_t i = 0; i < null.size(); ++i) null[i] = static_cast<double>(i);
    // four maxima above: the value ranks fifth
    EXPECT_DOUBLE_EQ(p_value_rank(994.5, null), 0.005);
    EXPECT_DOUBLE_EQ(p_value_rank(5000, null), 1.0 / 1000);
    EXPECT_DOUBLE_EQ(p_value_rank(-1, null), 1.0);
}

TEST(PValueRank, MonotoneAndSingleNull) {
    const std::vector<double> null{3, 1, 4, 1, 5, 9, 2, 6};
    double last = 1.0;
    for (double v = -1; v < 11; v += 0.25) {
        const double p = p_value_rank(v, null);
        EXPECT_LE(p, last);
        last = p;
    }
    for (double v : {0.0, 2.0, 4.0}) {
        const double p = p_value_rank(v, std::vector<double>{2.0});
        EXPECT_TRUE(p == 0.5 || p == 1.0);
    }
}
