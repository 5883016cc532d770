#pragma once

// Significance of flow clusters: marginal-preserving permutation of the
// data, Monte Carlo null distribution of the maximum LGLR, Gumbel fit, and
// p-values by rank and by the fitted tail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xflow/dataset.hpp"
#include "xflow/parallel.hpp"
#include "xflow/rng.hpp"
#include "xflow/scan.hpp"

namespace xflow {

/// A statistical operation that cannot be carried out on the given data.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kEulerGamma = 0.57721566490153286061;

struct PermuteOptions {
    int passes = 10;
    /// Upper limit on total volume expanded into unit trips.
    Volume max_trips = Volume{1} << 31;
};

struct Permutation {
    FlowDataset dataset;
    std::uint64_t skipped_swaps = 0;
};

/// Shuffles destinations among unit trips with backward Fisher-Yates passes,
/// skipping any swap that would create a self-flow, then re-aggregates the
/// trips. Every location keeps its outflow and inflow exactly.
inline Permutation permute(const FlowDataset& data, std::uint64_t seed, const PermuteOptions& options = {}) {
    if (options.passes < 1) throw std::invalid_argument("permute: passes must be at least 1");
    const Volume total = data.total_flow();
    if (total > options.max_trips)
        throw InfeasibleError("permute: total volume " + std::to_string(total) + " exceeds the unit-trip limit");
    std::size_t destinations = 0;
    for (Volume v : data.inflows()) destinations += v > 0 ? 1 : 0;
    if (destinations < 2) throw InfeasibleError("permute: fewer than two distinct destinations");

    const auto trips = static_cast<std::size_t>(total);
    std::vector<LocIndex> origin(trips);
    std::vector<LocIndex> dest(trips);
    std::size_t t = 0;
    for (const Flow& f : data.flows())
        for (Volume k = 0; k < f.volume; ++k, ++t) {
            origin[t] = f.origin;
            dest[t] = f.dest;
        }

    Rng rng(seed);
    std::uint64_t skipped = 0;
    for (int pass = 0; pass < options.passes; ++pass) {
        for (std::size_t i = trips - 1; i > 0; --i) {
            const auto r = static_cast<std::size_t>(rng.below(i + 1));
            if (r == i) continue;
            if (origin[i] == dest[r] || origin[r] == dest[i]) {
                ++skipped;
                continue;
            }
            std::swap(dest[i], dest[r]);
        }
    }

    std::vector<std::uint64_t> keys(trips);
    for (std::size_t i = 0; i < trips; ++i) keys[i] = (std::uint64_t{origin[i]} << 32) | dest[i];
    std::sort(keys.begin(), keys.end());
    std::vector<Flow> flows;
    for (std::size_t i = 0; i < trips;) {
        std::size_t j = i;
        while (j < trips && keys[j] == keys[i]) ++j;
        flows.push_back(Flow{static_cast<LocIndex>(keys[i] >> 32), static_cast<LocIndex>(keys[i] & 0xffffffffu),
                             static_cast<Volume>(j - i)});
        i = j;
    }
    return Permutation{FlowDataset(data.shared_locations(), std::move(flows)), skipped};
}

struct NullDistribution {
    std::vector<double> maxima;  // one per permutation, in permutation order
    std::uint64_t seed = 0;
    int passes = 10;
    std::uint64_t skipped_swaps_total = 0;

    std::size_t size() const noexcept { return maxima.size(); }
};

/// Maximum LGLR of each of `permutations` seeded permutations. Permutation i
/// uses seed + i, so the result does not depend on the worker count.
inline NullDistribution monte_carlo(const FlowDataset& data, const ScanConfig& config, std::size_t permutations,
                                    std::uint64_t seed, const PermuteOptions& options = {}) {
    if (permutations < 1) throw std::invalid_argument("monte_carlo: at least one permutation required");
    ScanConfig plan_config = config;
    const ScanPlan plan(data, plan_config);
    NullDistribution null;
    null.seed = seed;
    null.passes = options.passes;
    null.maxima.assign(permutations, 0.0);
    std::vector<std::uint64_t> skipped(permutations, 0);
    parallel_chunks(permutations, config.workers, 1, [&](unsigned, std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            auto perm = permute(data, seed + p, options);
            null.maxima[p] = scan_max(perm.dataset, plan, 1);
            skipped[p] = perm.skipped_swaps;
        }
    });
    null.skipped_swaps_total = std::accumulate(skipped.begin(), skipped.end(), std::uint64_t{0});
    return null;
}

struct GumbelFit {
    double mu = 0.0;
    double beta = 1.0;
};

struct GumbelFitOptions {
    bool refine = true;  // maximum-likelihood refinement after the moments stage
    double tolerance = 1e-9;
    int max_iterations = 200;
};

/// Method-of-moments fit (sample standard deviation with n-1), optionally
/// refined by fixed-point iteration on the Gumbel likelihood equations.
inline GumbelFit fit_gumbel(std::span<const double> samples, const GumbelFitOptions& options = {}) {
    if (samples.size() < 10) throw std::invalid_argument("fit_gumbel: at least 10 samples required");
    const double n = static_cast<double>(samples.size());
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0) || !std::isfinite(sd)) throw std::invalid_argument("fit_gumbel: samples have zero variance");

    GumbelFit fit;
    fit.beta = sd * std::sqrt(6.0) / std::numbers::pi;
    fit.mu = mean - kEulerGamma * fit.beta;
    if (!options.refine) return fit;

    // beta = mean - sum(x w) / sum(w), w = exp(-x / beta); shifted by the
    // mean to keep the weights finite
    double beta = fit.beta;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
        double sw = 0.0;
        double sxw = 0.0;
        for (double x : samples) {
            const double w = std::exp(-(x - mean) / beta);
            sw += w;
            sxw += (x - mean) * w;
        }
        const double next = -sxw / sw;
        if (!(next > 0.0) || !std::isfinite(next)) break;
        const double change = std::abs(next - beta);
        beta = next;
        if (change <= options.tolerance * std::max(1.0, beta)) {
            converged = true;
            break;
        }
    }
    if (!converged) return fit;
    double sw = 0.0;
    for (double x : samples) sw += std::exp(-(x - mean) / beta);
    fit.beta = beta;
    fit.mu = mean - beta * std::log(sw / n);
    return fit;
}

/// LGLR value whose null exceedance probability is p.
inline double threshold(const GumbelFit& fit, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("threshold: p must lie in (0, 1)");
    return fit.mu - fit.beta * std::log(-std::log1p(-p));
}

/// Upper tail probability of the fitted Gumbel at `value`.
inline double p_value_gumbel(double value, const GumbelFit& fit) {
    return -std::expm1(-std::exp(-(value - fit.mu) / fit.beta));
}

/// Monte Carlo p-value R / (L + 1), R = 1 + number of null maxima >= value.
inline double p_value_rank(double value, std::span<const double> null_maxima) {
    if (null_maxima.empty()) throw std::invalid_argument("p_value_rank: empty null distribution");
    const auto above = std::count_if(null_maxima.begin(), null_maxima.end(), [&](double m) { return m >= value; });
    return static_cast<double>(above + 1) / static_cast<double>(null_maxima.size() + 1);
}

inline double p_value_rank(double value, const NullDistribution& null) { return p_value_rank(value, null.maxima); }

/// Fills both p-values of every cluster.
inline void annotate(std::vector<FlowCluster>& clusters, const NullDistribution& null, const GumbelFit& fit) {
    for (FlowCluster& c : clusters) {
        c.p_value = p_value_gumbel(c.lglr, fit);
        c.p_value_rank = p_value_rank(c.lglr, null);
    }
}

}  // namespace xflow
