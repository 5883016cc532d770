#pragma once

// Shared fixtures and an exhaustive reference scan used as the oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xflow/xflow.hpp"

namespace xtest {

using namespace xflow;

/// k-NN order by sorting every location: (distance, id), center first.
/// Distances compare through the exact squared key, as sqrt can merge them.
inline std::vector<LocIndex> brute_order(const FlowDataset& data, LocIndex center) {
    std::vector<LocIndex> all;
    for (LocIndex i = 0; i < data.location_count(); ++i)
        if (i != center) all.push_back(i);
    std::stable_sort(all.begin(), all.end(), [&](LocIndex a, LocIndex b) {
        const double da = data.locations().distance_key(center, a);
        const double db = data.locations().distance_key(center, b);
        if (da != db) return da < db;
        return data.location(a).id < data.location(b).id;
    });
    all.insert(all.begin(), center);
    return all;
}

inline Volume brute_flow(const FlowDataset& data, const std::vector<LocIndex>& o, const std::vector<LocIndex>& d) {
    Volume total = 0;
    for (const Flow& f : data.flows())
        if (std::find(o.begin(), o.end(), f.origin) != o.end() && std::find(d.begin(), d.end(), f.dest) != d.end())
            total += f.volume;
    return total;
}

inline double reference_lglr(double y, double e, double total) {
    if (!(y > e)) return 0.0;
    double v = y * std::log(y / e);
    if (total - y > 0) v += (total - y) * std::log((total - y) / (total - e));
    return std::max(v, 0.0);
}

/// Largest valid scale for one side under the bound.
inline std::size_t max_scale(const FlowDataset& data, const std::vector<LocIndex>& order, BoundMode mode,
                             std::int64_t bound, bool origin_side) {
    if (mode == BoundMode::by_count) return std::min<std::size_t>(order.size(), static_cast<std::size_t>(bound));
    Volume total = origin_side ? data.outflow(order[0]) : data.inflow(order[0]);
    std::size_t k = 1;
    while (k < order.size()) {
        const Volume w = origin_side ? data.outflow(order[k]) : data.inflow(order[k]);
        if (total + w > bound) break;
        total += w;
        ++k;
    }
    return k;
}

struct OracleBest {
    double lglr = 0.0;
    std::size_t k_origin = 0;
    std::size_t k_dest = 0;
    Volume observed = 0;
};

/// Every (k_O, k_D) pair, scored from scratch.
inline std::optional<OracleBest> oracle_scan_flow(const FlowDataset& data, LocIndex o, LocIndex d,
                                                  const ScanConfig& config) {
    const auto bound = config.resolved_bound(data);
    const auto oo = brute_order(data, o);
    const auto dd = brute_order(data, d);
    const std::size_t no = max_scale(data, oo, config.bound_mode, bound, true);
    const std::size_t nd = max_scale(data, dd, config.bound_mode, bound, false);
    const double total = static_cast<double>(data.total_flow());
    std::optional<OracleBest> best;
    for (std::size_t ko = 1; ko <= no; ++ko) {
        const std::vector<LocIndex> om(oo.begin(), oo.begin() + static_cast<std::ptrdiff_t>(ko));
        Volume out = 0;
        for (LocIndex i : om) out += data.outflow(i);
        for (std::size_t kd = 1; kd <= nd; ++kd) {
            const std::vector<LocIndex> dm(dd.begin(), dd.begin() + static_cast<std::ptrdiff_t>(kd));
            const bool disjoint =
                std::none_of(om.begin(), om.end(), [&](LocIndex x) { return std::find(dm.begin(), dm.end(), x) != dm.end(); });
            if (!disjoint) continue;
            Volume in = 0;
            for (LocIndex i : dm) in += data.inflow(i);
            const Volume y = brute_flow(data, om, dm);
            const double e = static_cast<double>(out) * static_cast<double>(in) / total;
            const double l = reference_lglr(static_cast<double>(y), e, total);
            if (!(l > 0.0)) continue;
            bool better = !best || l > best->lglr;
            if (best && l == best->lglr) {
                const auto s = ko + kd;
                const auto t = best->k_origin + best->k_dest;
                better = s < t || (s == t && ko < best->k_origin);
            }
            if (better) best = OracleBest{l, ko, kd, y};
        }
    }
    return best;
}

/// Random small instance; integer coordinates on a coarse grid so distance
/// ties occur often.
inline FlowDataset random_instance(std::mt19937_64& gen, std::size_t max_m = 20, std::size_t max_n = 50) {
    std::uniform_int_distribution<std::size_t> mdist(3, max_m);
    const std::size_t m = mdist(gen);
    std::uniform_int_distribution<int> coord(0, 6);
    std::vector<Location> locs;
    std::vector<std::pair<int, int>> used;
    for (std::size_t i = 0; i < m; ++i) {
        std::pair<int, int> p;
        do {
            p = {coord(gen), coord(gen)};
        } while (std::find(used.begin(), used.end(), p) != used.end());
        used.push_back(p);
        locs.push_back(Location{"L" + std::to_string(gen() % 1000) + "_" + std::to_string(i), double(p.first),
                                double(p.second), std::nullopt});
    }
    std::uniform_int_distribution<std::size_t> ndist(1, max_n);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::uniform_int_distribution<int> vol(1, 5);
    const std::size_t n = ndist(gen);
    std::vector<FlowRecord> recs;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t a = pick(gen);
        std::size_t b = pick(gen);
        while (b == a) b = pick(gen);
        recs.push_back(FlowRecord{locs[a].id, locs[b].id, vol(gen)});
    }
    return make_dataset(std::move(locs), recs);
}

/// Random bound configuration valid for `data`.
inline ScanConfig random_config(std::mt19937_64& gen, const FlowDataset& data) {
    ScanConfig c;
    switch (gen() % 3) {
        case 0: c.bound_mode = BoundMode::by_count; c.bound = static_cast<std::int64_t>(1 + gen() % data.location_count()); break;
        case 1: c.bound_mode = BoundMode::by_volume; c.bound = 1 + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(data.total_flow())); break;
        default: c.bound_mode = BoundMode::by_volume; c.bound = 0; break;
    }
    return c;
}

/// Compares the engine against the oracle for every focal flow; returns the
/// number of mismatching focal flows.
inline std::size_t oracle_mismatches(const FlowDataset& data, const ScanConfig& config) {
    const auto result = scan_all(data, config);
    std::size_t mismatches = 0;
    std::size_t next = 0;
    for (const auto& [o, d] : focal_pairs(data)) {
        const auto ref = oracle_scan_flow(data, o, d, config);
        const FlowCluster* got = nullptr;
        if (next < result.clusters.size() && result.clusters[next].focal_origin == o &&
            result.clusters[next].focal_dest == d)
            got = &result.clusters[next++];
        if (!ref && !got) continue;
        if (!ref || !got) {
            ++mismatches;
            continue;
        }
        const bool same = got->origin.k() == ref->k_origin && got->dest.k() == ref->k_dest &&
                          got->observed == ref->observed &&
                          std::abs(got->lglr - ref->lglr) <= 1e-9 * std::max(1.0, ref->lglr);
        if (!same) ++mismatches;
    }
    return mismatches + (result.clusters.size() - next);
}

}  // namespace xtest
