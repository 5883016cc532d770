#pragma once

// Greedy selection of non-redundant clusters. Two clusters are redundant
// only when they overlap at the origin end and at the destination end.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "xflow/dataset.hpp"
#include "xflow/scan.hpp"

namespace xflow {

struct SelectionRule {
    std::optional<std::size_t> max_clusters;
    std::optional<double> min_lglr;
    std::optional<double> min_distance;
    /// Keep clusters whose p-value is below this cutoff.
    std::optional<double> min_p;

    void validate() const {
        if (min_lglr && !(*min_lglr > 0.0)) throw std::invalid_argument("selection: min_lglr must be positive");
        if (min_distance && !(*min_distance > 0.0))
            throw std::invalid_argument("selection: min_distance must be positive");
        if (min_p && !(*min_p > 0.0)) throw std::invalid_argument("selection: p-value cutoff must be positive");
    }
};

/// True if the two member lists share a location.
inline bool members_intersect(const std::vector<LocIndex>& a, const std::vector<LocIndex>& b) {
    if (a.size() > b.size()) return members_intersect(b, a);
    if (a.size() <= 8) {
        for (LocIndex x : a)
            if (std::find(b.begin(), b.end(), x) != b.end()) return true;
        return false;
    }
    std::vector<LocIndex> sa(a), sb(b);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    auto i = sa.begin();
    auto j = sb.begin();
    while (i != sa.end() && j != sb.end()) {
        if (*i < *j)
            ++i;
        else if (*j < *i)
            ++j;
        else
            return true;
    }
    return false;
}

inline bool clusters_overlap(const FlowCluster& a, const FlowCluster& b) {
    return members_intersect(a.origin.members, b.origin.members) && members_intersect(a.dest.members, b.dest.members);
}

/// Ranking used by the greedy pass: descending lglr, then smaller
/// k_O + k_D, then focal origin id, then focal destination id.
inline bool ranks_before(const FlowDataset& data, const FlowCluster& a, const FlowCluster& b) {
    if (a.lglr != b.lglr) return a.lglr > b.lglr;
    const auto sa = a.origin.k() + a.dest.k();
    const auto sb = b.origin.k() + b.dest.k();
    if (sa != sb) return sa < sb;
    const auto& ao = data.location(a.focal_origin).id;
    const auto& bo = data.location(b.focal_origin).id;
    if (ao != bo) return ao < bo;
    return data.location(a.focal_dest).id < data.location(b.focal_dest).id;
}

inline bool passes(const FlowCluster& c, const SelectionRule& rule) {
    if (rule.min_lglr && !(c.lglr >= *rule.min_lglr)) return false;
    if (rule.min_distance && !(c.distance >= *rule.min_distance)) return false;
    if (rule.min_p) {
        if (!c.p_value) return false;
        if (!(*c.p_value < *rule.min_p)) return false;
    }
    return true;
}

/// Accepted clusters in acceptance order.
inline std::vector<FlowCluster> select(const FlowDataset& data, const std::vector<FlowCluster>& clusters,
                                       const SelectionRule& rule = {}) {
    rule.validate();
    std::vector<const FlowCluster*> ranked;
    for (const FlowCluster& c : clusters)
        if (passes(c, rule)) ranked.push_back(&c);
    std::sort(ranked.begin(), ranked.end(),
              [&](const FlowCluster* a, const FlowCluster* b) { return ranks_before(data, *a, *b); });

    std::vector<FlowCluster> accepted;
    const std::size_t cap = rule.max_clusters.value_or(ranked.size());
    for (const FlowCluster* c : ranked) {
        if (accepted.size() >= cap) break;
        const bool redundant = std::any_of(accepted.begin(), accepted.end(),
                                           [&](const FlowCluster& a) { return clusters_overlap(a, *c); });
        if (!redundant) accepted.push_back(*c);
    }
    return accepted;
}

}  // namespace xflow
