#pragma once

// Pre-aggregation of point-based OD records: endpoints are grouped by seeded
// k-means (k-means++ seeding, Lloyd iterations) and each group becomes one
// location at its centroid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xflow/dataset.hpp"
#include "xflow/rng.hpp"

namespace xflow {

struct PointFlow {
    double ox = 0.0;
    double oy = 0.0;
    double dx = 0.0;
    double dy = 0.0;
    Volume volume = 1;
};

struct KMeansOptions {
    int max_iterations = 100;
    /// Stop once no centroid moves farther than tolerance * extent.
    double tolerance = 1e-9;
};

struct Preaggregation {
    FlowDataset dataset;
    std::vector<std::size_t> group_sizes;  // distinct points per location
    Volume dropped_self_volume = 0;
    int iterations = 0;
};

namespace detail {

struct Point {
    double x;
    double y;
    auto operator<=>(const Point&) const = default;
};

inline double sq(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Group index per point.
inline std::vector<std::size_t> kmeans(const std::vector<Point>& pts, std::size_t k, std::uint64_t seed,
                                       const KMeansOptions& options, int& iterations) {
    const std::size_t n = pts.size();
    std::vector<std::size_t> assign(n);
    iterations = 0;
    if (k >= n) {
        for (std::size_t i = 0; i < n; ++i) assign[i] = i;
        return assign;
    }

    Rng rng(seed);
    std::vector<Point> centers;
    centers.push_back(pts[rng.below(n)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq(pts[i], centers[0]);
    while (centers.size() < k) {
        double sum = 0.0;
        for (double v : d2) sum += v;
        std::size_t pick = 0;
        if (sum > 0.0) {
            double r = rng.uniform() * sum;
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r < 0.0) break;
            }
        } else {
            pick = rng.below(n);
        }
        centers.push_back(pts[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq(pts[i], centers.back()));
    }

    double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
    for (const Point& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double extent = std::max({xmax - xmin, ymax - ymin, std::numeric_limits<double>::min()});

    std::vector<double> sx(k), sy(k);
    std::vector<std::size_t> count(k);
    for (int it = 0; it < options.max_iterations; ++it) {
        iterations = it + 1;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = sq(pts[i], centers[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = sq(pts[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            assign[i] = best;
        }
        std::fill(sx.begin(), sx.end(), 0.0);
        std::fill(sy.begin(), sy.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sx[assign[i]] += pts[i].x;
            sy[assign[i]] += pts[i].y;
            ++count[assign[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            Point next = centers[c];
            if (count[c] > 0) {
                next = {sx[c] / static_cast<double>(count[c]), sy[c] / static_cast<double>(count[c])};
            } else {
                // empty group: move it to the point farthest from its center
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < n; ++i)
                    if (const double d = sq(pts[i], centers[assign[i]]); d > fd) {
                        fd = d;
                        far = i;
                    }
                next = pts[far];
            }
            shift = std::max(shift, std::sqrt(sq(next, centers[c])));
            centers[c] = next;
        }
        if (shift <= options.tolerance * extent) break;
    }
    return assign;
}

}  // namespace detail

/// Groups all distinct endpoint points into at most `k_clusters` locations
/// and sums volumes per location pair. Flows whose endpoints land in one
/// group are dropped and their volume reported.
inline Preaggregation preaggregate(const std::vector<PointFlow>& records, std::size_t k_clusters, std::uint64_t seed,
                                   const KMeansOptions& options = {}) {
    if (k_clusters < 2) throw std::invalid_argument("preaggregate: k_clusters must be at least 2");
    std::vector<detail::Point> pts;
    pts.reserve(records.size() * 2);
    for (const PointFlow& r : records) {
        if (!std::isfinite(r.ox) || !std::isfinite(r.oy) || !std::isfinite(r.dx) || !std::isfinite(r.dy))
            throw std::invalid_argument("preaggregate: non-finite coordinate");
        if (r.volume < 1) throw std::invalid_argument("preaggregate: volume must be positive");
        pts.push_back({r.ox, r.oy});
        pts.push_back({r.dx, r.dy});
    }
    if (pts.empty()) throw std::invalid_argument("preaggregate: no records");
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    int iterations = 0;
    const auto raw = detail::kmeans(pts, k_clusters, seed, options, iterations);

    // renumber groups by first appearance in sorted point order
    std::map<std::size_t, std::size_t> renumber;
    for (std::size_t g : raw) renumber.try_emplace(g, renumber.size());
    const std::size_t groups = renumber.size();
    std::vector<double> sx(groups), sy(groups);
    std::vector<std::size_t> sizes(groups);
    std::vector<std::size_t> group(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        group[i] = renumber[raw[i]];
        sx[group[i]] += pts[i].x;
        sy[group[i]] += pts[i].y;
        ++sizes[group[i]];
    }
    std::vector<Location> locations;
    for (std::size_t g = 0; g < groups; ++g)
        locations.push_back(Location{"g" + std::to_string(g), sx[g] / static_cast<double>(sizes[g]),
                                     sy[g] / static_cast<double>(sizes[g]), std::nullopt});

    auto group_of = [&](double x, double y) {
        const auto it = std::lower_bound(pts.begin(), pts.end(), detail::Point{x, y});
        return static_cast<LocIndex>(group[static_cast<std::size_t>(it - pts.begin())]);
    };
    std::map<std::pair<LocIndex, LocIndex>, Volume> sums;
    Volume dropped = 0;
    for (const PointFlow& r : records) {
        const LocIndex o = group_of(r.ox, r.oy);
        const LocIndex d = group_of(r.dx, r.dy);
        if (o == d)
            dropped += r.volume;
        else
            sums[{o, d}] += r.volume;
    }
    if (sums.empty()) throw std::invalid_argument("preaggregate: every flow collapsed into a self-flow");
    std::vector<Flow> flows;
    for (const auto& [key, v] : sums) flows.push_back(Flow{key.first, key.second, v});
    auto set = std::make_shared<const LocationSet>(std::move(locations), DistanceMode::planar);
    return Preaggregation{FlowDataset(std::move(set), std::move(flows)), std::move(sizes), dropped, iterations};
}

}  // namespace xflow
