#pragma once

// Cross-scale flow cluster scan.
//
// For every distinct observed flow o->d, origin neighborhoods grow around o
// and destination neighborhoods grow around d (k-NN prefixes, bounded by
// location count or by marginal volume). Every member-disjoint pair is a
// candidate; the strongest one by LGLR is kept per focal flow.
//
// The sweep does not score all candidates explicitly. With the origin
// neighborhood fixed, LGLR is non-decreasing in the observed flow and
// non-increasing in the destination inflow, so among destination scales only
// the first scale of each observed-flow level can win. When the origin grows
// by one member, destination scales whose observed flow did not change are
// dominated by the previous origin scale. The remaining candidates are
// screened with the bound LGLR <= (y - e)^2 F / (e (F - e)) before the exact
// value is computed. Ties keep the smaller k_O + k_D, then the smaller k_O, so
// the result is identical to exhaustive enumeration.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "xflow/dataset.hpp"
#include "xflow/parallel.hpp"

namespace xflow {

enum class BoundMode { by_count, by_volume };

struct ScanConfig {
    BoundMode bound_mode = BoundMode::by_volume;
    /// Location count (by_count) or marginal volume (by_volume); 0 selects
    /// the default ceil(m/5) or ceil(F/5).
    std::int64_t bound = 0;
    /// Per-focal results with lglr <= this value are not recorded.
    double min_lglr_record = 0.0;
    /// 0 = hardware concurrency.
    unsigned workers = 1;

    std::int64_t resolved_bound(const FlowDataset& data) const {
        if (bound < 0) throw std::invalid_argument("scan bound must be positive");
        if (bound > 0) return bound;
        if (bound_mode == BoundMode::by_count)
            return std::max<std::int64_t>(1, (static_cast<std::int64_t>(data.location_count()) + 4) / 5);
        return std::max<std::int64_t>(1, (data.total_flow() + 4) / 5);
    }
};

/// Expected flow from O to D under independence with fixed marginals.
inline double expected_flow(Volume origin_outflow, Volume dest_inflow, Volume total) {
    if (total <= 0) throw std::invalid_argument("expected_flow: total flow must be positive");
    return static_cast<double>(origin_outflow) * static_cast<double>(dest_inflow) / static_cast<double>(total);
}

/// Log generalized likelihood ratio of an elevated O->D flow; 0 unless
/// observed > expected. Returns +infinity when expected is 0 and observed > 0.
inline double lglr(double observed, double expected, double total) {
    if (!(observed > expected)) return 0.0;
    if (expected <= 0.0) return std::numeric_limits<double>::infinity();
    double value = observed * std::log(observed / expected);
    const double rest = total - observed;
    if (rest > 0.0) value += rest * std::log1p((expected - observed) / (total - expected));
    return value > 0.0 ? value : 0.0;
}

struct FlowCluster {
    Neighborhood origin;
    Neighborhood dest;
    Volume observed = 0;
    double expected = 0.0;
    double lglr = 0.0;
    LocIndex focal_origin = 0;
    LocIndex focal_dest = 0;
    /// Center-to-center distance.
    double distance = 0.0;
    std::optional<double> p_value;       // Gumbel tail probability
    std::optional<double> p_value_rank;  // R / (L + 1)
};

/// Bounded origin/destination neighborhood sequences for every location.
/// Depends only on locations, marginals and the bound, so one plan serves a
/// dataset and all of its marginal-preserving permutations.
class ScanPlan {
public:
    ScanPlan(const FlowDataset& data, const ScanConfig& config)
        : locations_(data.shared_locations()),
          outflow_(data.outflows()),
          inflow_(data.inflows()),
          mode_(config.bound_mode),
          bound_(config.resolved_bound(data)),
          origin_(data.location_count()),
          dest_(data.location_count()) {
        const std::size_t m = data.location_count();
        parallel_chunks(m, config.workers, 64, [&](unsigned, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto c = static_cast<LocIndex>(i);
                if (outflow_[c] > 0) origin_[c] = build(c, outflow_);
                if (inflow_[c] > 0) dest_[c] = build(c, inflow_);
            }
        });
    }

    struct Sequence {
        std::shared_ptr<const std::vector<LocIndex>> knn;
        std::uint32_t length = 0;  // members, center included

        LocIndex member(LocIndex center, std::size_t pos) const { return pos == 0 ? center : (*knn)[pos - 1]; }
    };

    const Sequence& origin_sequence(LocIndex center) const { return origin_[center]; }
    const Sequence& dest_sequence(LocIndex center) const { return dest_[center]; }

    BoundMode bound_mode() const noexcept { return mode_; }
    std::int64_t bound() const noexcept { return bound_; }

    /// True if `data` has the same locations and marginals as the plan.
    bool compatible(const FlowDataset& data) const {
        return data.shared_locations() == locations_ && data.outflows() == outflow_ && data.inflows() == inflow_;
    }

    Neighborhood materialize(LocIndex center, std::size_t length, bool origin_role) const {
        const Sequence& seq = origin_role ? origin_[center] : dest_[center];
        Neighborhood n;
        n.center = center;
        n.members.reserve(length);
        for (std::size_t p = 0; p < length; ++p) n.members.push_back(seq.member(center, p));
        if (length > 1) n.radius = locations_->distance(center, n.members.back());
        for (LocIndex i : n.members) {
            n.outflow_total += outflow_[i];
            n.inflow_total += inflow_[i];
        }
        return n;
    }

private:
    Sequence build(LocIndex center, const std::vector<Volume>& weight) const {
        const std::size_t m = locations_->size();
        Sequence seq;
        if (mode_ == BoundMode::by_count) {
            const auto k = static_cast<std::size_t>(std::min<std::int64_t>(bound_, static_cast<std::int64_t>(m)));
            seq.knn = locations_->knn_prefix(center, k - 1);
            seq.length = static_cast<std::uint32_t>(k);
            return seq;
        }
        // by_volume: stop before the member that would push the total over the bound
        Volume total = weight[center];
        seq.knn = locations_->knn_prefix_while(center, [&](LocIndex j) {
            if (total + weight[j] > bound_) return false;
            total += weight[j];
            return true;
        });
        seq.length = static_cast<std::uint32_t>(seq.knn->size() + 1);
        return seq;
    }

    std::shared_ptr<const LocationSet> locations_;
    std::vector<Volume> outflow_;
    std::vector<Volume> inflow_;
    BoundMode mode_;
    std::int64_t bound_;
    std::vector<Sequence> origin_;
    std::vector<Sequence> dest_;
};

/// Distinct (origin, dest) pairs in canonical (index) order.
inline std::vector<std::pair<LocIndex, LocIndex>> focal_pairs(const FlowDataset& data) {
    std::vector<std::pair<LocIndex, LocIndex>> pairs;
    pairs.reserve(data.flow_count());
    for (const Flow& f : data.flows()) pairs.emplace_back(f.origin, f.dest);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

namespace detail {

/// Best candidate of one focal flow, as scales rather than member lists.
struct FocalBest {
    double lglr = 0.0;
    std::uint32_t k_origin = 0;
    std::uint32_t k_dest = 0;
    Volume observed = 0;
    Volume origin_out = 0;
    Volume dest_in = 0;

    bool found() const noexcept { return k_origin > 0; }

    /// Strict preference: higher lglr, then smaller k_O + k_D, then smaller k_O.
    bool improved_by(double l, std::uint32_t ko, std::uint32_t kd) const {
        if (l > lglr) return true;
        if (l < lglr || !found()) return false;
        const auto s = ko + kd;
        const auto t = k_origin + k_dest;
        return s < t || (s == t && ko < k_origin);
    }
};

/// Per-worker scratch buffers, sized to the location count.
///
/// Active destination positions (those receiving flow from the current
/// origin neighborhood) are kept sorted with their cumulative inflow and
/// cumulative observed flow, so each origin step touches only positions at
/// or after the first one it changed.
class FocalSweep {
public:
    explicit FocalSweep(std::size_t location_count) : pos_(location_count, -1) {}

    /// Scans one focal flow, pruning candidates that provably cannot exceed
    /// `floor` (they are never the strict best). `candidates` receives the
    /// number of disjoint (O, D) scale combinations in the search space.
    FocalBest run(const FlowDataset& data, const ScanPlan& plan, LocIndex o, LocIndex d, std::uint64_t& candidates,
                  double floor = 0.0) {
        FocalBest best;
        const auto& oseq = plan.origin_sequence(o);
        const auto& dseq = plan.dest_sequence(d);
        const std::size_t n_o = oseq.length;
        const double total = static_cast<double>(data.total_flow());

        mark_dest(data, dseq, d);
        std::size_t dlimit = dseq.length;
        Volume fout = 0;
        for (std::size_t i = 0; i < n_o; ++i) {
            const LocIndex loc = oseq.member(o, i);
            if (const auto p = pos_[loc]; p >= 0) dlimit = std::min<std::size_t>(dlimit, static_cast<std::size_t>(p));
            if (dlimit == 0) break;
            fout += data.outflow(loc);
            const std::size_t first = insert_arcs(data, loc);
            candidates += dlimit;
            // positions before `first` kept their observed flow while the
            // outflow grew: dominated by the previous origin scale
            if (first >= dlimit) continue;
            evaluate(best, static_cast<std::uint32_t>(i + 1), fout, first, dlimit, total, floor);
        }
        clear(dseq, d);
        return best;
    }

    /// Observed flow for every (k_O, k_D) pair, maintained incrementally as
    /// the sweep does. Row i is k_O = i+1; entries ignore disjointness.
    std::vector<std::vector<Volume>> observed_grid(const FlowDataset& data, const ScanPlan& plan, LocIndex o,
                                                   LocIndex d) {
        const auto& oseq = plan.origin_sequence(o);
        const auto& dseq = plan.dest_sequence(d);
        mark_dest(data, dseq, d);
        std::vector<std::vector<Volume>> grid;
        for (std::size_t i = 0; i < oseq.length; ++i) {
            insert_arcs(data, oseq.member(o, i));
            std::vector<Volume> row(dseq.length, 0);
            std::size_t t = 0;
            Volume cum = 0;
            for (std::size_t j = 0; j < dseq.length; ++j) {
                if (t < active_.size() && active_[t] == j) cum = observed_[t++];
                row[j] = cum;
            }
            grid.push_back(std::move(row));
        }
        clear(dseq, d);
        return grid;
    }

private:
    void mark_dest(const FlowDataset& data, const ScanPlan::Sequence& dseq, LocIndex d) {
        const std::size_t n_d = dseq.length;
        if (fin_.size() < n_d) fin_.resize(n_d);
        Volume fin = 0;
        for (std::size_t j = 0; j < n_d; ++j) {
            const LocIndex loc = dseq.member(d, j);
            pos_[loc] = static_cast<std::int32_t>(j);
            fin += data.inflow(loc);
            fin_[j] = fin;
        }
        active_.clear();
        inflow_.clear();
        observed_.clear();
    }

    void clear(const ScanPlan::Sequence& dseq, LocIndex d) {
        for (std::size_t j = 0; j < dseq.length; ++j) pos_[dseq.member(d, j)] = -1;
    }

    // Adds the flows leaving `loc` into the destination sequence and returns
    // the smallest position touched (SIZE_MAX if none).
    std::size_t insert_arcs(const FlowDataset& data, LocIndex loc) {
        std::size_t first = std::numeric_limits<std::size_t>::max();
        for (const Arc& a : data.out_arcs(loc)) {
            const auto p = pos_[a.other];
            if (p < 0) continue;
            const auto j = static_cast<std::uint32_t>(p);
            first = std::min<std::size_t>(first, j);
            auto it = std::lower_bound(active_.begin(), active_.end(), j);
            const auto t = static_cast<std::size_t>(it - active_.begin());
            if (it == active_.end() || *it != j) {
                active_.insert(it, j);
                inflow_.insert(inflow_.begin() + static_cast<std::ptrdiff_t>(t), fin_[j]);
                observed_.insert(observed_.begin() + static_cast<std::ptrdiff_t>(t), t > 0 ? observed_[t - 1] : 0);
            }
            Volume* y = observed_.data();
            for (std::size_t u = t, n = observed_.size(); u < n; ++u) y[u] += a.volume;
        }
        return first;
    }

    void evaluate(FocalBest& best, std::uint32_t k_origin, Volume fout, std::size_t first, std::size_t dlimit,
                  double total, double floor) {
        const auto begin = static_cast<std::size_t>(
            std::lower_bound(active_.begin(), active_.end(), static_cast<std::uint32_t>(first)) - active_.begin());
        const auto end = static_cast<std::size_t>(
            std::lower_bound(active_.begin(), active_.end(), static_cast<std::uint32_t>(dlimit)) - active_.begin());
        const double a = static_cast<double>(fout) / total;
        const Volume* xs = inflow_.data();
        const Volume* ys = observed_.data();
        for (std::size_t t = begin; t < end; ++t) {
            const double e = a * static_cast<double>(xs[t]);
            const double y = static_cast<double>(ys[t]);
            if (!(y > e * (1.0 - 1e-12))) continue;
            // LGLR <= (y - e)^2 F / (e (F - e)), from ln z <= z - 1
            const double gap = y - e;
            const double bound = gap * gap * total / (e * (total - e));
            const double bar = std::max(best.lglr, floor);
            if (bound * (1.0 + 1e-9) < bar) continue;
            // exact score from the same expression as expected_flow, so equal
            // candidates tie bit for bit
            const double l = lglr(y, static_cast<double>(fout) * static_cast<double>(xs[t]) / total, total);
            if (l <= 0.0) continue;
            const auto k_dest = active_[t] + 1;
            if (best.improved_by(l, k_origin, k_dest)) {
                best.lglr = l;
                best.k_origin = k_origin;
                best.k_dest = k_dest;
                best.observed = ys[t];
                best.origin_out = fout;
                best.dest_in = xs[t];
            }
        }
    }

    std::vector<std::int32_t> pos_;
    std::vector<Volume> fin_;
    std::vector<std::uint32_t> active_;  // sorted destination positions
    std::vector<Volume> inflow_;         // cumulative inflow at each active position
    std::vector<Volume> observed_;       // cumulative observed flow at each active position
};

inline FlowCluster make_cluster(const FlowDataset& data, const ScanPlan& plan, LocIndex o, LocIndex d,
                                const FocalBest& best) {
    FlowCluster c;
    c.origin = plan.materialize(o, best.k_origin, true);
    c.dest = plan.materialize(d, best.k_dest, false);
    c.observed = best.observed;
    c.expected = expected_flow(best.origin_out, best.dest_in, data.total_flow());
    c.lglr = best.lglr;
    c.focal_origin = o;
    c.focal_dest = d;
    c.distance = data.distance(o, d);
    return c;
}

}  // namespace detail

struct ScanStats {
    std::uint64_t candidates_evaluated = 0;
    std::size_t focal_flows = 0;
    double wall_seconds = 0.0;
};

struct ScanResult {
    std::vector<FlowCluster> clusters;  // canonical focal order
    ScanStats stats;
    BoundMode bound_mode = BoundMode::by_volume;
    std::int64_t bound = 0;
};

/// Strongest cluster around one focal flow, or nothing if no candidate
/// scores above zero.
inline std::optional<FlowCluster> scan_flow(const FlowDataset& data, const ScanPlan& plan, LocIndex origin,
                                            LocIndex dest) {
    if (!plan.compatible(data)) throw std::invalid_argument("scan_flow: plan built for different marginals");
    if (plan.origin_sequence(origin).length == 0 || plan.dest_sequence(dest).length == 0)
        throw std::invalid_argument("scan_flow: focal flow does not belong to the dataset");
    detail::FocalSweep sweep(data.location_count());
    std::uint64_t candidates = 0;
    const auto best = sweep.run(data, plan, origin, dest, candidates);
    if (!best.found()) return std::nullopt;
    return detail::make_cluster(data, plan, origin, dest, best);
}

inline std::optional<FlowCluster> scan_flow(const FlowDataset& data, LocIndex origin, LocIndex dest,
                                            const ScanConfig& config) {
    return scan_flow(data, ScanPlan(data, config), origin, dest);
}

inline ScanResult scan_all(const FlowDataset& data, const ScanPlan& plan, const ScanConfig& config) {
    if (!plan.compatible(data)) throw std::invalid_argument("scan_all: plan built for different marginals");
    const auto start = std::chrono::steady_clock::now();
    const auto focals = focal_pairs(data);
    std::vector<std::optional<detail::FocalBest>> best(focals.size());
    const unsigned workers = config.workers == 0 ? default_workers() : config.workers;
    std::vector<std::uint64_t> candidates(workers, 0);
    std::vector<std::unique_ptr<detail::FocalSweep>> sweeps(workers);

    parallel_chunks(focals.size(), workers, 16, [&](unsigned w, std::size_t begin, std::size_t end) {
        if (!sweeps[w]) sweeps[w] = std::make_unique<detail::FocalSweep>(data.location_count());
        for (std::size_t f = begin; f < end; ++f) {
            auto b = sweeps[w]->run(data, plan, focals[f].first, focals[f].second, candidates[w],
                                    config.min_lglr_record);
            if (b.found() && b.lglr > config.min_lglr_record) best[f] = b;
        }
    });

    ScanResult result;
    result.bound_mode = plan.bound_mode();
    result.bound = plan.bound();
    for (std::size_t f = 0; f < focals.size(); ++f)
        if (best[f]) result.clusters.push_back(detail::make_cluster(data, plan, focals[f].first, focals[f].second, *best[f]));
    for (auto c : candidates) result.stats.candidates_evaluated += c;
    result.stats.focal_flows = focals.size();
    result.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

inline ScanResult scan_all(const FlowDataset& data, const ScanConfig& config) {
    return scan_all(data, ScanPlan(data, config), config);
}

/// Maximum LGLR over all candidates of all focal flows (0 if none).
inline double scan_max(const FlowDataset& data, const ScanPlan& plan, unsigned workers) {
    if (!plan.compatible(data)) throw std::invalid_argument("scan_max: plan built for different marginals");
    const auto focals = focal_pairs(data);
    if (workers == 0) workers = default_workers();
    std::vector<double> best(workers, 0.0);
    std::vector<std::unique_ptr<detail::FocalSweep>> sweeps(workers);
    parallel_chunks(focals.size(), workers, 16, [&](unsigned w, std::size_t begin, std::size_t end) {
        if (!sweeps[w]) sweeps[w] = std::make_unique<detail::FocalSweep>(data.location_count());
        std::uint64_t ignored = 0;
        for (std::size_t f = begin; f < end; ++f)
            best[w] = std::max(
                best[w], sweeps[w]->run(data, plan, focals[f].first, focals[f].second, ignored, best[w]).lglr);
    });
    return *std::max_element(best.begin(), best.end());
}

/// Canonical ordering used when comparing cluster lists.
inline bool canonical_less(const FlowCluster& a, const FlowCluster& b) {
    return std::pair{a.focal_origin, a.focal_dest} < std::pair{b.focal_origin, b.focal_dest};
}

}  // namespace xflow
