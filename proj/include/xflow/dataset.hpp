#pragma once

// Origin-destination flow data model.
//
// A FlowDataset is an immutable view over a LocationSet (coordinates, ids and
// a lazily filled k-nearest-neighbor cache) plus directed flows with their
// per-location marginals. Permuted copies share the LocationSet, so k-NN
// orderings are computed once per set of locations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace xflow {

using LocIndex = std::uint32_t;
using Volume = std::int64_t;

enum class DistanceMode { planar, spherical };

struct Location {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    std::optional<double> population;
};

/// Flow between two location indices of a dataset.
struct Flow {
    LocIndex origin = 0;
    LocIndex dest = 0;
    Volume volume = 0;

    friend bool operator==(const Flow&, const Flow&) = default;
};

/// Flow keyed by location ids, as read from input files.
struct FlowRecord {
    std::string origin_id;
    std::string dest_id;
    Volume volume = 0;
};

/// Outgoing (or incoming) half-edge in an adjacency list.
struct Arc {
    LocIndex other = 0;
    Volume volume = 0;
};

class IngestError : public std::runtime_error {
public:
    enum class Kind {
        malformed_header,
        malformed_row,
        duplicate_location,
        invalid_coordinate,
        unknown_location,
        self_flow,
        non_positive_volume,
        empty_flows,
        empty_locations,
        io,
    };

    IngestError(Kind kind, std::size_t row, const std::string& what)
        : std::runtime_error(what), kind_(kind), row_(row) {}

    Kind kind() const noexcept { return kind_; }
    /// 1-based data row (header excluded); 0 when not tied to a row.
    std::size_t row() const noexcept { return row_; }

private:
    Kind kind_;
    std::size_t row_;
};

inline constexpr double kEarthRadiusMeters = 6371008.8;

/// Locations with identity, geometry and the shared k-NN cache.
class LocationSet {
public:
    LocationSet(std::vector<Location> locations, DistanceMode mode)
        : locations_(std::move(locations)), mode_(mode), knn_(locations_.size()) {
        if (locations_.empty()) throw IngestError(IngestError::Kind::empty_locations, 0, "no locations");
        index_.reserve(locations_.size());
        for (std::size_t i = 0; i < locations_.size(); ++i) {
            const Location& loc = locations_[i];
            if (!std::isfinite(loc.x) || !std::isfinite(loc.y))
                throw IngestError(IngestError::Kind::invalid_coordinate, i + 1,
                                  "location '" + loc.id + "' has a non-finite coordinate");
            if (loc.population && (*loc.population < 0 || !std::isfinite(*loc.population)))
                throw IngestError(IngestError::Kind::invalid_coordinate, i + 1,
                                  "location '" + loc.id + "' has an invalid population");
            if (!index_.emplace(loc.id, static_cast<LocIndex>(i)).second)
                throw IngestError(IngestError::Kind::duplicate_location, i + 1,
                                  "duplicate location id '" + loc.id + "'");
        }
        std::vector<LocIndex> order(locations_.size());
        std::iota(order.begin(), order.end(), LocIndex{0});
        std::sort(order.begin(), order.end(),
                  [&](LocIndex a, LocIndex b) { return locations_[a].id < locations_[b].id; });
        id_rank_.resize(locations_.size());
        for (std::size_t r = 0; r < order.size(); ++r) id_rank_[order[r]] = static_cast<LocIndex>(r);
        if (mode_ == DistanceMode::planar) build_grid();
    }

    LocationSet(const LocationSet&) = delete;
    LocationSet& operator=(const LocationSet&) = delete;

    std::size_t size() const noexcept { return locations_.size(); }
    const Location& operator[](LocIndex i) const { return locations_[i]; }
    const std::vector<Location>& all() const noexcept { return locations_; }
    DistanceMode mode() const noexcept { return mode_; }

    std::optional<LocIndex> find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Rank of the id in lexicographic order; used for distance ties.
    LocIndex id_rank(LocIndex i) const { return id_rank_[i]; }

    /// Euclidean distance, or great-circle meters on (lon, lat) degrees.
    double distance(LocIndex a, LocIndex b) const {
        const double key = distance_key(a, b);
        if (mode_ == DistanceMode::planar) return std::sqrt(key);
        return 2.0 * kEarthRadiusMeters * std::asin(std::sqrt(key));
    }

    /// Monotone surrogate of distance used for ordering.
    double distance_key(LocIndex a, LocIndex b) const {
        const Location& p = locations_[a];
        const Location& q = locations_[b];
        if (mode_ == DistanceMode::planar) {
            const double dx = p.x - q.x;
            const double dy = p.y - q.y;
            return dx * dx + dy * dy;
        }
        // haversine term, monotone in great-circle distance
        constexpr double deg = 3.14159265358979323846 / 180.0;
        const double s1 = std::sin((q.y - p.y) * deg * 0.5);
        const double s2 = std::sin((q.x - p.x) * deg * 0.5);
        const double h = s1 * s1 + std::cos(p.y * deg) * std::cos(q.y * deg) * s2 * s2;
        return std::min(1.0, h);
    }

    /// The first `count` entries of the k-NN ordering of `center` (center
    /// excluded), ascending distance with lexicographic-id tie break. The
    /// returned vector may be longer than requested; it is a prefix of the
    /// full ordering and stays valid for the lifetime of the caller's copy.
    std::shared_ptr<const std::vector<LocIndex>> knn_prefix(LocIndex center, std::size_t count) const {
        const std::size_t others = size() - 1;
        count = std::min(count, others);
        auto& slot = knn_[center];
        std::mutex& stripe = stripes_[center % stripes_.size()];
        {
            std::lock_guard lock(stripe);
            if (slot && slot->size() >= count) return slot;
        }
        auto computed = compute_prefix(center, count);
        std::lock_guard lock(stripe);
        if (!slot || slot->size() < computed->size()) slot = std::move(computed);
        return slot;
    }

    /// Extends the k-NN ordering of `center` one location at a time while
    /// `keep(location)` holds, and returns the accepted prefix. The first
    /// rejected location is not included. The prefix is cached.
    template <typename Keep>
    std::shared_ptr<const std::vector<LocIndex>> knn_prefix_while(LocIndex center, Keep keep) const {
        auto& slot = knn_[center];
        std::mutex& stripe = stripes_[center % stripes_.size()];
        std::shared_ptr<const std::vector<LocIndex>> cached;
        {
            std::lock_guard lock(stripe);
            cached = slot;
        }
        std::size_t known = 0;
        if (cached) {
            while (known < cached->size() && keep((*cached)[known])) ++known;
            if (known < cached->size() || cached->size() == size() - 1) {
                if (known == cached->size()) return cached;
                return std::make_shared<const std::vector<LocIndex>>(
                    cached->begin(), cached->begin() + static_cast<std::ptrdiff_t>(known));
            }
        }
        // cached entries were all accepted: continue the walk past them
        auto out = std::make_shared<std::vector<LocIndex>>();
        auto step = [&](LocIndex j) {
            if (out->size() >= known && !keep(j)) return false;
            out->push_back(j);
            return true;
        };
        if (mode_ == DistanceMode::planar) {
            grid_walk(center, step);
        } else {
            auto all = scan_prefix(center, size() - 1);
            for (LocIndex j : *all)
                if (!step(j)) break;
        }
        std::shared_ptr<const std::vector<LocIndex>> result = std::move(out);
        std::lock_guard lock(stripe);
        if (!slot || slot->size() < result->size()) slot = result;
        return result;
    }

private:
    struct Key {
        double dist;
        LocIndex rank;
        LocIndex index;
    };

    static bool key_less(const Key& a, const Key& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.rank < b.rank);
    }

    std::shared_ptr<const std::vector<LocIndex>> compute_prefix(LocIndex center, std::size_t count) const {
        return mode_ == DistanceMode::planar ? grid_prefix(center, count) : scan_prefix(center, count);
    }

    // Exhaustive selection over all locations.
    std::shared_ptr<const std::vector<LocIndex>> scan_prefix(LocIndex center, std::size_t count) const {
        std::vector<Key> keys;
        keys.reserve(size() - 1);
        for (LocIndex j = 0; j < size(); ++j)
            if (j != center) keys.push_back({distance_key(center, j), id_rank_[j], j});
        if (count < keys.size()) {
            std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count), keys.end(), key_less);
            keys.resize(count);
        }
        std::sort(keys.begin(), keys.end(), key_less);
        auto out = std::make_shared<std::vector<LocIndex>>();
        out->reserve(keys.size());
        for (const Key& k : keys) out->push_back(k.index);
        return out;
    }

    std::shared_ptr<const std::vector<LocIndex>> grid_prefix(LocIndex center, std::size_t count) const {
        auto out = std::make_shared<std::vector<LocIndex>>();
        out->reserve(count);
        if (count == 0) return out;
        grid_walk(center, [&](LocIndex j) {
            out->push_back(j);
            return out->size() < count;
        });
        return out;
    }

    // Ring-by-ring search over a uniform grid, emitting locations in exact
    // k-NN order until `visit` returns false. After rings 0..r are
    // collected, every uncollected point is at least r * cell away, so
    // collected points strictly closer than that are final.
    template <typename Visit>
    void grid_walk(LocIndex center, Visit visit) const {
        const Location& c = locations_[center];
        const long cx = cell_x(c.x);
        const long cy = cell_y(c.y);
        const long max_ring = std::max({cx, grid_nx_ - 1 - cx, cy, grid_ny_ - 1 - cy});
        std::vector<Key> pool;
        std::vector<Key> ready;
        auto take_cell = [&](long gx, long gy) {
            if (gx < 0 || gy < 0 || gx >= grid_nx_ || gy >= grid_ny_) return;
            const auto cell = static_cast<std::size_t>(gy * grid_nx_ + gx);
            for (std::size_t q = grid_offsets_[cell]; q < grid_offsets_[cell + 1]; ++q) {
                const LocIndex j = grid_items_[q];
                if (j != center) pool.push_back({distance_key(center, j), id_rank_[j], j});
            }
        };
        for (long r = 0; r <= max_ring; ++r) {
            if (r == 0) {
                take_cell(cx, cy);
            } else {
                for (long gx = cx - r; gx <= cx + r; ++gx) {
                    take_cell(gx, cy - r);
                    take_cell(gx, cy + r);
                }
                for (long gy = cy - r + 1; gy <= cy + r - 1; ++gy) {
                    take_cell(cx - r, gy);
                    take_cell(cx + r, gy);
                }
            }
            const bool last = r == max_ring;
            const double reach = static_cast<double>(r) * grid_cell_;
            const double safe = reach * reach * (1.0 - 1e-12);
            auto split = last ? pool.end()
                              : std::partition(pool.begin(), pool.end(), [&](const Key& k) { return k.dist < safe; });
            ready.assign(pool.begin(), split);
            pool.erase(pool.begin(), split);
            std::sort(ready.begin(), ready.end(), key_less);
            for (const Key& k : ready)
                if (!visit(k.index)) return;
        }
    }

    long cell_x(double x) const {
        return std::clamp(static_cast<long>((x - grid_x0_) / grid_cell_), 0L, grid_nx_ - 1);
    }
    long cell_y(double y) const {
        return std::clamp(static_cast<long>((y - grid_y0_) / grid_cell_), 0L, grid_ny_ - 1);
    }

    void build_grid() {
        double x0 = locations_[0].x, x1 = x0, y0 = locations_[0].y, y1 = y0;
        for (const Location& l : locations_) {
            x0 = std::min(x0, l.x);
            x1 = std::max(x1, l.x);
            y0 = std::min(y0, l.y);
            y1 = std::max(y1, l.y);
        }
        const double w = x1 - x0;
        const double h = y1 - y0;
        const double per_cell = 2.0;
        double cell = std::sqrt(std::max(w * h, 0.0) * per_cell / static_cast<double>(size()));
        if (!(cell > 0.0)) cell = std::max(w, h) * per_cell / static_cast<double>(size());
        if (!(cell > 0.0)) cell = 1.0;
        grid_cell_ = cell;
        grid_x0_ = x0;
        grid_y0_ = y0;
        grid_nx_ = std::min<long>(static_cast<long>(w / cell) + 1, 1L << 15);
        grid_ny_ = std::min<long>(static_cast<long>(h / cell) + 1, 1L << 15);
        grid_cell_ = std::max({cell, w / static_cast<double>(grid_nx_), h / static_cast<double>(grid_ny_)});
        grid_nx_ = std::max(1L, std::min(grid_nx_, static_cast<long>(w / grid_cell_) + 1));
        grid_ny_ = std::max(1L, std::min(grid_ny_, static_cast<long>(h / grid_cell_) + 1));
        const auto cells = static_cast<std::size_t>(grid_nx_ * grid_ny_);
        grid_offsets_.assign(cells + 1, 0);
        std::vector<std::size_t> cell_of(size());
        for (std::size_t i = 0; i < size(); ++i) {
            cell_of[i] = static_cast<std::size_t>(cell_y(locations_[i].y) * grid_nx_ + cell_x(locations_[i].x));
            ++grid_offsets_[cell_of[i] + 1];
        }
        for (std::size_t c = 0; c < cells; ++c) grid_offsets_[c + 1] += grid_offsets_[c];
        grid_items_.resize(size());
        std::vector<std::size_t> cursor(grid_offsets_.begin(), grid_offsets_.end() - 1);
        for (std::size_t i = 0; i < size(); ++i) grid_items_[cursor[cell_of[i]]++] = static_cast<LocIndex>(i);
    }

    std::vector<Location> locations_;
    DistanceMode mode_;
    std::unordered_map<std::string, LocIndex> index_;
    std::vector<LocIndex> id_rank_;
    double grid_x0_ = 0.0;
    double grid_y0_ = 0.0;
    double grid_cell_ = 1.0;
    long grid_nx_ = 1;
    long grid_ny_ = 1;
    std::vector<std::size_t> grid_offsets_;
    std::vector<LocIndex> grid_items_;
    mutable std::vector<std::shared_ptr<const std::vector<LocIndex>>> knn_;
    mutable std::array<std::mutex, 64> stripes_;
};

class FlowDataset {
public:
    FlowDataset(std::shared_ptr<const LocationSet> locations, std::vector<Flow> flows)
        : locations_(std::move(locations)), flows_(std::move(flows)) {
        if (!locations_) throw std::invalid_argument("FlowDataset: null location set");
        if (flows_.empty()) throw IngestError(IngestError::Kind::empty_flows, 0, "flow table is empty");
        const std::size_t m = locations_->size();
        outflow_.assign(m, 0);
        inflow_.assign(m, 0);
        for (std::size_t i = 0; i < flows_.size(); ++i) {
            const Flow& f = flows_[i];
            if (f.origin >= m || f.dest >= m)
                throw IngestError(IngestError::Kind::unknown_location, i + 1, "flow endpoint out of range");
            if (f.origin == f.dest)
                throw IngestError(IngestError::Kind::self_flow, i + 1,
                                  "self-flow at location '" + (*locations_)[f.origin].id + "'");
            if (f.volume <= 0)
                throw IngestError(IngestError::Kind::non_positive_volume, i + 1, "flow volume must be positive");
            outflow_[f.origin] += f.volume;
            inflow_[f.dest] += f.volume;
            total_ += f.volume;
        }
        build_csr(out_offsets_, out_arcs_, [](const Flow& f) { return std::pair{f.origin, f.dest}; });
        build_csr(in_offsets_, in_arcs_, [](const Flow& f) { return std::pair{f.dest, f.origin}; });
    }

    const LocationSet& locations() const noexcept { return *locations_; }
    const std::shared_ptr<const LocationSet>& shared_locations() const noexcept { return locations_; }
    const Location& location(LocIndex i) const { return (*locations_)[i]; }
    std::size_t location_count() const noexcept { return locations_->size(); }

    const std::vector<Flow>& flows() const noexcept { return flows_; }
    std::size_t flow_count() const noexcept { return flows_.size(); }
    Volume total_flow() const noexcept { return total_; }

    Volume outflow(LocIndex i) const { return outflow_[i]; }
    Volume inflow(LocIndex i) const { return inflow_[i]; }
    const std::vector<Volume>& outflows() const noexcept { return outflow_; }
    const std::vector<Volume>& inflows() const noexcept { return inflow_; }

    std::span<const Arc> out_arcs(LocIndex i) const {
        return {out_arcs_.data() + out_offsets_[i], out_arcs_.data() + out_offsets_[i + 1]};
    }
    std::span<const Arc> in_arcs(LocIndex i) const {
        return {in_arcs_.data() + in_offsets_[i], in_arcs_.data() + in_offsets_[i + 1]};
    }

    LocIndex index_of(std::string_view id) const {
        auto idx = locations_->find(id);
        if (!idx) throw std::invalid_argument("unknown location id '" + std::string(id) + "'");
        return *idx;
    }

    double distance(LocIndex a, LocIndex b) const { return locations_->distance(a, b); }

    /// Full k-NN ordering of `center` (every other location).
    std::vector<LocIndex> knn_order(LocIndex center) const {
        auto prefix = locations_->knn_prefix(center, location_count());
        return *prefix;
    }

private:
    template <typename Ends>
    void build_csr(std::vector<std::size_t>& offsets, std::vector<Arc>& arcs, Ends ends) {
        const std::size_t m = locations_->size();
        offsets.assign(m + 1, 0);
        for (const Flow& f : flows_) ++offsets[ends(f).first + 1];
        for (std::size_t i = 0; i < m; ++i) offsets[i + 1] += offsets[i];
        arcs.resize(flows_.size());
        std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
        for (const Flow& f : flows_) {
            auto [from, to] = ends(f);
            arcs[cursor[from]++] = Arc{to, f.volume};
        }
    }

    std::shared_ptr<const LocationSet> locations_;
    std::vector<Flow> flows_;
    Volume total_ = 0;
    std::vector<Volume> outflow_;
    std::vector<Volume> inflow_;
    std::vector<std::size_t> out_offsets_;
    std::vector<Arc> out_arcs_;
    std::vector<std::size_t> in_offsets_;
    std::vector<Arc> in_arcs_;
};

/// Circular k-NN region: the center plus its k-1 nearest locations.
struct Neighborhood {
    LocIndex center = 0;
    std::vector<LocIndex> members;  // center first, then k-NN order
    double radius = 0.0;
    Volume outflow_total = 0;
    Volume inflow_total = 0;

    std::size_t k() const noexcept { return members.size(); }
};

inline Neighborhood neighborhood(const FlowDataset& data, LocIndex center, std::size_t k) {
    const std::size_t m = data.location_count();
    if (center >= m) throw std::out_of_range("neighborhood: center index out of range");
    if (k < 1 || k > m) throw std::out_of_range("neighborhood: k must be in [1, m]");
    Neighborhood n;
    n.center = center;
    n.members.reserve(k);
    n.members.push_back(center);
    if (k > 1) {
        auto order = data.locations().knn_prefix(center, k - 1);
        n.members.insert(n.members.end(), order->begin(), order->begin() + static_cast<std::ptrdiff_t>(k - 1));
        n.radius = data.distance(center, n.members.back());
    }
    for (LocIndex i : n.members) {
        n.outflow_total += data.outflow(i);
        n.inflow_total += data.inflow(i);
    }
    return n;
}

inline Neighborhood neighborhood(const FlowDataset& data, std::string_view center_id, std::size_t k) {
    return neighborhood(data, data.index_of(center_id), k);
}

/// Total flow from members of `origin` to members of `dest`.
inline Volume flow_between(const FlowDataset& data, const Neighborhood& origin, const Neighborhood& dest) {
    std::vector<char> in_dest(data.location_count(), 0);
    for (LocIndex d : dest.members) in_dest[d] = 1;
    Volume total = 0;
    for (LocIndex o : origin.members)
        for (const Arc& a : data.out_arcs(o))
            if (in_dest[a.other]) total += a.volume;
    return total;
}

/// Resolves id-keyed records against a location set.
inline FlowDataset make_dataset(std::shared_ptr<const LocationSet> locations, const std::vector<FlowRecord>& records) {
    if (records.empty()) throw IngestError(IngestError::Kind::empty_flows, 0, "flow table is empty");
    std::vector<Flow> flows;
    flows.reserve(records.size());
    std::size_t self_flows = 0;
    std::size_t first_self_row = 0;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const FlowRecord& rec = records[r];
        auto o = locations->find(rec.origin_id);
        if (!o)
            throw IngestError(IngestError::Kind::unknown_location, r + 1,
                              "row " + std::to_string(r + 1) + ": unknown origin id '" + rec.origin_id + "'");
        auto d = locations->find(rec.dest_id);
        if (!d)
            throw IngestError(IngestError::Kind::unknown_location, r + 1,
                              "row " + std::to_string(r + 1) + ": unknown destination id '" + rec.dest_id + "'");
        if (rec.volume <= 0)
            throw IngestError(IngestError::Kind::non_positive_volume, r + 1,
                              "row " + std::to_string(r + 1) + ": volume must be a positive integer");
        if (*o == *d) {
            if (self_flows++ == 0) first_self_row = r + 1;
            continue;
        }
        flows.push_back(Flow{*o, *d, rec.volume});
    }
    if (self_flows > 0)
        throw IngestError(IngestError::Kind::self_flow, first_self_row,
                          std::to_string(self_flows) + " self-flow record(s), first at row " +
                              std::to_string(first_self_row) + "; remove flows whose origin equals destination");
    return FlowDataset(std::move(locations), std::move(flows));
}

inline FlowDataset make_dataset(std::vector<Location> locations, const std::vector<FlowRecord>& records,
                                DistanceMode mode = DistanceMode::planar) {
    return make_dataset(std::make_shared<const LocationSet>(std::move(locations), mode), records);
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::optional<double> to_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::string buf(s);
    std::istringstream in(buf);
    in.imbue(std::locale::classic());
    double v = 0;
    in >> v;
    if (in.fail() || !in.eof()) return std::nullopt;
    return v;
}

inline std::optional<Volume> to_integer(std::string_view s) {
    if (s.empty()) return std::nullopt;
    Volume v = 0;
    bool negative = false;
    std::size_t i = 0;
    if (s[0] == '-' || s[0] == '+') {
        negative = s[0] == '-';
        i = 1;
        if (s.size() == 1) return std::nullopt;
    }
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        if (v > (std::numeric_limits<Volume>::max() - 9) / 10) return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return negative ? -v : v;
}

/// Reads non-blank lines after the header; returns (row number, cells).
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> read_rows(std::istream& in,
                                                                              std::vector<std::string>& header) {
    std::string line;
    bool have_header = false;
    std::size_t row = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    while (std::getline(in, line)) {
        if (!have_header) {
            if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
            if (trim(line).empty()) continue;
            for (auto c : split(line)) header.emplace_back(c);
            have_header = true;
            continue;
        }
        ++row;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        for (auto c : split(line)) cells.emplace_back(c);
        rows.emplace_back(row, std::move(cells));
    }
    return rows;
}

}  // namespace csv

/// Parses a locations table with header `id,x,y[,population]`.
inline std::vector<Location> read_locations_csv(std::istream& in) {
    std::vector<std::string> header;
    auto rows = csv::read_rows(in, header);
    const bool with_population = header.size() == 4 && header[3] == "population";
    if (header.size() < 3 || header[0] != "id" || header[1] != "x" || header[2] != "y" ||
        (header.size() == 4 && !with_population) || header.size() > 4)
        throw IngestError(IngestError::Kind::malformed_header, 0, "locations header must be id,x,y[,population]");
    std::vector<Location> out;
    out.reserve(rows.size());
    for (auto& [row, cells] : rows) {
        if (cells.size() != header.size())
            throw IngestError(IngestError::Kind::malformed_row, row,
                              "locations row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                  " fields");
        Location loc;
        loc.id = cells[0];
        if (loc.id.empty())
            throw IngestError(IngestError::Kind::malformed_row, row,
                              "locations row " + std::to_string(row) + ": empty id");
        auto x = csv::to_double(cells[1]);
        auto y = csv::to_double(cells[2]);
        if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y))
            throw IngestError(IngestError::Kind::invalid_coordinate, row,
                              "locations row " + std::to_string(row) + ": invalid coordinate");
        loc.x = *x;
        loc.y = *y;
        if (with_population && !cells[3].empty()) {
            auto p = csv::to_double(cells[3]);
            if (!p || *p < 0)
                throw IngestError(IngestError::Kind::malformed_row, row,
                                  "locations row " + std::to_string(row) + ": invalid population");
            loc.population = *p;
        }
        out.push_back(std::move(loc));
    }
    return out;
}

/// Parses a flows table with header `origin,dest,volume`.
inline std::vector<FlowRecord> read_flows_csv(std::istream& in) {
    std::vector<std::string> header;
    auto rows = csv::read_rows(in, header);
    if (header.size() != 3 || header[0] != "origin" || header[1] != "dest" || header[2] != "volume")
        throw IngestError(IngestError::Kind::malformed_header, 0, "flows header must be origin,dest,volume");
    std::vector<FlowRecord> out;
    out.reserve(rows.size());
    for (auto& [row, cells] : rows) {
        if (cells.size() != 3)
            throw IngestError(IngestError::Kind::malformed_row, row,
                              "flows row " + std::to_string(row) + ": expected 3 fields");
        auto v = csv::to_integer(cells[2]);
        if (!v)
            throw IngestError(IngestError::Kind::malformed_row, row,
                              "flows row " + std::to_string(row) + ": volume is not an integer");
        out.push_back(FlowRecord{cells[0], cells[1], *v});
    }
    return out;
}

/// Loads and validates a dataset. Location errors are checked first, then
/// flows in row order; each failure throws an IngestError naming the row.
inline FlowDataset load_dataset(std::istream& locations_source, std::istream& flows_source,
                                DistanceMode mode = DistanceMode::planar) {
    auto locations = read_locations_csv(locations_source);
    if (locations.empty()) throw IngestError(IngestError::Kind::empty_locations, 0, "locations table is empty");
    auto records = read_flows_csv(flows_source);
    if (records.empty()) throw IngestError(IngestError::Kind::empty_flows, 0, "flow table is empty");
    return make_dataset(std::make_shared<const LocationSet>(std::move(locations), mode), records);
}

inline FlowDataset load_dataset_files(const std::string& locations_path, const std::string& flows_path,
                                      DistanceMode mode = DistanceMode::planar) {
    std::ifstream locs(locations_path);
    if (!locs) throw IngestError(IngestError::Kind::io, 0, "cannot open " + locations_path);
    std::ifstream flows(flows_path);
    if (!flows) throw IngestError(IngestError::Kind::io, 0, "cannot open " + flows_path);
    return load_dataset(locs, flows, mode);
}

}  // namespace xflow
