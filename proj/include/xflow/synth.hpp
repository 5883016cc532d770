#pragma once

// Synthetic benchmark: planted cross-scale clusters plus distance-stratified
// random flows on the unit square. Every flow gets fresh endpoint points, so
// each location carries exactly one unit of outflow or inflow.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xflow/dataset.hpp"
#include "xflow/rng.hpp"

namespace xflow::synth {

struct Disk {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.0;

    bool contains(double px, double py) const {
        const double dx = px - x;
        const double dy = py - y;
        return dx * dx + dy * dy <= radius * radius;
    }
};

struct PlantedCluster {
    Disk origin;
    Disk dest;
    std::int64_t count = 0;
};

struct DistanceRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct SynthSpec {
    double area = 1.0;  // side of the square [0, area]^2
    std::vector<PlantedCluster> planted;
    std::int64_t noise_count = 0;
    std::vector<DistanceRange> noise_strata;
    std::uint64_t seed = 1;
};

/// Flow counts of the eight planted clusters.
inline constexpr std::int64_t kDefaultCounts[8] = {47, 193, 12, 193, 41, 80, 22, 12};

/// CDF of the distance between two independent uniform points in the unit square.
inline double pair_distance_cdf(double d) {
    if (d <= 0.0) return 0.0;
    if (d >= std::numbers::sqrt2) return 1.0;
    const double d2 = d * d;
    if (d <= 1.0) return std::numbers::pi * d2 - 8.0 / 3.0 * d2 * d + d2 * d2 / 2.0;
    return 1.0 / 3.0 - 2.0 * d2 - d2 * d2 / 2.0 + 4.0 / 3.0 * std::sqrt(d2 - 1.0) * (2.0 * d2 + 1.0) +
           2.0 * d2 * (std::asin(1.0 / d) - std::acos(1.0 / d));
}

/// `count` strata of equal width over [lo, hi).
inline std::vector<DistanceRange> equal_width_strata(std::size_t count, double lo, double hi) {
    if (count == 0 || !(hi > lo)) throw std::invalid_argument("synth: invalid stratum layout");
    std::vector<DistanceRange> out;
    const double w = (hi - lo) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i)
        out.push_back({lo + w * static_cast<double>(i), i + 1 == count ? hi : lo + w * static_cast<double>(i + 1)});
    return out;
}

/// `count` strata holding equal shares of uniform endpoint pairs on a square
/// of side `area`. Equal counts per stratum then leave origins and
/// destinations independent.
inline std::vector<DistanceRange> equal_probability_strata(std::size_t count, double area = 1.0) {
    if (count == 0 || !(area > 0.0)) throw std::invalid_argument("synth: invalid stratum layout");
    std::vector<double> cuts{0.0};
    for (std::size_t i = 1; i < count; ++i) {
        const double q = static_cast<double>(i) / static_cast<double>(count);
        double lo = 0.0;
        double hi = std::numbers::sqrt2;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (pair_distance_cdf(mid) < q ? lo : hi) = mid;
        }
        cuts.push_back(0.5 * (lo + hi));
    }
    cuts.push_back(std::numbers::sqrt2 * (1.0 + 1e-12));
    std::vector<DistanceRange> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back({cuts[i] * area, cuts[i + 1] * area});
    return out;
}

/// Eight planted clusters mixing large and small origin/destination disks,
/// and four equal-count noise strata.
inline SynthSpec default_spec(std::int64_t noise_count, std::uint64_t seed = 1) {
    if (noise_count < 0) throw std::invalid_argument("noise_count must be non-negative");
    SynthSpec spec;
    spec.noise_count = noise_count;
    spec.seed = seed;
    // {origin x, y, r}, {dest x, y, r}
    const PlantedCluster layout[8] = {
        {{0.12, 0.86, 0.090}, {0.46, 0.90, 0.030}, 0},  // large -> small
        {{0.18, 0.35, 0.120}, {0.76, 0.14, 0.110}, 0},  // large -> large
        {{0.60, 0.62, 0.008}, {0.88, 0.50, 0.008}, 0},  // small -> small
        {{0.45, 0.45, 0.035}, {0.82, 0.80, 0.120}, 0},  // small -> large
        {{0.34, 0.68, 0.025}, {0.12, 0.12, 0.030}, 0},  // medium -> medium
        {{0.93, 0.30, 0.060}, {0.55, 0.28, 0.070}, 0},  // medium -> medium
        {{0.62, 0.93, 0.012}, {0.28, 0.52, 0.018}, 0},  // small -> medium
        {{0.95, 0.94, 0.008}, {0.70, 0.40, 0.012}, 0},  // small -> small
    };
    for (int i = 0; i < 8; ++i) {
        PlantedCluster c = layout[i];
        c.count = kDefaultCounts[i];
        spec.planted.push_back(c);
    }
    spec.noise_strata = equal_probability_strata(4, spec.area);
    return spec;
}

/// Label of one generated flow: planted cluster index (0-based) or noise.
using Label = std::optional<int>;

struct SynthData {
    FlowDataset dataset;
    std::vector<Label> labels;  // one per flow, in flow order
    std::vector<std::int64_t> stratum_counts;
    bool padded_last_stratum = false;
};

namespace detail {

inline std::pair<double, double> point_in_disk(Rng& rng, const Disk& d) {
    const double r = d.radius * std::sqrt(rng.uniform());
    const double t = 2.0 * std::numbers::pi * rng.uniform();
    return {d.x + r * std::cos(t), d.y + r * std::sin(t)};
}

}  // namespace detail

inline void validate(const SynthSpec& spec) {
    if (!(spec.area > 0.0)) throw std::invalid_argument("synth: area must be positive");
    for (std::size_t i = 0; i < spec.planted.size(); ++i) {
        const auto& c = spec.planted[i];
        const std::string tag = "synth: planted cluster " + std::to_string(i + 1);
        if (!(c.origin.radius > 0.0) || !(c.dest.radius > 0.0)) throw std::invalid_argument(tag + " needs positive radii");
        if (c.count < 1) throw std::invalid_argument(tag + " needs at least one flow");
        if (std::hypot(c.origin.x - c.dest.x, c.origin.y - c.dest.y) <= c.origin.radius + c.dest.radius)
            throw std::invalid_argument(tag + " has overlapping origin and destination disks");
    }
    if (spec.noise_count > 0 && spec.noise_strata.empty())
        throw std::invalid_argument("synth: noise requires at least one distance stratum");
    const double diameter = spec.area * std::numbers::sqrt2;
    for (const auto& s : spec.noise_strata)
        if (!(s.lo >= 0.0) || !(s.hi > s.lo) || s.lo >= diameter)
            throw std::invalid_argument("synth: distance stratum [" + std::to_string(s.lo) + ", " +
                                        std::to_string(s.hi) + ") is infeasible within the area");
    if (spec.planted.empty() && spec.noise_count == 0) throw std::invalid_argument("synth: nothing to generate");
}

inline SynthData generate(const SynthSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    std::vector<Location> locations;
    std::vector<Flow> flows;
    std::vector<Label> labels;

    auto add_flow = [&](double ox, double oy, double dx, double dy, Label label) {
        const auto i = flows.size();
        const auto o = static_cast<LocIndex>(locations.size());
        locations.push_back(Location{"o" + std::to_string(i), ox, oy, std::nullopt});
        locations.push_back(Location{"d" + std::to_string(i), dx, dy, std::nullopt});
        flows.push_back(Flow{o, o + 1, 1});
        labels.push_back(label);
    };

    for (std::size_t c = 0; c < spec.planted.size(); ++c) {
        const auto& pc = spec.planted[c];
        for (std::int64_t k = 0; k < pc.count; ++k) {
            auto [ox, oy] = detail::point_in_disk(rng, pc.origin);
            auto [dx, dy] = detail::point_in_disk(rng, pc.dest);
            add_flow(ox, oy, dx, dy, static_cast<int>(c));
        }
    }

    std::vector<std::int64_t> per_stratum;
    bool padded = false;
    if (spec.noise_count > 0) {
        const auto strata = static_cast<std::int64_t>(spec.noise_strata.size());
        per_stratum.assign(spec.noise_strata.size(), spec.noise_count / strata);
        const std::int64_t remainder = spec.noise_count % strata;
        if (remainder != 0) {
            per_stratum.back() += remainder;
            padded = true;
        }
        for (std::size_t s = 0; s < spec.noise_strata.size(); ++s) {
            const auto range = spec.noise_strata[s];
            for (std::int64_t k = 0; k < per_stratum[s]; ++k) {
                // uniform endpoint pairs, rejected until the length falls in range
                for (std::int64_t attempt = 0;; ++attempt) {
                    if (attempt > 10'000'000)
                        throw std::invalid_argument("synth: distance stratum is infeasible within the area");
                    const double ox = rng.uniform(0.0, spec.area);
                    const double oy = rng.uniform(0.0, spec.area);
                    const double dx = rng.uniform(0.0, spec.area);
                    const double dy = rng.uniform(0.0, spec.area);
                    const double len = std::hypot(dx - ox, dy - oy);
                    if (len >= range.lo && len < range.hi && len > 0.0) {
                        add_flow(ox, oy, dx, dy, std::nullopt);
                        break;
                    }
                }
            }
        }
    }

    return SynthData{FlowDataset(std::make_shared<const LocationSet>(std::move(locations), DistanceMode::planar),
                                 std::move(flows)),
                     std::move(labels), std::move(per_stratum), padded};
}

}  // namespace xflow::synth
