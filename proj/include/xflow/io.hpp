#pragma once

// JSON and CSV artifacts: dataset export, cluster lists, null
// distributions, explorer bundles, run configurations and synthetic labels.
// Requires nlohmann/json.

#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xflow/dataset.hpp"
#include "xflow/render.hpp"
#include "xflow/scan.hpp"
#include "xflow/select.hpp"
#include "xflow/significance.hpp"
#include "xflow/synth.hpp"

namespace xflow::io {

using json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
inline std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Dataset

inline json dataset_json(const FlowDataset& data) {
    json locs = json::array();
    for (LocIndex i = 0; i < data.location_count(); ++i) {
        const Location& l = data.location(i);
        json j{{"id", l.id}, {"x", l.x}, {"y", l.y}};
        if (l.population) j["population"] = *l.population;
        j["outflow"] = data.outflow(i);
        j["inflow"] = data.inflow(i);
        locs.push_back(std::move(j));
    }
    json flows = json::array();
    for (const Flow& f : data.flows())
        flows.push_back({{"origin", data.location(f.origin).id}, {"dest", data.location(f.dest).id}, {"volume", f.volume}});
    return json{{"geometry", data.locations().mode() == DistanceMode::planar ? "planar" : "spherical"},
                {"total_flow", data.total_flow()},
                {"locations", std::move(locs)},
                {"flows", std::move(flows)}};
}

inline void write_locations_csv(std::ostream& out, const FlowDataset& data) {
    bool with_population = false;
    for (const Location& l : data.locations().all()) with_population |= l.population.has_value();
    out << (with_population ? "id,x,y,population\n" : "id,x,y\n");
    for (const Location& l : data.locations().all()) {
        out << l.id << ',' << shortest(l.x) << ',' << shortest(l.y);
        if (with_population) {
            out << ',';
            if (l.population) out << shortest(*l.population);
        }
        out << '\n';
    }
}

inline void write_flows_csv(std::ostream& out, const FlowDataset& data) {
    out << "origin,dest,volume\n";
    for (const Flow& f : data.flows())
        out << data.location(f.origin).id << ',' << data.location(f.dest).id << ',' << f.volume << '\n';
}

/// `flow,cluster` rows; cluster is the 1-based planted cluster or "noise".
inline void write_labels_csv(std::ostream& out, const std::vector<synth::Label>& labels) {
    out << "flow,cluster\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << i << ',';
        if (labels[i])
            out << (*labels[i] + 1);
        else
            out << "noise";
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Clusters

inline const char* bound_mode_name(BoundMode m) { return m == BoundMode::by_count ? "by_count" : "by_volume"; }

inline BoundMode parse_bound_mode(const std::string& s) {
    if (s == "by_count") return BoundMode::by_count;
    if (s == "by_volume") return BoundMode::by_volume;
    throw std::invalid_argument("unknown bound mode '" + s + "' (expected by_count or by_volume)");
}

inline json neighborhood_json(const FlowDataset& data, const Neighborhood& n) {
    json members = json::array();
    for (LocIndex i : n.members) members.push_back(data.location(i).id);
    return json{{"center", data.location(n.center).id},
                {"k", n.k()},
                {"radius", n.radius},
                {"outflow_total", n.outflow_total},
                {"inflow_total", n.inflow_total},
                {"members", std::move(members)}};
}

inline json cluster_json(const FlowDataset& data, const FlowCluster& c) {
    json j{{"focal", {{"o", data.location(c.focal_origin).id}, {"d", data.location(c.focal_dest).id}}},
           {"origin", neighborhood_json(data, c.origin)},
           {"dest", neighborhood_json(data, c.dest)},
           {"observed", c.observed},
           {"expected", c.expected},
           {"lglr", c.lglr},
           {"distance", c.distance}};
    if (c.p_value) j["p_value"] = *c.p_value;
    if (c.p_value_rank) j["p_value_rank"] = *c.p_value_rank;
    return j;
}

inline Neighborhood neighborhood_from_json(const FlowDataset& data, const json& j) {
    Neighborhood n;
    n.center = data.index_of(j.at("center").get<std::string>());
    for (const auto& m : j.at("members")) n.members.push_back(data.index_of(m.get<std::string>()));
    if (n.members.empty() || n.members.front() != n.center)
        throw std::invalid_argument("cluster JSON: neighborhood members must start with the center");
    n.radius = j.at("radius").get<double>();
    for (LocIndex i : n.members) {
        n.outflow_total += data.outflow(i);
        n.inflow_total += data.inflow(i);
    }
    return n;
}

inline FlowCluster cluster_from_json(const FlowDataset& data, const json& j) {
    FlowCluster c;
    c.focal_origin = data.index_of(j.at("focal").at("o").get<std::string>());
    c.focal_dest = data.index_of(j.at("focal").at("d").get<std::string>());
    c.origin = neighborhood_from_json(data, j.at("origin"));
    c.dest = neighborhood_from_json(data, j.at("dest"));
    c.observed = j.at("observed").get<Volume>();
    c.expected = j.at("expected").get<double>();
    c.lglr = j.at("lglr").get<double>();
    c.distance = j.at("distance").get<double>();
    if (j.contains("p_value")) c.p_value = j["p_value"].get<double>();
    if (j.contains("p_value_rank")) c.p_value_rank = j["p_value_rank"].get<double>();
    return c;
}

struct ClusterFile {
    std::vector<FlowCluster> clusters;
    json metadata = json::object();
};

inline json scan_metadata(const ScanResult& r, bool record_wall_time) {
    json m{{"bound_mode", bound_mode_name(r.bound_mode)},
           {"bound_value", r.bound},
           {"candidates_evaluated", r.stats.candidates_evaluated},
           {"focal_flows", r.stats.focal_flows}};
    m["wall_time"] = record_wall_time ? json(r.stats.wall_seconds) : json(nullptr);
    return m;
}

/// {metadata, clusters}; selected lists add selected/acceptance_rank.
inline json clusters_document(const FlowDataset& data, const std::vector<FlowCluster>& clusters, json metadata,
                              bool selected = false) {
    json list = json::array();
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        json c = cluster_json(data, clusters[i]);
        if (selected) {
            c["selected"] = true;
            c["acceptance_rank"] = i + 1;
        }
        list.push_back(std::move(c));
    }
    return json{{"metadata", std::move(metadata)}, {"clusters", std::move(list)}};
}

inline ClusterFile clusters_from_document(const FlowDataset& data, const json& doc) {
    ClusterFile f;
    if (!doc.is_object() || !doc.contains("clusters") || !doc["clusters"].is_array())
        throw std::invalid_argument("cluster JSON: expected an object with a clusters array");
    for (const auto& c : doc["clusters"]) f.clusters.push_back(cluster_from_json(data, c));
    if (doc.contains("metadata")) f.metadata = doc["metadata"];
    return f;
}

// ---------------------------------------------------------------------------
// Null distribution

inline json null_json(const NullDistribution& null, const GumbelFit& fit) {
    return json{{"L", null.size()},
                {"seed", null.seed},
                {"maxima", null.maxima},
                {"fit", {{"mu", fit.mu}, {"beta", fit.beta}}},
                {"passes", null.passes},
                {"skipped_swaps_total", null.skipped_swaps_total}};
}

inline std::pair<NullDistribution, GumbelFit> null_from_json(const json& j) {
    NullDistribution n;
    n.maxima = j.at("maxima").get<std::vector<double>>();
    n.seed = j.at("seed").get<std::uint64_t>();
    n.passes = j.value("passes", 10);
    n.skipped_swaps_total = j.value("skipped_swaps_total", std::uint64_t{0});
    if (n.maxima.size() != j.at("L").get<std::size_t>()) throw std::invalid_argument("null JSON: L does not match maxima");
    GumbelFit fit{j.at("fit").at("mu").get<double>(), j.at("fit").at("beta").get<double>()};
    if (!(fit.beta > 0.0)) throw std::invalid_argument("null JSON: beta must be positive");
    return {std::move(n), fit};
}

// ---------------------------------------------------------------------------
// Style and run configuration

inline json style_json(const SymbolStyle& s) {
    return json{{"n_classes", s.n_classes},
                {"hue", s.hue},
                {"w_mid_min", s.w_mid_min},
                {"w_mid_max", s.w_mid_max},
                {"curvature_coeff", s.curvature_coeff},
                {"origin_half_opacity", s.origin_half_opacity},
                {"show_circles", s.show_circles},
                {"origin_width_ratio", s.origin_width_ratio},
                {"pre_arrow_ratio", s.pre_arrow_ratio},
                {"min_segment_px", s.min_segment_px},
                {"margin_px", s.margin_px}};
}

inline SymbolStyle style_from_json(const json& j) {
    SymbolStyle s;
    s.n_classes = j.value("n_classes", s.n_classes);
    s.hue = j.value("hue", s.hue);
    s.w_mid_min = j.value("w_mid_min", s.w_mid_min);
    s.w_mid_max = j.value("w_mid_max", s.w_mid_max);
    s.curvature_coeff = j.value("curvature_coeff", s.curvature_coeff);
    s.origin_half_opacity = j.value("origin_half_opacity", s.origin_half_opacity);
    s.show_circles = j.value("show_circles", s.show_circles);
    s.origin_width_ratio = j.value("origin_width_ratio", s.origin_width_ratio);
    s.pre_arrow_ratio = j.value("pre_arrow_ratio", s.pre_arrow_ratio);
    s.min_segment_px = j.value("min_segment_px", s.min_segment_px);
    s.margin_px = j.value("margin_px", s.margin_px);
    return s;
}

/// Everything a pipeline run depends on. Missing keys keep their defaults.
struct RunConfig {
    // inputs and outputs
    std::string locations;
    std::string flows;
    std::string clusters;
    std::string null_distribution;
    std::string basemap;
    std::string output;
    std::string null_output;
    bool spherical = false;

    // synthetic data
    std::int64_t noise = 5400;
    std::string strata = "equal-probability";

    // scan
    BoundMode bound_mode = BoundMode::by_volume;
    std::int64_t bound = 0;
    double min_lglr_record = 0.0;
    unsigned workers = 1;
    bool record_wall_time = false;

    // significance
    std::size_t permutations = 100;
    std::uint64_t seed = 1;
    int passes = 10;

    // selection
    SelectionRule rule;

    // rendering
    SymbolStyle style;
    double width = 1000.0;
    double height = 800.0;

    ScanConfig scan_config() const {
        ScanConfig c;
        c.bound_mode = bound_mode;
        c.bound = bound;
        c.min_lglr_record = min_lglr_record;
        c.workers = workers;
        return c;
    }
};

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

inline json run_config_json(const RunConfig& c) {
    return json{{"paths",
                 {{"locations", c.locations},
                  {"flows", c.flows},
                  {"clusters", c.clusters},
                  {"null", c.null_distribution},
                  {"basemap", c.basemap},
                  {"output", c.output},
                  {"null_output", c.null_output}}},
                {"geometry", c.spherical ? "spherical" : "planar"},
                {"synth", {{"noise", c.noise}, {"strata", c.strata}}},
                {"scan",
                 {{"bound_mode", bound_mode_name(c.bound_mode)},
                  {"bound", c.bound},
                  {"min_lglr_record", c.min_lglr_record},
                  {"workers", c.workers},
                  {"record_wall_time", c.record_wall_time}}},
                {"significance", {{"permutations", c.permutations}, {"seed", c.seed}, {"passes", c.passes}}},
                {"selection",
                 {{"max_clusters", optional_json(c.rule.max_clusters)},
                  {"min_lglr", optional_json(c.rule.min_lglr)},
                  {"min_distance", optional_json(c.rule.min_distance)},
                  {"min_p", optional_json(c.rule.min_p)}}},
                {"style", style_json(c.style)},
                {"viewport", {{"width", c.width}, {"height", c.height}}}};
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out) {
    if (!j.contains(key)) return;
    if (j[key].is_null())
        out.reset();
    else
        out = j[key].get<T>();
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        c.locations = p.value("locations", c.locations);
        c.flows = p.value("flows", c.flows);
        c.clusters = p.value("clusters", c.clusters);
        c.null_distribution = p.value("null", c.null_distribution);
        c.basemap = p.value("basemap", c.basemap);
        c.output = p.value("output", c.output);
        c.null_output = p.value("null_output", c.null_output);
    }
    if (j.contains("geometry")) {
        const auto g = j["geometry"].get<std::string>();
        if (g != "planar" && g != "spherical") throw std::invalid_argument("config: geometry must be planar or spherical");
        c.spherical = g == "spherical";
    }
    if (j.contains("synth")) {
        c.noise = j["synth"].value("noise", c.noise);
        c.strata = j["synth"].value("strata", c.strata);
    }
    if (j.contains("scan")) {
        const auto& s = j["scan"];
        if (s.contains("bound_mode")) c.bound_mode = parse_bound_mode(s["bound_mode"].get<std::string>());
        c.bound = s.value("bound", c.bound);
        c.min_lglr_record = s.value("min_lglr_record", c.min_lglr_record);
        c.workers = s.value("workers", c.workers);
        c.record_wall_time = s.value("record_wall_time", c.record_wall_time);
    }
    if (j.contains("significance")) {
        const auto& s = j["significance"];
        c.permutations = s.value("permutations", c.permutations);
        c.seed = s.value("seed", c.seed);
        c.passes = s.value("passes", c.passes);
    }
    if (j.contains("selection")) {
        const auto& s = j["selection"];
        read_optional(s, "max_clusters", c.rule.max_clusters);
        read_optional(s, "min_lglr", c.rule.min_lglr);
        read_optional(s, "min_distance", c.rule.min_distance);
        read_optional(s, "min_p", c.rule.min_p);
    }
    if (j.contains("style")) c.style = style_from_json(j["style"]);
    if (j.contains("viewport")) {
        c.width = j["viewport"].value("width", c.width);
        c.height = j["viewport"].value("height", c.height);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Explorer bundle

inline json basemap_json(const std::vector<Polygon>& basemap) {
    json out = json::array();
    for (const Polygon& p : basemap) {
        json ring = json::array();
        for (const Vec2& v : p.ring) ring.push_back({v.x, v.y});
        out.push_back({{"id", p.id}, {"ring", std::move(ring)}});
    }
    return out;
}

/// Self-contained explorer input: all annotated clusters (unthresholded),
/// the Gumbel fit, the data extent, optional basemap and default style.
inline json bundle_json(const FlowDataset& data, const std::vector<FlowCluster>& clusters,
                        const std::optional<GumbelFit>& fit, const std::vector<Polygon>& basemap,
                        const SymbolStyle& style, const json& metadata = json::object()) {
    const Extent e = extent_of(data);
    json list = json::array();
    for (const FlowCluster& c : clusters) list.push_back(cluster_json(data, c));
    json b{{"format", "xflowmap-bundle"},
           {"version", 1},
           {"geometry", data.locations().mode() == DistanceMode::planar ? "planar" : "spherical"},
           {"extent", {{"min_x", e.min_x}, {"min_y", e.min_y}, {"max_x", e.max_x}, {"max_y", e.max_y}}},
           {"fit", fit ? json{{"mu", fit->mu}, {"beta", fit->beta}} : json(nullptr)},
           {"metadata", metadata},
           {"clusters", std::move(list)}};
    if (!basemap.empty()) b["basemap"] = basemap_json(basemap);
    b["default_style"] = style_json(style);
    return b;
}

// ---------------------------------------------------------------------------
// Files

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError(IngestError::Kind::io, 0, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError(IngestError::Kind::io, 0, "cannot write " + path);
    out << text;
    if (!out) throw IngestError(IngestError::Kind::io, 0, "write failed: " + path);
}

inline void write_json_file(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace xflow::io
