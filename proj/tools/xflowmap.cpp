// xflowmap: synthetic data, scan, significance test, selection, rendering
// and explorer bundles from the command line.
//
// Exit codes: 0 success, 2 input error, 3 infeasible statistical operation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "xflow/io.hpp"
#include "xflow/xflow.hpp"

namespace {

using xflow::io::json;
using xflow::io::RunConfig;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;

struct Options {
    RunConfig run;
    std::string config_path;
    std::string save_config;
    std::string preset;
    std::string bound_mode;
    std::string out_dir = ".";
    std::int64_t max_k = 0;
    std::int64_t max_size = 0;
    double p_threshold = 0.0;
};

bool given(const CLI::App& cmd, const char* name) {
    const CLI::Option* opt = cmd.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

// Values from --config fill every setting not given explicitly as a flag.
void apply_config(Options& o, const CLI::App& cmd) {
    if (o.config_path.empty()) return;
    RunConfig loaded = xflow::io::run_config_from_json(xflow::io::read_json_file(o.config_path));
    auto given = [&](const char* name) { return ::given(cmd, name); };
    RunConfig& r = o.run;
    if (!given("--locations")) r.locations = loaded.locations;
    if (!given("--flows")) r.flows = loaded.flows;
    if (!given("--clusters")) r.clusters = loaded.clusters;
    if (!given("--null")) r.null_distribution = loaded.null_distribution;
    if (!given("--basemap")) r.basemap = loaded.basemap;
    if (!given("--out")) r.output = loaded.output;
    if (!given("--null-out")) r.null_output = loaded.null_output;
    if (!given("--spherical")) r.spherical = loaded.spherical;
    if (!given("--noise") && !given("--preset")) r.noise = loaded.noise;
    if (!given("--strata")) r.strata = loaded.strata;
    if (!given("--bound-mode") && !given("--max-k") && !given("--max-size")) {
        r.bound_mode = loaded.bound_mode;
        r.bound = loaded.bound;
    }
    if (!given("--min-lglr-record")) r.min_lglr_record = loaded.min_lglr_record;
    if (!given("--workers")) r.workers = loaded.workers;
    if (!given("--record-wall-time")) r.record_wall_time = loaded.record_wall_time;
    if (!given("--permutations")) r.permutations = loaded.permutations;
    if (!given("--seed")) r.seed = loaded.seed;
    if (!given("--passes")) r.passes = loaded.passes;
    if (!given("--max-clusters")) r.rule.max_clusters = loaded.rule.max_clusters;
    if (!given("--min-lglr")) r.rule.min_lglr = loaded.rule.min_lglr;
    if (!given("--min-distance")) r.rule.min_distance = loaded.rule.min_distance;
    if (!given("--p-threshold")) r.rule.min_p = loaded.rule.min_p;
    if (!given("--width")) r.width = loaded.width;
    if (!given("--height")) r.height = loaded.height;
    xflow::SymbolStyle& s = r.style;
    const xflow::SymbolStyle& ls = loaded.style;
    if (!given("--classes")) s.n_classes = ls.n_classes;
    if (!given("--hue")) s.hue = ls.hue;
    if (!given("--w-mid-min")) s.w_mid_min = ls.w_mid_min;
    if (!given("--w-mid-max")) s.w_mid_max = ls.w_mid_max;
    if (!given("--curvature")) s.curvature_coeff = ls.curvature_coeff;
    if (!given("--origin-opacity")) s.origin_half_opacity = ls.origin_half_opacity;
    if (!given("--circles")) s.show_circles = ls.show_circles;
    s.origin_width_ratio = ls.origin_width_ratio;
    s.pre_arrow_ratio = ls.pre_arrow_ratio;
    s.min_segment_px = ls.min_segment_px;
    s.margin_px = ls.margin_px;
}

void finalize(Options& o, const CLI::App& cmd) {
    apply_config(o, cmd);
    RunConfig& r = o.run;
    if (given(cmd, "--bound-mode")) r.bound_mode = xflow::io::parse_bound_mode(o.bound_mode);
    if (given(cmd, "--max-k")) {
        r.bound_mode = xflow::BoundMode::by_count;
        r.bound = o.max_k;
    }
    if (given(cmd, "--max-size")) {
        r.bound_mode = xflow::BoundMode::by_volume;
        r.bound = o.max_size;
    }
    if (given(cmd, "--p-threshold")) r.rule.min_p = o.p_threshold;
    if (!o.save_config.empty()) xflow::io::write_json_file(o.save_config, xflow::io::run_config_json(r));
}

void require(const std::string& value, const char* what) {
    if (value.empty()) throw CLI::ValidationError(std::string(what) + " is required (flag or --config)");
}

xflow::FlowDataset load(const RunConfig& r) {
    require(r.locations, "--locations");
    require(r.flows, "--flows");
    return xflow::load_dataset_files(r.locations, r.flows,
                                     r.spherical ? xflow::DistanceMode::spherical : xflow::DistanceMode::planar);
}

std::vector<xflow::Polygon> load_basemap(const RunConfig& r) {
    if (r.basemap.empty()) return {};
    std::ifstream in(r.basemap);
    if (!in) throw xflow::IngestError(xflow::IngestError::Kind::io, 0, "cannot open " + r.basemap);
    return xflow::read_basemap_csv(in);
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        xflow::io::write_text_file(path, text);
}

void add_io(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "Run configuration JSON");
    cmd->add_option("--save-config", o.save_config, "Write the effective run configuration");
}

void add_dataset(CLI::App* cmd, Options& o) {
    cmd->add_option("--locations", o.run.locations, "Locations CSV (id,x,y[,population])");
    cmd->add_option("--flows", o.run.flows, "Flows CSV (origin,dest,volume)");
    cmd->add_flag("--spherical", o.run.spherical, "Coordinates are lon/lat degrees; distances in meters");
}

void add_scan(CLI::App* cmd, Options& o) {
    cmd->add_option("--bound-mode", o.bound_mode, "by_count or by_volume");
    cmd->add_option("--max-k", o.max_k, "Neighborhood location bound (selects by_count)")->check(CLI::PositiveNumber);
    cmd->add_option("--max-size", o.max_size, "Neighborhood volume bound (selects by_volume)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--min-lglr-record", o.run.min_lglr_record, "Discard per-focal results at or below this LGLR");
    cmd->add_option("--workers", o.run.workers, "Worker threads (0 = all cores)");
    cmd->add_flag("--record-wall-time", o.run.record_wall_time, "Store wall time in the metadata");
}

void add_rule(CLI::App* cmd, Options& o) {
    cmd->add_option("--max-clusters", o.run.rule.max_clusters, "Keep at most this many clusters");
    cmd->add_option("--min-lglr", o.run.rule.min_lglr, "Drop clusters below this LGLR");
    cmd->add_option("--min-distance", o.run.rule.min_distance, "Drop clusters shorter than this distance");
    cmd->add_option("--p-threshold", o.p_threshold, "Keep clusters with Gumbel p-value below this");
}

void add_style(CLI::App* cmd, Options& o) {
    auto& s = o.run.style;
    cmd->add_option("--classes", s.n_classes, "Color classes (1-9)");
    cmd->add_option("--hue", s.hue, "Base hue in degrees");
    cmd->add_option("--w-mid-min", s.w_mid_min, "Smallest mid width (px)");
    cmd->add_option("--w-mid-max", s.w_mid_max, "Largest mid width (px)");
    cmd->add_option("--curvature", s.curvature_coeff, "Bend offset as a fraction of the chord");
    cmd->add_option("--origin-opacity", s.origin_half_opacity, "Opacity of the origin half (0-1)");
    cmd->add_flag("--circles", s.show_circles, "Draw neighborhood circles");
    cmd->add_option("--width", o.run.width, "SVG width (px)");
    cmd->add_option("--height", o.run.height, "SVG height (px)");
    cmd->add_option("--basemap", o.run.basemap, "Basemap polygons CSV (id,x,y)");
}

int cmd_synth(Options& o) {
    auto& r = o.run;
    if (!o.preset.empty()) {
        if (o.preset == "dataset1") r.noise = 5400;
        else if (o.preset == "dataset2") r.noise = 6600;
        else if (o.preset == "dataset3") r.noise = 7800;
        else if (o.preset == "dataset4") r.noise = 9000;
        else throw CLI::ValidationError("--preset must be dataset1..dataset4");
    }
    auto spec = xflow::synth::default_spec(r.noise, r.seed);
    if (r.strata == "equal-width")
        spec.noise_strata = xflow::synth::equal_width_strata(4, 0.0, 1.0);
    else if (r.strata != "equal-probability")
        throw CLI::ValidationError("--strata must be equal-probability or equal-width");
    const auto data = xflow::synth::generate(spec);

    namespace fs = std::filesystem;
    fs::create_directories(o.out_dir);
    std::ostringstream locs, flows, labels;
    xflow::io::write_locations_csv(locs, data.dataset);
    xflow::io::write_flows_csv(flows, data.dataset);
    xflow::io::write_labels_csv(labels, data.labels);
    xflow::io::write_text_file((fs::path(o.out_dir) / "locations.csv").string(), locs.str());
    xflow::io::write_text_file((fs::path(o.out_dir) / "flows.csv").string(), flows.str());
    xflow::io::write_text_file((fs::path(o.out_dir) / "labels.csv").string(), labels.str());

    std::int64_t planted = 0;
    for (const auto& c : spec.planted) planted += c.count;
    std::cerr << "synth: " << data.dataset.flow_count() << " flows (" << planted << " planted, " << r.noise
              << " noise), " << data.dataset.location_count() << " locations\n";
    std::cerr << "synth: noise per stratum";
    for (auto c : data.stratum_counts) std::cerr << ' ' << c;
    std::cerr << (data.padded_last_stratum ? " (last stratum padded)\n" : "\n");
    return kExitOk;
}

int cmd_scan(Options& o) {
    const auto data = load(o.run);
    const auto config = o.run.scan_config();
    const auto result = xflow::scan_all(data, config);
    std::cerr << "scan: " << result.clusters.size() << " clusters from " << result.stats.focal_flows
              << " focal flows, " << result.stats.candidates_evaluated << " candidates, "
              << result.stats.wall_seconds << " s\n";
    emit(o.run.output, xflow::io::clusters_document(data, result.clusters,
                                                    xflow::io::scan_metadata(result, o.run.record_wall_time))
                               .dump(2) +
                           "\n");
    return kExitOk;
}

int cmd_test(Options& o) {
    const auto data = load(o.run);
    const auto config = o.run.scan_config();
    xflow::io::ClusterFile clusters;
    if (!o.run.clusters.empty()) {
        clusters = xflow::io::clusters_from_document(data, xflow::io::read_json_file(o.run.clusters));
    } else {
        const auto result = xflow::scan_all(data, config);
        clusters.clusters = result.clusters;
        clusters.metadata = xflow::io::scan_metadata(result, o.run.record_wall_time);
    }
    if (o.run.permutations < 1) throw CLI::ValidationError("--permutations must be at least 1");
    xflow::PermuteOptions popt;
    popt.passes = o.run.passes;
    const auto null = xflow::monte_carlo(data, config, o.run.permutations, o.run.seed, popt);
    std::optional<xflow::GumbelFit> fit;
    if (null.size() >= 10) {
        try {
            fit = xflow::fit_gumbel(null.maxima);
        } catch (const std::invalid_argument& e) {
            throw xflow::InfeasibleError(std::string("Gumbel fit: ") + e.what());
        }
    }
    for (auto& c : clusters.clusters) {
        c.p_value_rank = xflow::p_value_rank(c.lglr, null);
        if (fit) c.p_value = xflow::p_value_gumbel(c.lglr, *fit);
    }
    json meta = clusters.metadata;
    meta["permutations"] = null.size();
    meta["seed"] = null.seed;
    if (fit) {
        meta["fit"] = {{"mu", fit->mu}, {"beta", fit->beta}};
        meta["threshold_p01"] = xflow::threshold(*fit, 0.01);
        std::cerr << "test: mu " << fit->mu << ", beta " << fit->beta << ", LGLR threshold at p=0.01 "
                  << xflow::threshold(*fit, 0.01) << "\n";
    } else {
        std::cerr << "test: fewer than 10 permutations, Gumbel fit skipped (rank p-values only)\n";
    }
    emit(o.run.output, xflow::io::clusters_document(data, clusters.clusters, meta).dump(2) + "\n");
    if (!o.run.null_output.empty()) {
        json nj = fit ? xflow::io::null_json(null, *fit)
                      : json{{"L", null.size()}, {"seed", null.seed}, {"maxima", null.maxima}, {"fit", nullptr},
                             {"passes", null.passes}, {"skipped_swaps_total", null.skipped_swaps_total}};
        xflow::io::write_json_file(o.run.null_output, nj);
    }
    std::cerr << "test: " << null.skipped_swaps_total << " swaps skipped to avoid self-flows\n";
    return kExitOk;
}

std::pair<xflow::FlowDataset, xflow::io::ClusterFile> load_clusters(const RunConfig& r) {
    auto data = load(r);
    require(r.clusters, "--clusters");
    auto file = xflow::io::clusters_from_document(data, xflow::io::read_json_file(r.clusters));
    return {std::move(data), std::move(file)};
}

int cmd_select(Options& o) {
    auto [data, file] = load_clusters(o.run);
    const auto selected = xflow::select(data, file.clusters, o.run.rule);
    std::cerr << "select: " << selected.size() << " of " << file.clusters.size() << " clusters\n";
    emit(o.run.output, xflow::io::clusters_document(data, selected, file.metadata, true).dump(2) + "\n");
    return kExitOk;
}

int cmd_render(Options& o) {
    auto [data, file] = load_clusters(o.run);
    const auto selected = xflow::select(data, file.clusters, o.run.rule);
    const auto svg = xflow::render_svg(data, selected, load_basemap(o.run), o.run.style,
                                       xflow::Viewport{o.run.width, o.run.height});
    std::cerr << "render: " << selected.size() << " glyphs\n";
    emit(o.run.output, svg);
    return kExitOk;
}

int cmd_bundle(Options& o) {
    auto [data, file] = load_clusters(o.run);
    std::optional<xflow::GumbelFit> fit;
    if (!o.run.null_distribution.empty())
        fit = xflow::io::null_from_json(xflow::io::read_json_file(o.run.null_distribution)).second;
    else if (file.metadata.contains("fit"))
        fit = xflow::GumbelFit{file.metadata["fit"]["mu"].get<double>(), file.metadata["fit"]["beta"].get<double>()};
    const auto bundle = xflow::io::bundle_json(data, file.clusters, fit, load_basemap(o.run), o.run.style, file.metadata);
    emit(o.run.output, bundle.dump(2) + "\n");
    std::cerr << "bundle: " << file.clusters.size() << " clusters\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-scale OD flow cluster detection and flow mapping"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
    add_io(synth, o);
    synth->add_option("--preset", o.preset, "dataset1 (5400 noise) .. dataset4 (9000 noise)");
    synth->add_option("--noise", o.run.noise, "Number of random noise flows")->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", o.run.seed, "Random seed");
    synth->add_option("--strata", o.run.strata, "equal-probability (default) or equal-width");
    synth->add_option("--out-dir", o.out_dir, "Directory for locations.csv, flows.csv, labels.csv");

    auto* scan = app.add_subcommand("scan", "Scan all focal flows for the strongest cluster");
    add_io(scan, o);
    add_dataset(scan, o);
    add_scan(scan, o);
    scan->add_option("--out", o.run.output, "Cluster JSON (default stdout)");

    auto* test = app.add_subcommand("test", "Monte Carlo significance and Gumbel p-values");
    add_io(test, o);
    add_dataset(test, o);
    add_scan(test, o);
    test->add_option("--clusters", o.run.clusters, "Cluster JSON to annotate (scans when omitted)");
    test->add_option("--permutations", o.run.permutations, "Number of permutations L");
    test->add_option("--seed", o.run.seed, "Random seed");
    test->add_option("--passes", o.run.passes, "Shuffle passes per permutation");
    test->add_option("--out", o.run.output, "Annotated cluster JSON (default stdout)");
    test->add_option("--null-out", o.run.null_output, "Null distribution JSON");

    auto* sel = app.add_subcommand("select", "Greedy non-overlapping selection");
    add_io(sel, o);
    add_dataset(sel, o);
    add_rule(sel, o);
    sel->add_option("--clusters", o.run.clusters, "Cluster JSON");
    sel->add_option("--out", o.run.output, "Selected cluster JSON (default stdout)");

    auto* render = app.add_subcommand("render", "Select and render an SVG flow map");
    add_io(render, o);
    add_dataset(render, o);
    add_rule(render, o);
    add_style(render, o);
    render->add_option("--clusters", o.run.clusters, "Cluster JSON");
    render->add_option("--out", o.run.output, "SVG file (default stdout)");

    auto* bundle = app.add_subcommand("bundle", "Write the explorer bundle");
    add_io(bundle, o);
    add_dataset(bundle, o);
    add_style(bundle, o);
    bundle->add_option("--clusters", o.run.clusters, "Annotated cluster JSON");
    bundle->add_option("--null", o.run.null_distribution, "Null distribution JSON (for the fit)");
    bundle->add_option("--out", o.run.output, "Bundle JSON (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        finalize(o, *cmd);
        if (cmd == synth) return cmd_synth(o);
        if (cmd == scan) return cmd_scan(o);
        if (cmd == test) return cmd_test(o);
        if (cmd == sel) return cmd_select(o);
        if (cmd == render) return cmd_render(o);
        return cmd_bundle(o);
    } catch (const xflow::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const xflow::IngestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
