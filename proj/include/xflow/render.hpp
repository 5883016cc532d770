#pragma once

// Cross-scale flow symbols and static SVG output.
//
// Each selected cluster becomes a tapered cubic Bezier from the projected
// origin center to an arrowhead whose apex sits on the projected destination
// center. The curved wide segment near the origin grows with the origin
// radius, the arrow length with the destination radius, and width and color
// with the strength class. Curves bend clockwise relative to the flow
// direction, so reciprocal flows separate.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xflow/dataset.hpp"
#include "xflow/scan.hpp"

namespace xflow {

/// Quantile class breaks, linear interpolation between order statistics at
/// position q (N - 1) (the inclusive convention). Duplicate breaks collapse.
/// A value v falls in class = number of breaks strictly below v.
inline std::vector<double> classify_strength(std::vector<double> values, std::size_t n_classes) {
    if (values.empty()) throw std::invalid_argument("classify_strength: no values");
    if (n_classes < 1) throw std::invalid_argument("classify_strength: n_classes must be at least 1");
    std::sort(values.begin(), values.end());
    std::vector<double> breaks;
    const double last = static_cast<double>(values.size() - 1);
    for (std::size_t i = 1; i < n_classes; ++i) {
        const double h = last * static_cast<double>(i) / static_cast<double>(n_classes);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double b = values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
        if (breaks.empty() || b > breaks.back()) breaks.push_back(b);
    }
    return breaks;
}

inline std::size_t strength_class(double value, const std::vector<double>& breaks) {
    return static_cast<std::size_t>(std::lower_bound(breaks.begin(), breaks.end(), value) - breaks.begin());
}

struct SymbolStyle {
    std::size_t n_classes = 5;
    double hue = 210.0;  // degrees
    double w_mid_min = 1.5;
    double w_mid_max = 7.0;
    double curvature_coeff = 0.2;
    double origin_half_opacity = 1.0;
    bool show_circles = false;
    double origin_width_ratio = 1.6;
    double pre_arrow_ratio = 0.6;
    double min_segment_px = 4.0;
    double margin_px = 20.0;

    void validate() const {
        if (!(n_classes >= 1 && n_classes <= 9)) throw std::invalid_argument("style: n_classes must be in [1, 9]");
        if (!(w_mid_min > 0.0 && w_mid_min < w_mid_max))
            throw std::invalid_argument("style: need 0 < w_mid_min < w_mid_max");
        if (!(origin_half_opacity >= 0.0 && origin_half_opacity <= 1.0))
            throw std::invalid_argument("style: origin_half_opacity must be in [0, 1]");
        if (!(curvature_coeff >= 0.0)) throw std::invalid_argument("style: curvature_coeff must be non-negative");
        if (!(origin_width_ratio > 1.0) || !(pre_arrow_ratio > 0.0 && pre_arrow_ratio < 1.0))
            throw std::invalid_argument("style: taper ratios must give origin > mid > pre-arrow width");
    }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const { return std::hypot(x, y); }
};

struct Extent {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    void include(double x, double y) {
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
    }
};

inline Extent extent_of(const FlowDataset& data) {
    const auto& l0 = data.location(0);
    Extent e{l0.x, l0.y, l0.x, l0.y};
    for (const Location& l : data.locations().all()) e.include(l.x, l.y);
    return e;
}

/// Uniform scale from map coordinates to pixels, y axis pointing down.
struct MapTransform {
    double scale = 1.0;
    double offset_x = 0.0;
    double offset_y = 0.0;
    double height = 0.0;

    static MapTransform fit(const Extent& e, double width, double height, double margin) {
        const double w = std::max(e.max_x - e.min_x, 1e-300);
        const double h = std::max(e.max_y - e.min_y, 1e-300);
        MapTransform t;
        t.scale = std::min((width - 2 * margin) / w, (height - 2 * margin) / h);
        if (!(t.scale > 0.0) || !std::isfinite(t.scale)) t.scale = 1.0;
        t.offset_x = margin + 0.5 * ((width - 2 * margin) - w * t.scale) - e.min_x * t.scale;
        t.offset_y = margin + 0.5 * ((height - 2 * margin) - h * t.scale) - e.min_y * t.scale;
        t.height = height;
        return t;
    }

    Vec2 operator()(double x, double y) const { return {offset_x + x * scale, height - (offset_y + y * scale)}; }
    double length(double d) const { return d * scale; }
};

struct FlowGlyph {
    std::array<Vec2, 4> path;  // cubic Bezier P0..P3
    double origin_width = 0.0;
    double mid_width = 0.0;
    double pre_arrow_width = 0.0;
    double arrow_length = 0.0;
    double arrow_width = 0.0;
    std::size_t color_class = 0;
    double origin_segment_length = 0.0;
    Vec2 apex;  // projected destination center
    Vec2 origin_center;
    double origin_radius = 0.0;
    Vec2 dest_center;
    double dest_radius = 0.0;
    double lglr = 0.0;
};

inline Vec2 bezier(const std::array<Vec2, 4>& p, double t) {
    const double u = 1.0 - t;
    return p[0] * (u * u * u) + p[1] * (3 * u * u * t) + p[2] * (3 * u * t * t) + p[3] * (t * t * t);
}

inline Vec2 bezier_tangent(const std::array<Vec2, 4>& p, double t) {
    const double u = 1.0 - t;
    return (p[1] - p[0]) * (3 * u * u) + (p[2] - p[1]) * (6 * u * t) + (p[3] - p[2]) * (3 * t * t);
}

inline FlowGlyph layout_glyph(const FlowDataset& data, const FlowCluster& cluster, const MapTransform& projection,
                              const SymbolStyle& style, const std::vector<double>& breaks) {
    const auto& lo = data.location(cluster.origin.center);
    const auto& ld = data.location(cluster.dest.center);
    FlowGlyph g;
    g.lglr = cluster.lglr;
    g.origin_center = projection(lo.x, lo.y);
    g.dest_center = projection(ld.x, ld.y);
    g.origin_radius = projection.length(cluster.origin.radius);
    g.dest_radius = projection.length(cluster.dest.radius);
    g.apex = g.dest_center;

    const Vec2 o = g.origin_center;
    const Vec2 d = g.dest_center;
    const double chord = (d - o).norm();
    if (!(chord > 0.0)) throw std::invalid_argument("layout_glyph: origin and destination centers coincide");
    const double lo_clamp = style.min_segment_px;
    const double hi_clamp = std::max(lo_clamp, 0.5 * chord);
    g.origin_segment_length = std::clamp(g.origin_radius, lo_clamp, hi_clamp);
    g.arrow_length = std::clamp(g.dest_radius, lo_clamp, hi_clamp);

    const Vec2 u = (d - o) * (1.0 / chord);
    const Vec2 right{-u.y, u.x};  // clockwise side in screen coordinates
    const Vec2 bend = (o + d) * 0.5 + right * (style.curvature_coeff * chord);
    const Vec2 toward_bend = (bend - o) * (1.0 / (bend - o).norm());
    const Vec2 incoming = (d - bend) * (1.0 / (d - bend).norm());

    g.path[0] = o;
    g.path[3] = d - incoming * g.arrow_length;
    g.path[1] = o + toward_bend * std::max(g.origin_segment_length, 0.15 * chord);
    g.path[2] = bend + (g.path[3] - bend) * 0.5;

    g.color_class = std::min(strength_class(cluster.lglr, breaks), style.n_classes - 1);
    const double frac =
        style.n_classes > 1 ? static_cast<double>(g.color_class) / static_cast<double>(style.n_classes - 1) : 1.0;
    g.mid_width = style.w_mid_min + frac * (style.w_mid_max - style.w_mid_min);
    g.origin_width = g.mid_width * style.origin_width_ratio;
    g.pre_arrow_width = g.mid_width * style.pre_arrow_ratio;
    g.arrow_width = 2.0 * g.mid_width;
    return g;
}

/// Sequential single-hue ramp, light for weak classes and dark for strong.
inline std::string class_color(std::size_t cls, const SymbolStyle& style) {
    const double frac =
        style.n_classes > 1 ? static_cast<double>(cls) / static_cast<double>(style.n_classes - 1) : 1.0;
    const double l = 0.78 - 0.48 * frac;
    const double s = 0.75;
    const double c = (1.0 - std::abs(2.0 * l - 1.0)) * s;
    const double hp = std::fmod(std::fmod(style.hue, 360.0) + 360.0, 360.0) / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, gr = 0, b = 0;
    switch (static_cast<int>(hp)) {
        case 0: r = c, gr = x; break;
        case 1: r = x, gr = c; break;
        case 2: gr = c, b = x; break;
        case 3: gr = x, b = c; break;
        case 4: r = x, b = c; break;
        default: r = c, b = x; break;
    }
    const double m = l - c / 2.0;
    auto hex = [](double v) {
        const int i = std::clamp(static_cast<int>(std::lround(v * 255.0)), 0, 255);
        const char* digits = "0123456789abcdef";
        return std::string{digits[i >> 4], digits[i & 15]};
    };
    return "#" + hex(r + m) + hex(gr + m) + hex(b + m);
}

struct Polygon {
    std::string id;
    std::vector<Vec2> ring;  // map coordinates
};

/// Basemap file: header `id,x,y`; consecutive rows sharing an id form one ring.
inline std::vector<Polygon> read_basemap_csv(std::istream& in) {
    std::vector<std::string> header;
    const auto rows = csv::read_rows(in, header);
    if (header != std::vector<std::string>{"id", "x", "y"})
        throw IngestError(IngestError::Kind::malformed_header, 0, "basemap header must be id,x,y");
    std::vector<Polygon> polygons;
    for (const auto& [line, f] : rows) {
        if (f.size() != 3)
            throw IngestError(IngestError::Kind::malformed_row, line,
                              "basemap row " + std::to_string(line) + ": expected 3 fields");
        const auto x = csv::to_double(f[1]);
        const auto y = csv::to_double(f[2]);
        if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y))
            throw IngestError(IngestError::Kind::invalid_coordinate, line,
                              "basemap row " + std::to_string(line) + ": invalid coordinate");
        if (polygons.empty() || polygons.back().id != f[0]) polygons.push_back(Polygon{f[0], {}});
        polygons.back().ring.push_back({*x, *y});
    }
    return polygons;
}

namespace svg {

inline std::string num(double v) {
    if (std::abs(v) < 0.005) v = 0.0;
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    return std::string(buf, res.ptr);
}

inline std::string point(Vec2 p) { return num(p.x) + "," + num(p.y); }

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace svg

inline constexpr int kOutlineSegments = 32;

/// Width along the curve: origin width at t = 0, mid width at 0.5, pre-arrow
/// width at 1, linear in between.
inline double width_at(const FlowGlyph& g, double t) {
    if (t <= 0.5) return g.origin_width + (g.mid_width - g.origin_width) * (t / 0.5);
    return g.mid_width + (g.pre_arrow_width - g.mid_width) * ((t - 0.5) / 0.5);
}

/// Closed outline of the glyph; when `half` is 0 only the origin half of the
/// body, when 1 the destination half plus the arrowhead, when 2 everything.
inline std::vector<Vec2> glyph_outline(const FlowGlyph& g, int half = 2) {
    const int from = half == 1 ? kOutlineSegments / 2 : 0;
    const int to = half == 0 ? kOutlineSegments / 2 : kOutlineSegments;
    std::vector<Vec2> left;
    std::vector<Vec2> right;
    for (int i = from; i <= to; ++i) {
        const double t = static_cast<double>(i) / kOutlineSegments;
        const Vec2 p = bezier(g.path, t);
        Vec2 tan = bezier_tangent(g.path, t);
        const double n = tan.norm();
        tan = n > 0 ? tan * (1.0 / n) : Vec2{1, 0};
        const Vec2 normal{-tan.y, tan.x};
        const double w = 0.5 * width_at(g, t);
        left.push_back(p + normal * w);
        right.push_back(p - normal * w);
    }
    std::vector<Vec2> out = left;
    if (half != 0) {
        Vec2 tan = g.apex - g.path[3];
        const double n = tan.norm();
        tan = n > 0 ? tan * (1.0 / n) : Vec2{1, 0};
        const Vec2 normal{-tan.y, tan.x};
        out.push_back(g.path[3] + normal * (0.5 * g.arrow_width));
        out.push_back(g.apex);
        out.push_back(g.path[3] - normal * (0.5 * g.arrow_width));
    }
    out.insert(out.end(), right.rbegin(), right.rend());
    return out;
}

struct Viewport {
    double width = 1000.0;
    double height = 800.0;
};

inline std::string polygon_path(const std::vector<Vec2>& pts) {
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) d += (i == 0 ? "M" : " L") + svg::point(pts[i]);
    return d + " Z";
}

/// SVG 1.1 document. Glyphs are drawn in ascending lglr order so strong
/// clusters end up on top; each glyph is one <g> element.
inline std::string render_svg(const FlowDataset& data, const std::vector<FlowCluster>& clusters,
                              const std::vector<Polygon>& basemap, const SymbolStyle& style, const Viewport& viewport) {
    style.validate();
    if (!(viewport.width > 0.0 && viewport.height > 0.0)) throw std::invalid_argument("render: empty viewport");
    Extent e = extent_of(data);
    for (const Polygon& p : basemap)
        for (const Vec2& v : p.ring) e.include(v.x, v.y);
    const auto projection = MapTransform::fit(e, viewport.width, viewport.height, style.margin_px);

    std::vector<FlowGlyph> glyphs;
    if (!clusters.empty()) {
        std::vector<double> values;
        for (const FlowCluster& c : clusters) values.push_back(c.lglr);
        const auto breaks = classify_strength(values, style.n_classes);
        for (const FlowCluster& c : clusters) glyphs.push_back(layout_glyph(data, c, projection, style, breaks));
    }
    std::stable_sort(glyphs.begin(), glyphs.end(), [](const FlowGlyph& a, const FlowGlyph& b) { return a.lglr < b.lglr; });

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + svg::num(viewport.width) +
           "\" height=\"" + svg::num(viewport.height) + "\" viewBox=\"0 0 " + svg::num(viewport.width) + " " +
           svg::num(viewport.height) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + svg::num(viewport.width) + "\" height=\"" + svg::num(viewport.height) +
           "\" fill=\"#ffffff\"/>\n";
    for (const Polygon& p : basemap) {
        if (p.ring.size() < 3) continue;
        std::vector<Vec2> px;
        for (const Vec2& v : p.ring) px.push_back(projection(v.x, v.y));
        out += "<path class=\"basemap\" id=\"base-" + svg::escape(p.id) + "\" d=\"" + polygon_path(px) +
               "\" fill=\"#f0f0ec\" stroke=\"#b4b4ad\" stroke-width=\"0.75\"/>\n";
    }
    for (const FlowGlyph& g : glyphs) {
        const std::string color = class_color(g.color_class, style);
        out += "<g class=\"glyph\" data-lglr=\"" + svg::num(g.lglr) + "\" data-class=\"" +
               std::to_string(g.color_class) + "\">\n";
        if (style.show_circles) {
            out += "<circle cx=\"" + svg::num(g.origin_center.x) + "\" cy=\"" + svg::num(g.origin_center.y) +
                   "\" r=\"" + svg::num(g.origin_radius) + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-dasharray=\"3,2\"/>\n";
            out += "<circle cx=\"" + svg::num(g.dest_center.x) + "\" cy=\"" + svg::num(g.dest_center.y) + "\" r=\"" +
                   svg::num(g.dest_radius) + "\" fill=\"none\" stroke=\"" + color + "\"/>\n";
        }
        if (style.origin_half_opacity < 1.0) {
            out += "<path d=\"" + polygon_path(glyph_outline(g, 0)) + "\" fill=\"" + color + "\" fill-opacity=\"" +
                   svg::num(style.origin_half_opacity) + "\"/>\n";
            out += "<path d=\"" + polygon_path(glyph_outline(g, 1)) + "\" fill=\"" + color + "\"/>\n";
        } else {
            out += "<path d=\"" + polygon_path(glyph_outline(g, 2)) + "\" fill=\"" + color + "\"/>\n";
        }
        out += "</g>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace xflow
