#pragma once

// Static SVG charts: combined per-dimension analysis, evaluation curve and a
// confusion heatmap. Output is deterministic (no timestamp).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ldsp/edi.hpp"
#include "ldsp/evaluation.hpp"
#include "ldsp/io/files.hpp"

namespace ldsp::io {

namespace svg {

inline std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string open(double width, double height) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           num(width) + "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " + num(height) +
           "\" font-family=\"sans-serif\" font-size=\"11\">\n";
}

inline std::string text(double x, double y, std::string_view s, std::string_view anchor = "start",
                        std::string_view cls = "") {
    std::string out = "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + std::string(anchor) + "\"";
    if (!cls.empty()) out += " class=\"" + std::string(cls) + "\"";
    return out + ">" + escape(s) + "</text>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, std::string_view stroke, std::string_view cls,
                        bool dashed = false) {
    std::string out = "<line class=\"" + std::string(cls) + "\" x1=\"" + num(x1) + "\" y1=\"" + num(y1) +
                      "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) + "\" stroke=\"" + std::string(stroke) +
                      "\" stroke-width=\"1.5\"";
    if (dashed) out += " stroke-dasharray=\"6 4\"";
    return out + "/>\n";
}

/// Indices of the n largest scores, ties by ascending index.
inline std::vector<std::size_t> top_indices(std::span<const double> score, std::size_t n) {
    std::vector<std::size_t> idx(score.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    idx.resize(std::min(n, idx.size()));
    return idx;
}

}  // namespace svg

/// Top-n dimensions by each single signal. Wilcoxon ranks by smallest
/// p-value, MI by largest value.
struct SignalSelections {
    std::vector<std::size_t> wilcoxon_top;
    std::vector<std::size_t> mi_top;
    double mi_threshold = 0.0;  // MI of the n-th ranked dimension
};

inline SignalSelections signal_selections(const edi::PropertyReport& report, std::size_t top_n) {
    const std::size_t d = report.dim();
    std::vector<double> neg_p(d, 0.0), mi(d, 0.0);
    for (const auto& a : report.dims) {
        neg_p[a.dimension] = -a.p_value;
        mi[a.dimension] = a.mi;
    }
    SignalSelections s;
    s.wilcoxon_top = svg::top_indices(neg_p, top_n);
    s.mi_top = svg::top_indices(mi, top_n);
    if (!s.mi_top.empty()) s.mi_threshold = mi[s.mi_top.back()];
    return s;
}

/// MI bars per dimension with a dashed rule at the top_n-th MI, Wilcoxon top_n
/// bars highlighted, a triangle under each RFE-selected dimension and a
/// circle over dimensions picked by all three.
inline std::string render_combined_svg(const edi::PropertyReport& report, std::span<const std::size_t> rfe_selected,
                                       std::size_t top_n = 25) {
    const std::size_t d = report.dim();
    std::vector<double> mi(d, 0.0);
    for (const auto& a : report.dims) mi[a.dimension] = a.mi;
    const SignalSelections sel = signal_selections(report, top_n);
    const std::set<std::size_t> wil(sel.wilcoxon_top.begin(), sel.wilcoxon_top.end());
    const std::set<std::size_t> mis(sel.mi_top.begin(), sel.mi_top.end());
    const std::set<std::size_t> rfe(rfe_selected.begin(), rfe_selected.end());

    const double bar_w = std::max(2.0, 900.0 / static_cast<double>(std::max<std::size_t>(d, 1)));
    const double left = 60, top = 40, plot_h = 260, right = 20;
    const double plot_w = bar_w * static_cast<double>(d);
    const double width = left + plot_w + right;
    const double height = top + plot_h + 80;
    const double base = top + plot_h;
    double mi_max = 0.0;
    for (double v : mi) mi_max = std::max(mi_max, v);
    const double scale = mi_max > 0.0 ? plot_h / mi_max : 0.0;

    std::string out = svg::open(width, height);
    out += svg::text(left, 20, report.property + " (" + report.model_tag + "): MI per dimension, top " +
                                   std::to_string(top_n) + " Wilcoxon highlighted, RFE marked");
    out += svg::line(left, base, left + plot_w, base, "#333", "axis");
    out += svg::line(left, top, left, base, "#333", "axis");
    out += svg::text(left - 6, top + 4, svg::num(mi_max), "end");
    out += svg::text(left - 6, base + 4, "0", "end");

    out += "<g class=\"mi-bars\">\n";
    for (std::size_t j = 0; j < d; ++j) {
        const double h = mi[j] * scale;
        const bool hi = wil.count(j) != 0;
        out += "<rect class=\"" + std::string(hi ? "mi-bar wilcoxon-top" : "mi-bar") + "\" data-dim=\"" +
               std::to_string(j) + "\" x=\"" + svg::num(left + bar_w * static_cast<double>(j)) + "\" y=\"" +
               svg::num(base - h) + "\" width=\"" + svg::num(bar_w * 0.9) + "\" height=\"" + svg::num(h) +
               "\" fill=\"" + (hi ? "#d62728" : "#9ecae1") + "\"/>\n";
    }
    out += "</g>\n";

    const double thr_y = base - sel.mi_threshold * scale;
    out += svg::line(left, thr_y, left + plot_w, thr_y, "#555", "mi-threshold", true);

    out += "<g class=\"rfe-markers\">\n";
    for (std::size_t j : rfe) {
        const double cx = left + bar_w * (static_cast<double>(j) + 0.45);
        out += "<polygon class=\"rfe-marker\" data-dim=\"" + std::to_string(j) + "\" points=\"" + svg::num(cx) + "," +
               svg::num(base + 6) + " " + svg::num(cx - 4) + "," + svg::num(base + 14) + " " + svg::num(cx + 4) + "," +
               svg::num(base + 14) + "\" fill=\"#2ca02c\"/>\n";
    }
    out += "</g>\n";

    out += "<g class=\"agreement\">\n";
    for (std::size_t j : wil) {
        if (!mis.count(j) || !rfe.count(j)) continue;
        const double cx = left + bar_w * (static_cast<double>(j) + 0.45);
        out += "<circle class=\"agreement-marker\" data-dim=\"" + std::to_string(j) + "\" cx=\"" + svg::num(cx) +
               "\" cy=\"" + svg::num(base - mi[j] * scale - 8) +
               "\" r=\"5\" fill=\"none\" stroke=\"#000\" stroke-width=\"1.5\"/>\n";
    }
    out += "</g>\n";

    const double ly = base + 40;
    out += "<rect x=\"" + svg::num(left) + "\" y=\"" + svg::num(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"#d62728\"/>\n";
    out += svg::text(left + 14, ly, "Wilcoxon top " + std::to_string(top_n));
    out += "<rect x=\"" + svg::num(left + 150) + "\" y=\"" + svg::num(ly - 9) +
           "\" width=\"10\" height=\"10\" fill=\"#9ecae1\"/>\n";
    out += svg::text(left + 164, ly, "MI");
    out += svg::text(left + 210, ly, "dashed: MI of rank " + std::to_string(top_n));
    out += svg::text(left + 400, ly, "triangle: RFE selected, circle: all three agree");
    out += svg::text(left + plot_w / 2, height - 10, "dimension", "middle");
    out += "</svg>\n";
    return out;
}

/// Test accuracy against k over 1..k_at_95 with baseline and low-EDI rules and
/// the best cross-property accuracy marked at the right edge.
inline std::string render_evaluation_svg(const eval::EvaluationReport& report) {
    const double left = 60, top = 40, plot_w = 600, plot_h = 300, right = 180;
    const double width = left + plot_w + right, height = top + plot_h + 60;
    const double base = top + plot_h;
    const std::size_t k_last = std::max<std::size_t>(report.k_at_95, 1);
    const auto xk = [&](double k) {
        return k_last == 1 ? left + plot_w / 2 : left + (k - 1.0) / static_cast<double>(k_last - 1) * plot_w;
    };
    const auto ya = [&](double a) { return base - std::clamp(a, 0.0, 1.0) * plot_h; };

    std::string out = svg::open(width, height);
    out += svg::text(left, 20, report.property + " (" + report.model_tag + "): accuracy vs number of top-EDI dims");
    out += svg::line(left, base, left + plot_w, base, "#333", "axis");
    out += svg::line(left, top, left, base, "#333", "axis");
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) out += svg::text(left - 6, ya(a) + 4, svg::num(a), "end");
    out += "<g class=\"x-axis\" data-min=\"1\" data-max=\"" + std::to_string(k_last) + "\">\n";
    out += svg::text(xk(1), base + 16, "1", "middle", "x-tick");
    if (k_last > 1) out += svg::text(xk(static_cast<double>(k_last)), base + 16, std::to_string(k_last), "middle", "x-tick");
    out += "</g>\n";
    out += svg::text(left + plot_w / 2, base + 36, "k (top-EDI dimensions)", "middle");

    out += svg::line(left, ya(report.baseline_accuracy), left + plot_w, ya(report.baseline_accuracy), "#ff7f0e",
                     "baseline", true);
    out += svg::text(left + plot_w + 6, ya(report.baseline_accuracy) + 4,
                     "baseline " + svg::num(report.baseline_accuracy));
    out += svg::line(left, ya(report.low_edi_accuracy), left + plot_w, ya(report.low_edi_accuracy), "#7f7f7f",
                     "low-edi", true);
    out += svg::text(left + plot_w + 6, ya(report.low_edi_accuracy) + 4,
                     "low-EDI " + std::to_string(report.bottom_k) + ": " + svg::num(report.low_edi_accuracy));

    if (!report.high_edi_curve.empty()) {
        out += "<polyline class=\"accuracy-curve\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& p : report.high_edi_curve) {
            if (!first) out += ' ';
            first = false;
            out += svg::num(xk(static_cast<double>(p.k))) + "," + svg::num(ya(p.accuracy));
        }
        out += "\"/>\n";
    }

    if (!report.cross_property.empty()) {
        auto best = report.cross_property.begin();
        for (auto it = report.cross_property.begin(); it != report.cross_property.end(); ++it)
            if (it->second > best->second) best = it;
        const double cx = left + plot_w, cy = ya(best->second);
        out += "<polygon class=\"cross-best\" points=\"" + svg::num(cx) + "," + svg::num(cy - 6) + " " +
               svg::num(cx + 6) + "," + svg::num(cy) + " " + svg::num(cx) + "," + svg::num(cy + 6) + " " +
               svg::num(cx - 6) + "," + svg::num(cy) + "\" fill=\"#9467bd\"/>\n";
        out += svg::text(cx + 10, cy - 8, "best cross: " + best->first + " " + svg::num(best->second));
    }
    out += "</svg>\n";
    return out;
}

/// Row-normalized heatmap of a confusion matrix with raw counts in cells.
inline std::string render_confusion_svg(const eval::LpClassifierResult& result) {
    const auto& cm = result.confusion;
    const std::size_t c = cm.labels.size();
    const double cell = 48, left = 110, top = 110;
    const double width = left + cell * static_cast<double>(c) + 20;
    const double height = top + cell * static_cast<double>(c) + 40;
    std::string out = svg::open(width, height);
    out += svg::text(10, 20, "LP classifier confusion (accuracy " + svg::num(result.accuracy) + ")");
    for (std::size_t i = 0; i < c; ++i) {
        const double y = top + cell * static_cast<double>(i);
        out += svg::text(left - 6, y + cell / 2 + 4, cm.labels[i], "end");
        const double x = left + cell * (static_cast<double>(i) + 0.5);
        out += "<text x=\"" + svg::num(x) + "\" y=\"" + svg::num(top - 6) + "\" transform=\"rotate(-45 " +
               svg::num(x) + " " + svg::num(top - 6) + ")\">" + svg::escape(cm.labels[i]) + "</text>\n";
    }
    out += "<g class=\"cells\">\n";
    for (std::size_t i = 0; i < c; ++i) {
        std::size_t row_total = 0;
        for (std::size_t v : cm.counts[i]) row_total += v;
        for (std::size_t j = 0; j < c; ++j) {
            const double frac =
                row_total ? static_cast<double>(cm.counts[i][j]) / static_cast<double>(row_total) : 0.0;
            const int shade = static_cast<int>(255.0 - 200.0 * frac);
            char fill[16];
            std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
            const double x = left + cell * static_cast<double>(j), y = top + cell * static_cast<double>(i);
            out += "<rect class=\"cell\" x=\"" + svg::num(x) + "\" y=\"" + svg::num(y) + "\" width=\"" +
                   svg::num(cell) + "\" height=\"" + svg::num(cell) + "\" fill=\"" + fill +
                   "\" stroke=\"#fff\"/>\n";
            out += svg::text(x + cell / 2, y + cell / 2 + 4, std::to_string(cm.counts[i][j]), "middle");
        }
    }
    out += "</g>\n";
    out += svg::text(left, height - 12, "rows: true property, columns: predicted");
    out += "</svg>\n";
    return out;
}

inline void render_svg(const edi::PropertyReport& report, std::span<const std::size_t> rfe_selected,
                       const std::filesystem::path& path, std::size_t top_n = 25) {
    write_file(path, render_combined_svg(report, rfe_selected, top_n));
}

inline void render_svg(const eval::EvaluationReport& report, const std::filesystem::path& path) {
    write_file(path, render_evaluation_svg(report));
}

inline void render_svg(const eval::LpClassifierResult& result, const std::filesystem::path& path) {
    write_file(path, render_confusion_svg(result));
}

}  // namespace ldsp::io
