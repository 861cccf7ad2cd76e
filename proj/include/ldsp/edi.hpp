#pragma once

// Embedding Dimension Importance: per dimension, the min-max scaled
// -ln(Wilcoxon p), mutual information with the sentence position, and
// |RFE weight| are combined as w1*P + w2*M + w3*R.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ldsp/error.hpp"
#include "ldsp/linear_model.hpp"
#include "ldsp/pair_set.hpp"
#include "ldsp/parallel.hpp"
#include "ldsp/stats.hpp"

namespace ldsp::edi {

struct EdiConfig {
    double w1 = 0.6;  // Wilcoxon term
    double w2 = 0.2;  // mutual information term
    double w3 = 0.2;  // RFE weight term
    std::size_t bins = 10;
    std::size_t keep_count = 20;
    double p_floor = 1e-300;
    double edi_threshold = 0.8;
    double rfe_step_fraction = 0.1;
    double l2_lambda = 1.0;
    stats::WilcoxonOptions wilcoxon;

    friend bool operator==(const EdiConfig&, const EdiConfig&) = default;

    void validate() const {
        if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0)
            throw Error(ErrorCode::InvalidArgument, "EdiConfig: weights must be non-negative");
        if (std::fabs(w1 + w2 + w3 - 1.0) > 1e-9)
            throw Error(ErrorCode::InvalidArgument, "EdiConfig: weights must sum to 1 (got " +
                                                        std::to_string(w1 + w2 + w3) + ")");
        if (bins < 2) throw Error(ErrorCode::InvalidArgument, "EdiConfig: bins must be >= 2");
        if (keep_count < 1) throw Error(ErrorCode::InvalidArgument, "EdiConfig: keep_count must be >= 1");
        if (!(p_floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "EdiConfig: p_floor must be positive");
        if (!(rfe_step_fraction > 0.0 && rfe_step_fraction <= 1.0))
            throw Error(ErrorCode::InvalidArgument, "EdiConfig: rfe_step_fraction must be in (0, 1]");
    }
};

struct DimensionAnalysis {
    std::size_t dimension = 0;
    double p_value = 1.0;
    double mi = 0.0;          // nats
    double rfe_weight = 0.0;  // |final RFE weight|, 0 when not selected
    double neg_log_p_scaled = 0.0;
    double mi_scaled = 0.0;
    double rfe_weight_scaled = 0.0;
    double edi = 0.0;

    friend bool operator==(const DimensionAnalysis&, const DimensionAnalysis&) = default;
};

struct PropertyReport {
    std::string property;
    std::string model_tag;
    std::size_t n_pairs = 0;
    EdiConfig config;
    std::vector<DimensionAnalysis> dims;      // edi descending, ties by ascending dimension
    std::vector<std::size_t> relevant_dims;   // edi >= edi_threshold, in report order
    std::vector<std::size_t> rfe_selected;    // ascending
    std::vector<std::string> warnings;

    friend bool operator==(const PropertyReport&, const PropertyReport&) = default;

    [[nodiscard]] std::size_t dim() const noexcept { return dims.size(); }

    /// Dimension indices in descending EDI order.
    [[nodiscard]] std::vector<std::size_t> ranked_dims() const {
        std::vector<std::size_t> out;
        out.reserve(dims.size());
        for (const auto& d : dims) out.push_back(d.dimension);
        return out;
    }
};

/// Sorts by edi descending with ascending dimension as tie-break and refreshes
/// relevant_dims.
inline void finalize_report(PropertyReport& report) {
    std::sort(report.dims.begin(), report.dims.end(), [](const DimensionAnalysis& a, const DimensionAnalysis& b) {
        if (a.edi != b.edi) return a.edi > b.edi;
        return a.dimension < b.dimension;
    });
    report.relevant_dims.clear();
    for (const auto& d : report.dims)
        if (d.edi >= report.config.edi_threshold) report.relevant_dims.push_back(d.dimension);
}

/// Stacks s1 rows (label 0) over s2 rows (label 1) as float64.
inline linear::Matrix stacked_rows(const EmbeddingPairSet& pairs) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    linear::Matrix x(2 * n, static_cast<Eigen::Index>(pairs.dim()));
    x.topRows(n) = pairs.s1.cast<double>();
    x.bottomRows(n) = pairs.s2.cast<double>();
    return x;
}

inline std::vector<int> stacked_labels(std::size_t n_pairs) {
    std::vector<int> y(2 * n_pairs, 0);
    std::fill(y.begin() + static_cast<std::ptrdiff_t>(n_pairs), y.end(), 1);
    return y;
}

struct DimensionSignals {
    double p_value = 1.0;
    double mi = 0.0;
    bool all_zero = false;
};

/// Wilcoxon p-value and MI of one dimension.
inline DimensionSignals dimension_signals(const EmbeddingPairSet& pairs, std::size_t dim, const EdiConfig& config) {
    const std::size_t n = pairs.size();
    std::vector<double> a(n), b(n), diff(n);
    const auto j = static_cast<Eigen::Index>(dim);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = static_cast<double>(pairs.s1(static_cast<Eigen::Index>(i), j));
        b[i] = static_cast<double>(pairs.s2(static_cast<Eigen::Index>(i), j));
        diff[i] = a[i] - b[i];
    }
    DimensionSignals s;
    try {
        s.p_value = stats::wilcoxon_signed_rank(std::span<const double>(diff), config.wilcoxon).p_value;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::AllZeroDifferences) throw;
        s.p_value = 1.0;
        s.all_zero = true;
    }
    if (n >= 2) s.mi = stats::mutual_information(a, b, config.bins).mi_nats;
    return s;
}

/// RFE on the stacked, standardized rows; returns |weight| per dimension
/// (0 outside the selected set) and the selected set.
inline std::pair<std::vector<double>, std::vector<std::size_t>> rfe_weights(const EmbeddingPairSet& pairs,
                                                                            std::size_t keep_count,
                                                                            double step_fraction, double l2_lambda) {
    const linear::Matrix x = stacked_rows(pairs);
    const linear::Matrix z = linear::Standardizer::fit(x).transform(x);
    const auto y = stacked_labels(pairs.size());
    linear::RfeOptions opts;
    opts.keep_count = keep_count;
    opts.step_fraction = step_fraction;
    opts.fit.l2_lambda = l2_lambda;
    const linear::RfeResult r = linear::rfe(z, y, opts);
    std::vector<double> weights(pairs.dim(), 0.0);
    for (const auto& [dim, w] : r.final_weights) weights[dim] = std::fabs(w);
    return {std::move(weights), r.selected_dims};
}

/// Scales -ln(max(p, p_floor)), MI and |RFE weight| across dimensions and
/// combines them; entry j describes dimension j.
inline std::vector<DimensionAnalysis> score_dimensions(std::span<const double> p_values, std::span<const double> mi,
                                                       std::span<const double> rfe_abs, const EdiConfig& config) {
    const std::size_t d = p_values.size();
    if (mi.size() != d || rfe_abs.size() != d)
        throw Error(ErrorCode::DimensionMismatch, "score_dimensions: signal lengths differ");
    std::vector<double> neg_log_p(d);
    for (std::size_t j = 0; j < d; ++j) neg_log_p[j] = -std::log(std::max(p_values[j], config.p_floor));
    const auto p_scaled = stats::min_max_scale(neg_log_p);
    const auto m_scaled = stats::min_max_scale(mi);
    const auto r_scaled = stats::min_max_scale(rfe_abs);
    std::vector<DimensionAnalysis> dims(d);
    for (std::size_t j = 0; j < d; ++j) {
        auto& a = dims[j];
        a.dimension = j;
        a.p_value = p_values[j];
        a.mi = mi[j];
        a.rfe_weight = rfe_abs[j];
        a.neg_log_p_scaled = p_scaled[j];
        a.mi_scaled = m_scaled[j];
        a.rfe_weight_scaled = r_scaled[j];
        a.edi = config.w1 * a.neg_log_p_scaled + config.w2 * a.mi_scaled + config.w3 * a.rfe_weight_scaled;
    }
    return dims;
}

/// Full per-dimension analysis of one property's pair set. Per-dimension
/// tests run on up to `threads` workers; RFE runs once, sequentially.
inline PropertyReport compute_edi(const EmbeddingPairSet& pairs, const EdiConfig& config = {},
                                  std::size_t threads = 1) {
    config.validate();
    pairs.validate();
    const std::size_t d = pairs.dim();
    if (d < 2)
        throw Error(ErrorCode::DegenerateReport, "compute_edi: '" + pairs.property + "' has " + std::to_string(d) +
                                                     " dimension(s); min-max scaling needs at least 2");
    if (pairs.size() < 2)
        throw Error(ErrorCode::DegenerateReport, "compute_edi: '" + pairs.property + "' needs at least 2 pairs");

    std::vector<DimensionSignals> signals(d);
    parallel_for(d, threads, [&](std::size_t j) { signals[j] = dimension_signals(pairs, j, config); });

    auto [rfe_abs, selected] = rfe_weights(pairs, config.keep_count, config.rfe_step_fraction, config.l2_lambda);

    std::vector<double> p(d), mi(d);
    PropertyReport report;
    report.property = pairs.property;
    report.model_tag = pairs.model_tag;
    report.n_pairs = pairs.size();
    report.config = config;
    report.rfe_selected = selected;
    for (std::size_t j = 0; j < d; ++j) {
        p[j] = signals[j].p_value;
        mi[j] = signals[j].mi;
        if (signals[j].all_zero)
            report.warnings.push_back("dimension " + std::to_string(j) +
                                      ": all pair differences are zero; p-value reported as 1.0");
    }
    report.dims = score_dimensions(p, mi, rfe_abs, config);
    finalize_report(report);
    return report;
}

struct RankRow {
    std::size_t dimension = 0;
    double edi = 0.0;
};

/// First top_k rows of the sorted report (all rows if top_k exceeds d).
inline std::vector<RankRow> edi_rank_table(const PropertyReport& report, std::size_t top_k) {
    const std::size_t k = std::min(top_k, report.dims.size());
    std::vector<RankRow> rows;
    rows.reserve(k);
    for (std::size_t i = 0; i < k; ++i) rows.push_back({report.dims[i].dimension, report.dims[i].edi});
    return rows;
}

}  // namespace ldsp::edi
