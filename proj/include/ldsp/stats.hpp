#pragma once

// Deterministic statistical kernels used by the per-dimension analysis:
// Wilcoxon signed-rank test (exact and normal-approximation p-values),
// quantile binning, plug-in mutual information and min-max scaling.
//
// Every reduction runs left to right over its input so results are
// bit-identical no matter how callers distribute dimensions across threads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ldsp/error.hpp"

namespace ldsp::stats {

namespace detail {

inline void require_finite(std::span<const double> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorCode::NonFiniteInput,
                        std::string(what) + ": non-finite value at index " + std::to_string(i));
        }
    }
}

}  // namespace detail

/// Per-pair differences s1 - s2 for one embedding dimension.
struct DifferenceVector {
    std::vector<double> values;
    std::size_t dimension_index = 0;
};

enum class WilcoxonMethod { Exact, NormalApprox };

enum class Alternative { TwoSided, Greater, Less };

struct WilcoxonOptions {
    // Largest tie-free nonzero count evaluated with the exact null distribution.
    std::size_t exact_threshold = 25;
    Alternative alternative = Alternative::TwoSided;

    friend bool operator==(const WilcoxonOptions&, const WilcoxonOptions&) = default;
};

struct WilcoxonResult {
    double statistic = 0.0;  // W, sum of ranks of positive differences
    std::size_t n_nonzero = 0;
    double p_value = 1.0;
    WilcoxonMethod method = WilcoxonMethod::NormalApprox;
};

struct SignedRanks {
    std::vector<double> ranks;          // average ranks of |value|, aligned with `indices`
    std::vector<std::size_t> indices;   // positions of the nonzero inputs
    std::size_t n_nonzero = 0;
    double tie_term = 0.0;              // sum over tie groups of (t^3 - t)

    [[nodiscard]] bool has_ties() const noexcept { return tie_term > 0.0; }
};

/// Drops zeros and ranks the remaining absolute values 1..n, giving tied
/// magnitudes their average rank. Ranks are returned in input order.
inline SignedRanks signed_ranks(std::span<const double> values) {
    detail::require_finite(values, "signed_ranks");
    SignedRanks out;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] != 0.0) out.indices.push_back(i);
    const std::size_t n = out.indices.size();
    out.n_nonzero = n;
    out.ranks.assign(n, 0.0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(values[out.indices[a]]) < std::fabs(values[out.indices[b]]);
    });

    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        const double mag = std::fabs(values[out.indices[order[i]]]);
        while (j < n && std::fabs(values[out.indices[order[j]]]) == mag) ++j;
        // positions i..j-1 hold ranks i+1..j
        const double avg = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) out.ranks[order[k]] = avg;
        const auto t = static_cast<double>(j - i);
        out.tie_term += t * t * t - t;
        i = j;
    }
    return out;
}

/// Number of sign assignments of ranks 1..n whose positive-rank sum equals s,
/// for s = 0 .. n(n+1)/2. Counts are exact integers in double up to n = 52.
inline std::vector<double> signed_rank_null_counts(std::size_t n) {
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> counts(max_sum + 1, 0.0);
    counts[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r = 1; r <= n; ++r) {
        reach += r;
        for (std::size_t s = reach; s >= r; --s) counts[s] += counts[s - r];
    }
    return counts;
}

inline double exact_signed_rank_p(double statistic, std::size_t n, Alternative alt) {
    const auto counts = signed_rank_null_counts(n);
    const auto w = static_cast<std::size_t>(std::llround(statistic));
    double lower = 0.0;  // #{W <= w}
    double upper = 0.0;  // #{W >= w}
    for (std::size_t s = 0; s < counts.size(); ++s) {
        if (s <= w) lower += counts[s];
        if (s >= w) upper += counts[s];
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    switch (alt) {
        case Alternative::Greater: return upper / total;
        case Alternative::Less: return lower / total;
        case Alternative::TwoSided: break;
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / total);
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
inline double approx_signed_rank_p(double statistic, std::size_t n, double tie_term, Alternative alt) {
    const auto nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = (nd * (nd + 1.0) * (2.0 * nd + 1.0) - tie_term / 2.0) / 24.0;
    const double sd = std::sqrt(var);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    switch (alt) {
        case Alternative::Greater: {
            const double z = (statistic - mean - 0.5) / sd;
            return std::min(1.0, 0.5 * std::erfc(z * inv_sqrt2));
        }
        case Alternative::Less: {
            const double z = (statistic - mean + 0.5) / sd;
            return std::min(1.0, 0.5 * std::erfc(-z * inv_sqrt2));
        }
        case Alternative::TwoSided: break;
    }
    const double z = std::max(std::fabs(statistic - mean) - 0.5, 0.0) / sd;
    return std::min(1.0, std::erfc(z * inv_sqrt2));
}

/// Tests H0: median(diff) = 0. Zeros are dropped before ranking; an input with
/// no nonzero difference raises AllZeroDifferences.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> diff, const WilcoxonOptions& opts = {}) {
    if (diff.empty()) throw Error(ErrorCode::InvalidArgument, "wilcoxon_signed_rank: empty difference vector");
    if (opts.exact_threshold > 50)
        throw Error(ErrorCode::InvalidArgument, "wilcoxon_signed_rank: exact_threshold must be <= 50");
    const SignedRanks sr = signed_ranks(diff);
    if (sr.n_nonzero == 0)
        throw Error(ErrorCode::AllZeroDifferences, "wilcoxon_signed_rank: all differences are zero");

    WilcoxonResult res;
    res.n_nonzero = sr.n_nonzero;
    for (std::size_t k = 0; k < sr.n_nonzero; ++k)
        if (diff[sr.indices[k]] > 0.0) res.statistic += sr.ranks[k];

    if (sr.n_nonzero <= opts.exact_threshold && !sr.has_ties()) {
        res.method = WilcoxonMethod::Exact;
        res.p_value = exact_signed_rank_p(res.statistic, sr.n_nonzero, opts.alternative);
    } else {
        res.method = WilcoxonMethod::NormalApprox;
        res.p_value = approx_signed_rank_p(res.statistic, sr.n_nonzero, sr.tie_term, opts.alternative);
    }
    return res;
}

inline WilcoxonResult wilcoxon_signed_rank(const DifferenceVector& diff, const WilcoxonOptions& opts = {}) {
    return wilcoxon_signed_rank(std::span<const double>(diff.values), opts);
}

/// Interior bin edges; `edges` is strictly ascending and bin_count = edges + 1.
struct BinEdges {
    std::vector<double> edges;
    std::size_t bin_count = 1;

    /// Bin of v: the number of edges strictly below it, so a value equal to an
    /// edge falls into the lower bin.
    [[nodiscard]] std::size_t bin_of(double v) const {
        return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
    }
};

/// Linear-interpolation quantile of an ascending sample at probability q.
inline double linear_quantile(std::span<const double> sorted, double q) {
    const double h = static_cast<double>(sorted.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// Edges at quantiles k/requested_bins, k = 1..requested_bins-1, with
/// duplicates collapsed. Constant input yields a single bin.
inline BinEdges quantile_bin_edges(std::span<const double> pooled, std::size_t requested_bins) {
    if (pooled.empty()) throw Error(ErrorCode::InvalidArgument, "quantile_bin_edges: empty input");
    if (requested_bins < 2) throw Error(ErrorCode::InvalidArgument, "quantile_bin_edges: need at least 2 bins");
    detail::require_finite(pooled, "quantile_bin_edges");

    std::vector<double> sorted(pooled.begin(), pooled.end());
    std::sort(sorted.begin(), sorted.end());
    BinEdges out;
    if (sorted.front() == sorted.back()) return out;

    for (std::size_t k = 1; k < requested_bins; ++k) {
        const double q = static_cast<double>(k) / static_cast<double>(requested_bins);
        const double e = linear_quantile(sorted, q);
        if (out.edges.empty() || e > out.edges.back()) out.edges.push_back(e);
    }
    out.bin_count = out.edges.size() + 1;
    return out;
}

struct MutualInfoResult {
    double mi_nats = 0.0;
    std::vector<std::array<std::size_t, 2>> joint_counts;  // [bin][label]
    std::size_t n_samples = 0;

    [[nodiscard]] std::size_t bin_count() const noexcept { return joint_counts.size(); }
};

/// Plug-in MI in nats of a bins x 2 contingency table, with 0 ln 0 := 0.
inline double mutual_information_from_counts(std::span<const std::array<std::size_t, 2>> joint) {
    std::size_t total = 0;
    std::array<std::size_t, 2> label_totals{0, 0};
    for (const auto& row : joint) {
        label_totals[0] += row[0];
        label_totals[1] += row[1];
    }
    total = label_totals[0] + label_totals[1];
    if (total == 0) return 0.0;
    const auto n = static_cast<double>(total);
    double mi = 0.0;
    for (const auto& row : joint) {
        const auto bin_total = static_cast<double>(row[0] + row[1]);
        for (std::size_t y = 0; y < 2; ++y) {
            if (row[y] == 0) continue;
            const auto c = static_cast<double>(row[y]);
            mi += (c / n) * std::log(c * n / (bin_total * static_cast<double>(label_totals[y])));
        }
    }
    return std::max(0.0, mi);
}

/// MI between one dimension's values and the sentence position (s1 -> 0,
/// s2 -> 1). Bin edges come from the pooled 2N values.
inline MutualInfoResult mutual_information(std::span<const double> s1, std::span<const double> s2,
                                           std::size_t bins = 10) {
    if (s1.size() != s2.size())
        throw Error(ErrorCode::DimensionMismatch, "mutual_information: s1 and s2 lengths differ");
    if (s1.size() < 2) throw Error(ErrorCode::InvalidArgument, "mutual_information: need at least 2 samples per side");

    std::vector<double> pooled;
    pooled.reserve(2 * s1.size());
    pooled.insert(pooled.end(), s1.begin(), s1.end());
    pooled.insert(pooled.end(), s2.begin(), s2.end());
    const BinEdges edges = quantile_bin_edges(pooled, bins);

    MutualInfoResult res;
    res.n_samples = pooled.size();
    res.joint_counts.assign(edges.bin_count, {0, 0});
    for (double v : s1) ++res.joint_counts[edges.bin_of(v)][0];
    for (double v : s2) ++res.joint_counts[edges.bin_of(v)][1];
    res.mi_nats = edges.bin_count == 1 ? 0.0 : mutual_information_from_counts(res.joint_counts);
    return res;
}

/// (v - min) / (max - min); a zero range maps every value to 0.
inline std::vector<double> min_max_scale(std::span<const double> values) {
    detail::require_finite(values, "min_max_scale");
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (range == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / range;
    return out;
}

}  // namespace ldsp::stats
