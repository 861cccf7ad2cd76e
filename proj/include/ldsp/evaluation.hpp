#pragma once

// Classifier-based validation of EDI rankings: pair-level train/test split,
// the all-dimension baseline, the high-EDI accuracy curve, the low-EDI
// control, cross-property transfer and the multiclass property classifier on
// difference vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ldsp/edi.hpp"
#include "ldsp/error.hpp"
#include "ldsp/linear_model.hpp"
#include "ldsp/pair_set.hpp"
#include "ldsp/parallel.hpp"

namespace ldsp::eval {

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

/// Unbiased draw from [0, bound) by rejection; kept local so shuffles are
/// identical across standard library implementations.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = 0;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

/// Seeded Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    return idx;
}

inline std::size_t train_count(std::size_t n, double train_fraction) {
    auto k = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

struct PairSplit {
    EmbeddingPairSet train;
    EmbeddingPairSet test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

inline EmbeddingPairSet take_pairs(const EmbeddingPairSet& src, std::span<const std::size_t> rows) {
    EmbeddingPairSet out;
    out.model_tag = src.model_tag;
    out.property = src.property;
    out.source_hash = src.source_hash;
    out.pooling = src.pooling;
    out.layer = src.layer;
    out.s1.resize(static_cast<Eigen::Index>(rows.size()), src.s1.cols());
    out.s2.resize(static_cast<Eigen::Index>(rows.size()), src.s2.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.s1.row(static_cast<Eigen::Index>(i)) = src.s1.row(static_cast<Eigen::Index>(rows[i]));
        out.s2.row(static_cast<Eigen::Index>(i)) = src.s2.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

/// Both sentences of a pair always land on the same side.
inline PairSplit split(const EmbeddingPairSet& pairs, const SplitSpec& spec) {
    const std::size_t n = pairs.size();
    if (n < 5) throw Error(ErrorCode::TooFewPairs, "split: need at least 5 pairs, got " + std::to_string(n));
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "split: train_fraction must be in (0, 1)");
    const auto perm = seeded_permutation(n, spec.seed);
    const std::size_t k = train_count(n, spec.train_fraction);
    PairSplit s;
    s.train_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
    s.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(k), perm.end());
    s.train = take_pairs(pairs, s.train_indices);
    s.test = take_pairs(pairs, s.test_indices);
    return s;
}

/// Sentence-position task: s1 rows -> 0, s2 rows -> 1, standardized with
/// training statistics.
struct BinaryTask {
    linear::Matrix train_x;
    linear::Matrix test_x;
    std::vector<int> train_y;
    std::vector<int> test_y;

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(train_x.cols()); }
};

inline BinaryTask make_binary_task(const PairSplit& split) {
    BinaryTask t;
    const linear::Matrix train = edi::stacked_rows(split.train);
    const linear::Matrix test = edi::stacked_rows(split.test);
    const auto scaler = linear::Standardizer::fit(train);
    t.train_x = scaler.transform(train);
    t.test_x = scaler.transform(test);
    t.train_y = edi::stacked_labels(split.train.size());
    t.test_y = edi::stacked_labels(split.test.size());
    return t;
}

/// Test accuracy of a model trained on the given dimensions. Columns are used
/// in ascending index order so equal sets give bit-identical fits.
inline double accuracy_on_dims(const BinaryTask& task, std::span<const std::size_t> dims,
                               const linear::FitOptions& fit = {}) {
    std::vector<std::size_t> cols(dims.begin(), dims.end());
    std::sort(cols.begin(), cols.end());
    for (std::size_t c : cols)
        if (c >= task.dim())
            throw Error(ErrorCode::DimensionMismatch, "dimension " + std::to_string(c) + " out of range for d=" +
                                                          std::to_string(task.dim()));
    const auto model = linear::fit_logistic(linear::select_columns(task.train_x, cols), task.train_y, fit);
    return linear::predict_accuracy(model, linear::select_columns(task.test_x, cols), task.test_y);
}

inline double baseline(const BinaryTask& task, const linear::FitOptions& fit = {}) {
    std::vector<std::size_t> all(task.dim());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return accuracy_on_dims(task, all, fit);
}

inline void check_ranking(std::span<const std::size_t> ranked, std::size_t d, const char* what) {
    if (ranked.size() != d)
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": ranking covers " +
                                                      std::to_string(ranked.size()) + " dimensions, data has " +
                                                      std::to_string(d));
    std::vector<bool> seen(d, false);
    for (std::size_t r : ranked) {
        if (r >= d || seen[r])
            throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": ranking is not a permutation of 0.." +
                                                          std::to_string(d - 1));
        seen[r] = true;
    }
}

struct CurvePoint {
    std::size_t k = 0;
    double accuracy = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct HighEdiResult {
    std::vector<CurvePoint> curve;
    std::size_t k_at_95 = 0;
    bool reached = false;  // false when k_max was hit first
};

/// Grows the top-k set of `ranked_dims` (EDI descending) until accuracy
/// reaches stop_ratio * baseline_accuracy or k = k_max (0 means d).
/// Candidate k values are trained `threads` at a time; the curve is cut at the
/// first k that meets the bar, so the result does not depend on `threads`.
inline HighEdiResult eval_high_edi(const BinaryTask& task, std::span<const std::size_t> ranked_dims,
                                   double baseline_accuracy, double stop_ratio = 0.95, std::size_t k_max = 0,
                                   std::size_t threads = 1, const linear::FitOptions& fit = {}) {
    check_ranking(ranked_dims, task.dim(), "eval_high_edi");
    if (k_max == 0 || k_max > task.dim()) k_max = task.dim();
    const double bar = stop_ratio * baseline_accuracy;
    HighEdiResult res;
    const std::size_t wave = std::max<std::size_t>(threads, 1);
    for (std::size_t start = 1; start <= k_max; start += wave) {
        const std::size_t count = std::min(wave, k_max - start + 1);
        std::vector<double> acc(count);
        parallel_for(count, threads, [&](std::size_t i) {
            acc[i] = accuracy_on_dims(task, ranked_dims.first(start + i), fit);
        });
        for (std::size_t i = 0; i < count; ++i) {
            res.curve.push_back({start + i, acc[i]});
            if (acc[i] >= bar) {
                res.k_at_95 = start + i;
                res.reached = true;
                return res;
            }
        }
    }
    res.k_at_95 = k_max;
    return res;
}

/// Accuracy using the bottom_k lowest-EDI dimensions of `ranked_dims`
/// (EDI descending).
inline double eval_low_edi(const BinaryTask& task, std::span<const std::size_t> ranked_dims,
                           std::size_t bottom_k = 100, const linear::FitOptions& fit = {}) {
    check_ranking(ranked_dims, task.dim(), "eval_low_edi");
    if (bottom_k < 1 || bottom_k > task.dim())
        throw Error(ErrorCode::InvalidArgument, "eval_low_edi: bottom_k=" + std::to_string(bottom_k) +
                                                    " must be in [1, " + std::to_string(task.dim()) + "]");
    return accuracy_on_dims(task, ranked_dims.last(bottom_k), fit);
}

/// For each other property, trains the current task on that property's top_k
/// dimensions.
inline std::map<std::string, double> eval_cross_property(const BinaryTask& task,
                                                         const std::map<std::string, std::vector<std::size_t>>& others,
                                                         std::size_t top_k = 25, std::size_t threads = 1,
                                                         const linear::FitOptions& fit = {}) {
    std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> items;
    for (const auto& kv : others) {
        check_ranking(kv.second, task.dim(), ("eval_cross_property[" + kv.first + "]").c_str());
        items.push_back(&kv);
    }
    const std::size_t k = std::min(top_k, task.dim());
    std::vector<double> acc(items.size());
    parallel_for(items.size(), threads, [&](std::size_t i) {
        acc[i] = accuracy_on_dims(task, std::span<const std::size_t>(items[i]->second).first(k), fit);
    });
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < items.size(); ++i) out[items[i]->first] = acc[i];
    return out;
}

struct EvaluationOptions {
    SplitSpec split;
    double stop_ratio = 0.95;
    std::size_t k_max = 0;  // 0: d
    std::size_t bottom_k = 100;
    std::size_t cross_k = 25;
    std::size_t threads = 1;
    linear::FitOptions fit;
};

struct EvaluationReport {
    std::string property;
    std::string model_tag;
    std::uint64_t seed = 0;
    std::size_t n_train_pairs = 0;
    std::size_t n_test_pairs = 0;
    double stop_ratio = 0.95;
    double baseline_accuracy = 0.0;
    std::vector<CurvePoint> high_edi_curve;
    std::size_t k_at_95 = 0;
    bool reached = false;
    std::size_t bottom_k = 0;
    double low_edi_accuracy = 0.0;
    std::size_t cross_k = 0;
    std::map<std::string, double> cross_property;

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Baseline plus the three EDI evaluations on one shared split.
inline EvaluationReport evaluate_property(const EmbeddingPairSet& pairs, std::span<const std::size_t> ranked_dims,
                                          const std::map<std::string, std::vector<std::size_t>>& others,
                                          const EvaluationOptions& opts = {}) {
    pairs.validate();
    const PairSplit s = split(pairs, opts.split);
    const BinaryTask task = make_binary_task(s);
    EvaluationReport r;
    r.property = pairs.property;
    r.model_tag = pairs.model_tag;
    r.seed = opts.split.seed;
    r.n_train_pairs = s.train.size();
    r.n_test_pairs = s.test.size();
    r.stop_ratio = opts.stop_ratio;
    r.baseline_accuracy = baseline(task, opts.fit);
    auto high = eval_high_edi(task, ranked_dims, r.baseline_accuracy, opts.stop_ratio, opts.k_max, opts.threads,
                              opts.fit);
    r.high_edi_curve = std::move(high.curve);
    r.k_at_95 = high.k_at_95;
    r.reached = high.reached;
    r.bottom_k = opts.bottom_k;
    r.low_edi_accuracy = eval_low_edi(task, ranked_dims, opts.bottom_k, opts.fit);
    r.cross_k = opts.cross_k;
    r.cross_property = eval_cross_property(task, others, opts.cross_k, opts.threads, opts.fit);
    return r;
}

struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> counts;  // [true][predicted]

    [[nodiscard]] std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : counts)
            for (std::size_t c : row) t += c;
        return t;
    }
    [[nodiscard]] std::size_t trace() const {
        std::size_t t = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
        return t;
    }
};

struct LpClassifierResult {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    bool converged = false;
};

/// Multiclass classifier assigning each difference vector s1 - s2 to its
/// property. Labels are the property names in ascending order.
inline LpClassifierResult lp_classifier(const std::map<std::string, EmbeddingPairSet>& datasets,
                                        const SplitSpec& spec, linear::FitOptions fit = {.tol = 1e-4}) {
    if (datasets.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "lp_classifier: need at least 2 properties, got " +
                                                    std::to_string(datasets.size()));
    const std::size_t d = datasets.begin()->second.dim();
    std::size_t total = 0;
    for (const auto& [name, set] : datasets) {
        set.validate();
        if (set.dim() != d)
            throw Error(ErrorCode::DimensionMismatch, "lp_classifier: '" + name + "' has dim " +
                                                          std::to_string(set.dim()) + ", expected " +
                                                          std::to_string(d));
        total += set.size();
    }
    if (total < 5) throw Error(ErrorCode::TooFewPairs, "lp_classifier: need at least 5 pairs in total");

    LpClassifierResult res;
    linear::Matrix diffs(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    std::vector<int> labels;
    labels.reserve(total);
    Eigen::Index row = 0;
    int label = 0;
    for (const auto& [name, set] : datasets) {
        res.confusion.labels.push_back(name);
        const auto n = static_cast<Eigen::Index>(set.size());
        diffs.middleRows(row, n) = set.s1.cast<double>() - set.s2.cast<double>();
        labels.insert(labels.end(), set.size(), label);
        row += n;
        ++label;
    }

    const auto perm = seeded_permutation(total, spec.seed);
    const std::size_t k = train_count(total, spec.train_fraction);
    const std::span<const std::size_t> train_rows(perm.data(), k);
    const std::span<const std::size_t> test_rows(perm.data() + k, total - k);
    auto gather = [&](std::span<const std::size_t> rows, linear::Matrix& x, std::vector<int>& y) {
        x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
        y.clear();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = diffs.row(static_cast<Eigen::Index>(rows[i]));
            y.push_back(labels[rows[i]]);
        }
    };
    linear::Matrix train_x, test_x;
    std::vector<int> train_y, test_y;
    gather(train_rows, train_x, train_y);
    gather(test_rows, test_x, test_y);
    const auto scaler = linear::Standardizer::fit(train_x);
    const auto model = linear::fit_logistic(scaler.transform(train_x), train_y, fit);
    const auto pred = model.predict(scaler.transform(test_x));

    const std::size_t c = datasets.size();
    res.confusion.counts.assign(c, std::vector<std::size_t>(c, 0));
    for (std::size_t i = 0; i < pred.size(); ++i)
        ++res.confusion.counts[static_cast<std::size_t>(test_y[i])][static_cast<std::size_t>(pred[i])];
    res.accuracy = static_cast<double>(res.confusion.trace()) / static_cast<double>(res.confusion.total());
    res.n_train = k;
    res.n_test = total - k;
    res.converged = model.converged;
    return res;
}

}  // namespace ldsp::eval
