#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "ldsp/edi.hpp"
#include "ldsp/io/synthetic.hpp"

using namespace ldsp;
using namespace ldsp::edi;

namespace {

EmbeddingPairSet planted_set(std::uint64_t seed, std::vector<io::PlantedDim> planted, std::size_t n = 1000,
                             std::size_t d = 64) {
    io::SyntheticSpec s;
    s.n_pairs = n;
    s.dim = d;
    s.seed = seed;
    s.planted = std::move(planted);
    return io::generate_synthetic(s);
}

const DimensionAnalysis& row_of(const PropertyReport& r, std::size_t dim) {
    return *std::find_if(r.dims.begin(), r.dims.end(), [&](const DimensionAnalysis& a) { return a.dimension == dim; });
}

}  // namespace

TEST(EdiConfig, WeightsMustSumToOne) {
    EdiConfig c;
    EXPECT_NO_THROW(c.validate());
    c.w1 = 0.5;
    EXPECT_THROW(c.validate(), Error);
    c = {};
    c.w1 = 1.0;
    c.w2 = c.w3 = 0.0;
    EXPECT_NO_THROW(c.validate());
    c.w1 = 1.2;
    c.w2 = -0.2;
    EXPECT_THROW(c.validate(), Error);
}

TEST(ComputeEdi, ReportInvariants) {
    const auto set = planted_set(1, {{5, 1.0}, {9, 0.5}}, 300, 24);
    const auto r = compute_edi(set);
    ASSERT_EQ(r.dim(), 24u);
    EXPECT_EQ(r.n_pairs, 300u);
    std::set<std::size_t> seen;
    bool p_one = false, p_zero = false, m_one = false, m_zero = false, r_one = false, r_zero = false;
    for (std::size_t i = 0; i < r.dims.size(); ++i) {
        const auto& a = r.dims[i];
        EXPECT_TRUE(seen.insert(a.dimension).second);
        EXPECT_EQ(a.edi, r.config.w1 * a.neg_log_p_scaled + r.config.w2 * a.mi_scaled +
                             r.config.w3 * a.rfe_weight_scaled);
        EXPECT_GE(a.edi, 0.0);
        EXPECT_LE(a.edi, 1.0);
        if (i > 0) {
            const auto& b = r.dims[i - 1];
            EXPECT_TRUE(b.edi > a.edi || (b.edi == a.edi && b.dimension < a.dimension));
        }
        p_one |= a.neg_log_p_scaled == 1.0;
        p_zero |= a.neg_log_p_scaled == 0.0;
        m_one |= a.mi_scaled == 1.0;
        m_zero |= a.mi_scaled == 0.0;
        r_one |= a.rfe_weight_scaled == 1.0;
        r_zero |= a.rfe_weight_scaled == 0.0;
        const bool selected = std::binary_search(r.rfe_selected.begin(), r.rfe_selected.end(), a.dimension);
        EXPECT_EQ(selected, a.rfe_weight > 0.0);
    }
    EXPECT_TRUE(p_one && p_zero && m_one && m_zero && r_one && r_zero);
    EXPECT_EQ(r.rfe_selected.size(), 20u);
}

TEST(ComputeEdi, DominantDimensionScoresOne) {
    const auto set = planted_set(2, {{4, 3.0}}, 500, 12);
    EdiConfig c;
    c.keep_count = 3;
    const auto r = compute_edi(set, c);
    EXPECT_EQ(r.dims.front().dimension, 4u);
    EXPECT_DOUBLE_EQ(r.dims.front().edi, 1.0);
    EXPECT_EQ(r.relevant_dims.front(), 4u);
}

TEST(ComputeEdi, NullDimensionScoresZero) {
    // dimension 7 is identical in s1 and s2: p = 1, MI = 0 and not selected
    auto set = planted_set(3, {{0, 2.0}, {1, 2.0}}, 400, 10);
    set.s2.col(7) = set.s1.col(7);
    EdiConfig c;
    c.keep_count = 2;
    const auto r = compute_edi(set, c);
    const auto& a = row_of(r, 7);
    EXPECT_EQ(a.p_value, 1.0);
    EXPECT_EQ(a.mi, 0.0);
    EXPECT_EQ(a.rfe_weight, 0.0);
    EXPECT_EQ(a.edi, 0.0);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("dimension 7"), std::string::npos);
}

TEST(ComputeEdi, PlantedDimsRankFirst) {
    const std::set<std::size_t> planted{3, 17, 40, 58};
    const auto set = planted_set(4, {{3, 2.0}, {17, 2.0}, {40, 2.0}, {58, 2.0}});
    const auto r = compute_edi(set);
    const auto ranked = r.ranked_dims();
    EXPECT_EQ(std::set<std::size_t>(ranked.begin(), ranked.begin() + 4), planted);
}

TEST(ComputeEdi, ScaleInvariantRanking) {
    auto set = planted_set(5, {{2, 1.0}, {6, 0.7}}, 300, 16);
    const auto r = compute_edi(set);
    set.s1 *= 4.0f;
    set.s2 *= 4.0f;
    const auto scaled = compute_edi(set);
    EXPECT_EQ(r.ranked_dims(), scaled.ranked_dims());
    for (std::size_t i = 0; i < r.dims.size(); ++i) EXPECT_EQ(r.dims[i].p_value, scaled.dims[i].p_value);
}

TEST(ComputeEdi, WilcoxonOnlyWeightsRankByPValue) {
    const auto set = planted_set(6, {{1, 0.3}, {2, 0.2}, {3, 0.1}}, 300, 20);
    EdiConfig c;
    c.w1 = 1.0;
    c.w2 = c.w3 = 0.0;
    const auto r = compute_edi(set, c);
    std::vector<std::size_t> by_p(20);
    std::iota(by_p.begin(), by_p.end(), std::size_t{0});
    std::vector<double> nlp(20);
    for (const auto& a : r.dims) nlp[a.dimension] = -std::log(std::max(a.p_value, c.p_floor));
    std::stable_sort(by_p.begin(), by_p.end(), [&](std::size_t a, std::size_t b) { return nlp[a] > nlp[b]; });
    EXPECT_EQ(r.ranked_dims(), by_p);
}

TEST(ComputeEdi, ThreadCountDoesNotChangeReport) {
    const auto set = planted_set(7, {{10, 1.0}}, 300, 32);
    const auto a = compute_edi(set, {}, 1);
    EXPECT_EQ(a, compute_edi(set, {}, 3));
    EXPECT_EQ(a, compute_edi(set, {}, 8));
}

TEST(ComputeEdi, EmptyRelevantWhenBelowThreshold) {
    auto r = compute_edi(planted_set(8, {{1, 1.0}}, 200, 8));
    r.config.edi_threshold = 1.5;
    finalize_report(r);
    EXPECT_TRUE(r.relevant_dims.empty());
}

TEST(ComputeEdi, DegenerateInputs) {
    const auto one_dim = planted_set(9, {}, 50, 1);
    try {
        compute_edi(one_dim);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateReport);
    }
    EXPECT_THROW(compute_edi(planted_set(9, {}, 1, 4)), Error);
}

TEST(ScoreDimensions, ExtremesAndMonotonicity) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const EdiConfig c;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t d = 2 + static_cast<std::size_t>(trial % 15);
        std::vector<double> p(d), mi(d), w(d);
        for (std::size_t j = 0; j < d; ++j) {
            p[j] = std::pow(10.0, -20.0 * u(rng));
            mi[j] = 0.5 * u(rng);
            w[j] = u(rng) < 0.5 ? 0.0 : u(rng);
        }
        const auto base = score_dimensions(p, mi, w, c);
        for (const auto& a : base) {
            EXPECT_GE(a.edi, 0.0);
            EXPECT_LE(a.edi, 1.0 + 1e-15);
        }
        // push one dimension's p below the current minimum
        const std::size_t j = static_cast<std::size_t>(trial) % d;
        auto p2 = p;
        p2[j] = *std::min_element(p.begin(), p.end()) * 0.5;
        EXPECT_GE(score_dimensions(p2, mi, w, c)[j].edi, base[j].edi);
    }
    // one dimension best on all three, another worst on all three
    const std::vector<double> p{1e-12, 0.5, 1.0}, mi{0.4, 0.1, 0.0}, w{2.0, 1.0, 0.0};
    const auto s = score_dimensions(p, mi, w, c);
    EXPECT_DOUBLE_EQ(s[0].edi, 1.0);
    EXPECT_EQ(s[2].edi, 0.0);
}

TEST(ScoreDimensions, PFloorApplies) {
    const std::vector<double> p{0.0, 1e-310, 0.5}, mi{0, 0, 0}, w{0, 0, 0};
    const auto s = score_dimensions(p, mi, w, EdiConfig{});
    EXPECT_EQ(s[0].neg_log_p_scaled, 1.0);
    EXPECT_EQ(s[1].neg_log_p_scaled, 1.0);
    EXPECT_EQ(s[2].neg_log_p_scaled, 0.0);
}

TEST(RankTable, Slices) {
    const auto r = compute_edi(planted_set(11, {{5, 2.5}, {6, 1.0}}, 400, 16));
    const auto top1 = edi_rank_table(r, 1);
    ASSERT_EQ(top1.size(), 1u);
    EXPECT_EQ(top1[0].dimension, 5u);
    const auto all = edi_rank_table(r, 16);
    ASSERT_EQ(all.size(), 16u);
    for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(all[i - 1].edi, all[i].edi);
    EXPECT_TRUE(edi_rank_table(r, 0).empty());
}
