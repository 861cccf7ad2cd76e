#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "ldsp/stats.hpp"
#include "oracles.hpp"

using namespace ldsp;
using namespace ldsp::stats;

TEST(SignedRanks, DistinctMagnitudes) {
    const std::vector<double> v{3.0, -1.0, 2.0};
    const auto r = signed_ranks(v);
    EXPECT_EQ(r.n_nonzero, 3u);
    EXPECT_EQ(r.ranks, (std::vector<double>{3, 1, 2}));
    EXPECT_FALSE(r.has_ties());
}

TEST(SignedRanks, TiesGetAverageRank) {
    const std::vector<double> v{1.0, -1.0, 2.0};
    const auto r = signed_ranks(v);
    EXPECT_EQ(r.ranks, (std::vector<double>{1.5, 1.5, 3}));
    EXPECT_DOUBLE_EQ(r.tie_term, 6.0);
}

TEST(SignedRanks, ZerosDropped) {
    const std::vector<double> v{0.0, 0.0, 5.0};
    const auto r = signed_ranks(v);
    EXPECT_EQ(r.n_nonzero, 1u);
    EXPECT_EQ(r.ranks, (std::vector<double>{1}));
    EXPECT_EQ(r.indices, (std::vector<std::size_t>{2}));
}

TEST(SignedRanks, NonFiniteRejected) {
    const std::vector<double> v{1.0, std::nan("")};
    try {
        signed_ranks(v);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteInput);
    }
}

TEST(SignedRanks, MatchesNaiveRanking) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick(-4, 4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(15);
        for (auto& x : v) x = pick(rng);
        std::vector<double> nz;
        for (double x : v)
            if (x != 0) nz.push_back(x);
        const auto r = signed_ranks(v);
        EXPECT_EQ(r.ranks, oracle::naive_ranks(nz));
    }
}

TEST(Wilcoxon, AllPositiveFive) {
    const std::vector<double> d{1, 2, 3, 4, 5};
    const auto r = wilcoxon_signed_rank(d);
    EXPECT_EQ(r.statistic, 15.0);
    EXPECT_EQ(r.method, WilcoxonMethod::Exact);
    EXPECT_DOUBLE_EQ(r.p_value, 0.0625);
}

TEST(Wilcoxon, SixValueExampleMatchesEnumeration) {
    const std::vector<double> d{1.2, -0.5, 0.3, -2.0, 0.8, 1.1};
    const auto r = wilcoxon_signed_rank(d);
    const auto o = oracle::brute_force_wilcoxon(d);
    EXPECT_EQ(r.statistic, o.w);
    EXPECT_NEAR(r.p_value, o.p_two_sided, 1e-15);
    EXPECT_EQ(r.method, WilcoxonMethod::Exact);
}

TEST(Wilcoxon, ExactMatchesEnumerationAllAlternatives) {
    std::mt19937_64 rng(5);
    for (std::size_t n = 1; n <= 14; ++n) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto d = oracle::distinct_diffs(n, rng);
            const auto o = oracle::brute_force_wilcoxon(d);
            EXPECT_NEAR(wilcoxon_signed_rank(d).p_value, o.p_two_sided, 1e-12);
            EXPECT_NEAR(wilcoxon_signed_rank(d, {25, Alternative::Greater}).p_value, o.p_greater, 1e-12);
            EXPECT_NEAR(wilcoxon_signed_rank(d, {25, Alternative::Less}).p_value, o.p_less, 1e-12);
        }
    }
}

TEST(Wilcoxon, NullCountsSumToPowerOfTwo) {
    for (std::size_t n = 0; n <= 30; ++n) {
        const auto c = signed_rank_null_counts(n);
        EXPECT_EQ(std::accumulate(c.begin(), c.end(), 0.0), std::ldexp(1.0, static_cast<int>(n)));
        for (std::size_t s = 0; s < c.size(); ++s) EXPECT_EQ(c[s], c[c.size() - 1 - s]);
    }
}

TEST(Wilcoxon, TiesUseApproximation) {
    const std::vector<double> d{1, -1, 2, 3};
    const auto r = wilcoxon_signed_rank(d);
    EXPECT_EQ(r.method, WilcoxonMethod::NormalApprox);
}

TEST(Wilcoxon, AboveThresholdUsesApproximation) {
    std::mt19937_64 rng(3);
    const auto d = oracle::distinct_diffs(26, rng);
    EXPECT_EQ(wilcoxon_signed_rank(d).method, WilcoxonMethod::NormalApprox);
    EXPECT_EQ(wilcoxon_signed_rank(d, {26, Alternative::TwoSided}).method, WilcoxonMethod::Exact);
}

TEST(Wilcoxon, AllZeroRaises) {
    const std::vector<double> d{0, 0, 0};
    try {
        wilcoxon_signed_rank(d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AllZeroDifferences);
    }
}

TEST(Wilcoxon, EmptyRejected) {
    EXPECT_THROW(wilcoxon_signed_rank(std::span<const double>{}), Error);
}

TEST(Wilcoxon, SignFlipAntisymmetry) {
    std::mt19937_64 rng(17);
    for (std::size_t n : {5u, 12u, 25u, 40u, 200u}) {
        for (int trial = 0; trial < 20; ++trial) {
            auto d = oracle::distinct_diffs(n, rng);
            std::vector<double> neg(d.size());
            std::transform(d.begin(), d.end(), neg.begin(), [](double x) { return -x; });
            const auto a = wilcoxon_signed_rank(d), b = wilcoxon_signed_rank(neg);
            EXPECT_EQ(a.p_value, b.p_value);
            EXPECT_EQ(a.statistic + b.statistic, static_cast<double>(n * (n + 1) / 2));
        }
    }
}

TEST(Wilcoxon, ResultInvariants) {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> g(0.3, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> d(1 + trial % 60);
        for (auto& x : d) x = std::round(g(rng) * 4) / 4;  // induces zeros and ties
        const bool any = std::any_of(d.begin(), d.end(), [](double x) { return x != 0; });
        if (!any) continue;
        const auto r = wilcoxon_signed_rank(d);
        const double n = static_cast<double>(r.n_nonzero);
        EXPECT_GE(r.statistic, 0.0);
        EXPECT_LE(r.statistic, n * (n + 1) / 2);
        EXPECT_GE(r.p_value, 0.0);
        EXPECT_LE(r.p_value, 1.0);
        if (r.method == WilcoxonMethod::Exact) {
            EXPECT_LE(r.n_nonzero, 25u);
        }
    }
}

TEST(Wilcoxon, ExactApproxAgreement) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> pick_n(20, 25);
    double worst = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = pick_n(rng);
        const auto d = oracle::distinct_diffs(n, rng);
        const auto sr = signed_ranks(d);
        const double w = wilcoxon_signed_rank(d).statistic;
        const double exact = exact_signed_rank_p(w, n, Alternative::TwoSided);
        const double approx = approx_signed_rank_p(w, n, sr.tie_term, Alternative::TwoSided);
        worst = std::max(worst, std::fabs(exact - approx));
    }
    EXPECT_LE(worst, 0.01);
}

TEST(Wilcoxon, NullPValuesOnSymmetricNoise) {
    // 1000 seeded trials of n=200 symmetric differences. Under H0 the count
    // of p <= 0.01 is Binomial(1000, 0.01); the fixed seed stream yields at
    // most 10 of them (>= 99% above 0.01).
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    int small = 0;
    std::vector<double> ps;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> d(200);
        for (auto& x : d) x = g(rng);
        const double p = wilcoxon_signed_rank(d).p_value;
        ps.push_back(p);
        if (p <= 0.01) ++small;
    }
    EXPECT_LE(small, 10);
    // uniform-ish: KS distance against U(0,1) below the 1% critical value
    std::sort(ps.begin(), ps.end());
    double ks = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const double n = static_cast<double>(ps.size());
        ks = std::max({ks, std::fabs(ps[i] - static_cast<double>(i) / n),
                       std::fabs(static_cast<double>(i + 1) / n - ps[i])});
    }
    EXPECT_LT(ks, 1.63 / std::sqrt(1000.0));
}

TEST(QuantileBins, OneToHundred) {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    const auto e = quantile_bin_edges(v, 10);
    ASSERT_EQ(e.bin_count, 10u);
    ASSERT_EQ(e.edges.size(), 9u);
    for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(e.edges[k], 10.9 + 9.9 * static_cast<double>(k), 1e-12);
    EXPECT_NEAR(e.edges.back(), 90.1, 1e-12);
}

TEST(QuantileBins, ConstantIsSingleBin) {
    const std::vector<double> v(20, 3.5);
    const auto e = quantile_bin_edges(v, 10);
    EXPECT_EQ(e.bin_count, 1u);
    EXPECT_TRUE(e.edges.empty());
}

TEST(QuantileBins, DuplicateEdgesCollapse) {
    // linear quantiles at k/10: 0 for k<=7, 0.2 at k=8, 0.6 at k=9
    const std::vector<double> v{0, 0, 0, 0, 1};
    const auto e = quantile_bin_edges(v, 10);
    ASSERT_EQ(e.edges.size(), 3u);
    EXPECT_EQ(e.edges[0], 0.0);
    EXPECT_NEAR(e.edges[1], 0.2, 1e-15);
    EXPECT_NEAR(e.edges[2], 0.6, 1e-15);
    EXPECT_EQ(e.bin_count, 4u);
    EXPECT_LT(e.bin_count, 10u);
}

TEST(QuantileBins, EdgesStrictlyAscendingAndBounded) {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> pick(0, 6);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> v(2 + trial % 50);
        for (auto& x : v) x = pick(rng);
        const std::size_t bins = 2 + trial % 12;
        const auto e = quantile_bin_edges(v, bins);
        EXPECT_LE(e.bin_count, bins);
        EXPECT_EQ(e.bin_count, e.edges.size() + 1);
        EXPECT_TRUE(std::adjacent_find(e.edges.begin(), e.edges.end(), std::greater_equal<>()) == e.edges.end());
    }
}

TEST(QuantileBins, ShiftEquivariance) {
    // 41 values on a 0.5 grid with 16 bins: every interpolation weight is a
    // multiple of 1/2, so the arithmetic is exact and the shift must be too
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<int> pick(-50, 50);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(41), s(41);
        const double c = 0.25 * pick(rng);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = 0.5 * pick(rng);
            s[i] = v[i] + c;
        }
        const auto a = quantile_bin_edges(v, 16), b = quantile_bin_edges(s, 16);
        ASSERT_EQ(a.edges.size(), b.edges.size());
        for (std::size_t k = 0; k < a.edges.size(); ++k) EXPECT_EQ(a.edges[k] + c, b.edges[k]);
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(a.bin_of(v[i]), b.bin_of(s[i]));
    }
}

TEST(QuantileBins, ValueOnEdgeGoesLow) {
    BinEdges e{{1.0, 2.0}, 3};
    EXPECT_EQ(e.bin_of(0.5), 0u);
    EXPECT_EQ(e.bin_of(1.0), 0u);
    EXPECT_EQ(e.bin_of(1.5), 1u);
    EXPECT_EQ(e.bin_of(2.0), 1u);
    EXPECT_EQ(e.bin_of(9.0), 2u);
}

TEST(QuantileBins, Preconditions) {
    EXPECT_THROW(quantile_bin_edges(std::vector<double>{}, 10), Error);
    EXPECT_THROW(quantile_bin_edges(std::vector<double>{1, 2}, 1), Error);
}

TEST(MutualInfo, IdenticalConstantIsZero) {
    const std::vector<double> a(50, 1.0), b(50, 1.0);
    const auto r = mutual_information(a, b);
    EXPECT_EQ(r.mi_nats, 0.0);
    EXPECT_EQ(r.bin_count(), 1u);
    EXPECT_EQ(r.n_samples, 100u);
}

TEST(MutualInfo, PerfectSeparationIsLn2) {
    std::vector<double> a(1000), b(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        a[i] = -1.0 - static_cast<double>(i) * 0.001;
        b[i] = 1.0 + static_cast<double>(i) * 0.001;
    }
    EXPECT_NEAR(mutual_information(a, b).mi_nats, std::log(2.0), 1e-9);
}

TEST(MutualInfo, TwoByTwoTable) {
    const std::vector<std::array<std::size_t, 2>> t{{30, 10}, {10, 30}};
    const double mi = mutual_information_from_counts(t);
    EXPECT_NEAR(mi, 0.75 * std::log(1.5) + 0.25 * std::log(0.5), 1e-15);
    EXPECT_NEAR(mi, 0.1308120359, 1e-10);
    EXPECT_NEAR(mi, oracle::direct_mi({{30, 10}, {10, 30}}), 1e-15);
}

TEST(MutualInfo, MatchesDirectFormulaOnRandomTables) {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> pick(0, 40);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t bins = 2 + trial % 9;
        std::vector<std::array<std::size_t, 2>> t(bins);
        std::vector<std::vector<double>> o(bins, std::vector<double>(2));
        for (std::size_t i = 0; i < bins; ++i)
            for (std::size_t j = 0; j < 2; ++j) o[i][j] = static_cast<double>(t[i][j] = pick(rng));
        t[0][0] += 1;
        t[0][1] += 1;
        o[0][0] += 1;
        o[0][1] += 1;
        const double mi = mutual_information_from_counts(t);
        EXPECT_NEAR(mi, oracle::direct_mi(o), 1e-12);
        EXPECT_GE(mi, 0.0);
        EXPECT_LE(mi, std::log(2.0) + 1e-12);
    }
}

TEST(MutualInfo, CountsConsistent) {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> g;
    std::vector<double> a(300), b(300);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng) + 0.5;
    const auto r = mutual_information(a, b, 10);
    std::size_t total = 0, lab0 = 0;
    for (const auto& row : r.joint_counts) {
        total += row[0] + row[1];
        lab0 += row[0];
    }
    EXPECT_EQ(total, r.n_samples);
    EXPECT_EQ(lab0, 300u);
    EXPECT_LE(r.mi_nats, std::min(std::log(static_cast<double>(r.bin_count())), std::log(2.0)) + 1e-12);
}

TEST(MutualInfo, ShuffledLabelsNearZero) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> g;
    int below = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> pooled(4000);
        for (auto& x : pooled) x = g(rng) + (&x < pooled.data() + 2000 ? 0.0 : 1.0);
        std::shuffle(pooled.begin(), pooled.end(), rng);
        const std::vector<double> a(pooled.begin(), pooled.begin() + 2000), b(pooled.begin() + 2000, pooled.end());
        if (mutual_information(a, b).mi_nats < 0.01) ++below;
    }
    EXPECT_GE(below, 99);
}

TEST(MutualInfo, Preconditions) {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    try {
        mutual_information(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
    }
    EXPECT_THROW(mutual_information(std::vector<double>{1}, std::vector<double>{2}), Error);
}

TEST(MinMax, Examples) {
    EXPECT_EQ(min_max_scale(std::vector<double>{2, 4, 6}), (std::vector<double>{0, 0.5, 1}));
    EXPECT_EQ(min_max_scale(std::vector<double>{5, 5, 5}), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(min_max_scale(std::vector<double>{-1, 0, 3}), (std::vector<double>{0, 0.25, 1}));
}

TEST(MinMax, IdempotentAndAffineInvariant) {
    std::mt19937_64 rng(43);
    std::uniform_int_distribution<int> pick(-20, 20);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(10), t(10);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = pick(rng);
            t[i] = 4.0 * v[i] + 8.0;  // exact in binary
        }
        const auto s = min_max_scale(v);
        EXPECT_EQ(min_max_scale(s), s);
        EXPECT_EQ(min_max_scale(t), s);
    }
}

TEST(MinMax, NonFiniteRejected) {
    EXPECT_THROW(min_max_scale(std::vector<double>{1, INFINITY}), Error);
}
