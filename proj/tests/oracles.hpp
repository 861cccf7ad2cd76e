#pragma once

// Independent reference implementations used by the tests and the acceptance
// binary. Kept deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

namespace oracle {

// Average ranks of |x| over nonzero entries, O(n^2) counting.
inline std::vector<double> naive_ranks(const std::vector<double>& nonzero) {
    std::vector<double> r(nonzero.size());
    for (std::size_t i = 0; i < nonzero.size(); ++i) {
        double less = 0, equal = 0;
        for (double v : nonzero) {
            if (std::fabs(v) < std::fabs(nonzero[i])) less += 1;
            else if (std::fabs(v) == std::fabs(nonzero[i])) equal += 1;
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

struct BruteWilcoxon {
    double w = 0;
    double p_two_sided = 1;
    double p_greater = 1;
    double p_less = 1;
};

// Enumerates all 2^n sign assignments of the observed ranks.
inline BruteWilcoxon brute_force_wilcoxon(const std::vector<double>& diff) {
    std::vector<double> nz;
    for (double v : diff)
        if (v != 0.0) nz.push_back(v);
    const auto ranks = naive_ranks(nz);
    BruteWilcoxon out;
    for (std::size_t i = 0; i < nz.size(); ++i)
        if (nz[i] > 0) out.w += ranks[i];
    const std::uint64_t total = std::uint64_t{1} << nz.size();
    std::uint64_t ge = 0, le = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        double s = 0;
        for (std::size_t i = 0; i < nz.size(); ++i)
            if (mask >> i & 1u) s += ranks[i];
        if (s >= out.w - 1e-9) ++ge;
        if (s <= out.w + 1e-9) ++le;
    }
    out.p_greater = static_cast<double>(ge) / static_cast<double>(total);
    out.p_less = static_cast<double>(le) / static_cast<double>(total);
    out.p_two_sided = std::min(1.0, 2.0 * std::min(out.p_greater, out.p_less));
    return out;
}

// Plug-in MI from joint counts, written against the textbook formula.
inline double direct_mi(const std::vector<std::vector<double>>& joint) {
    double n = 0;
    for (const auto& row : joint)
        for (double c : row) n += c;
    std::vector<double> px(joint.size(), 0), py(joint.empty() ? 0 : joint[0].size(), 0);
    for (std::size_t i = 0; i < joint.size(); ++i)
        for (std::size_t j = 0; j < joint[i].size(); ++j) {
            px[i] += joint[i][j] / n;
            py[j] += joint[i][j] / n;
        }
    double mi = 0;
    for (std::size_t i = 0; i < joint.size(); ++i)
        for (std::size_t j = 0; j < joint[i].size(); ++j) {
            const double pxy = joint[i][j] / n;
            if (pxy > 0) mi += pxy * std::log(pxy / (px[i] * py[j]));
        }
    return mi;
}

// Tie-free random differences with distinct magnitudes.
inline std::vector<double> distinct_diffs(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> mags(n);
    for (std::size_t i = 0; i < n; ++i) mags[i] = static_cast<double>(i + 1) + 0.25;
    std::shuffle(mags.begin(), mags.end(), rng);
    std::bernoulli_distribution coin(0.5);
    for (auto& m : mags)
        if (coin(rng)) m = -m;
    return mags;
}

}  // namespace oracle
