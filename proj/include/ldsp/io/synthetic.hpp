#pragma once

// Planted-signal pair sets: s1 ~ N(0, noise_std^2) per coordinate and
// s2 = s1 + N(0, noise_std^2) + shift on planted dimensions. The generator is
// the ground truth for pipeline tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldsp/error.hpp"
#include "ldsp/pair_set.hpp"

namespace ldsp::io {

struct PlantedDim {
    std::size_t dimension = 0;
    double shift = 0.0;

    friend bool operator==(const PlantedDim&, const PlantedDim&) = default;
};

struct SyntheticSpec {
    std::size_t n_pairs = 1000;
    std::size_t dim = 64;
    std::vector<PlantedDim> planted;
    double noise_std = 1.0;
    std::uint64_t seed = 0;
    std::string property = "synthetic";
    std::string model_tag = "synthetic";

    void validate() const {
        if (n_pairs < 1 || dim < 1) throw Error(ErrorCode::InvalidArgument, "SyntheticSpec: n_pairs and dim must be >= 1");
        if (!(noise_std > 0.0) || !std::isfinite(noise_std))
            throw Error(ErrorCode::InvalidArgument, "SyntheticSpec: noise_std must be positive");
        std::set<std::size_t> seen;
        for (const auto& p : planted) {
            if (p.dimension >= dim)
                throw Error(ErrorCode::InvalidArgument, "SyntheticSpec: planted dimension " +
                                                            std::to_string(p.dimension) + " >= dim");
            if (!seen.insert(p.dimension).second)
                throw Error(ErrorCode::InvalidArgument, "SyntheticSpec: planted dimension " +
                                                            std::to_string(p.dimension) + " listed twice");
            if (!std::isfinite(p.shift)) throw Error(ErrorCode::InvalidArgument, "SyntheticSpec: non-finite shift");
        }
    }
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    nlohmann::json planted = nlohmann::json::array();
    for (const auto& p : s.planted) planted.push_back({{"dimension", p.dimension}, {"shift", p.shift}});
    j = {{"n_pairs", s.n_pairs}, {"dim", s.dim},           {"planted", planted},       {"noise_std", s.noise_std},
         {"seed", s.seed},       {"property", s.property}, {"model_tag", s.model_tag}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s = SyntheticSpec{};
    s.n_pairs = j.at("n_pairs").get<std::size_t>();
    s.dim = j.at("dim").get<std::size_t>();
    s.noise_std = j.value("noise_std", 1.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.property = j.value("property", std::string("synthetic"));
    s.model_tag = j.value("model_tag", std::string("synthetic"));
    if (j.contains("planted")) {
        for (const auto& p : j.at("planted")) {
            // accepts {"dimension": i, "shift": s} or [i, s]
            if (p.is_array())
                s.planted.push_back({p.at(0).get<std::size_t>(), p.at(1).get<double>()});
            else
                s.planted.push_back({p.at("dimension").get<std::size_t>(), p.at("shift").get<double>()});
        }
    }
}

namespace detail {

/// Box-Muller on mt19937_64 output, so streams match across standard
/// libraries (std::normal_distribution is implementation-defined).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        constexpr double two_pi = 6.283185307179586476925;
        // (0, 1] so the log is finite
        const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(two_pi * u2);
        has_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace detail

inline EmbeddingPairSet generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<double> shift(spec.dim, 0.0);
    for (const auto& p : spec.planted) shift[p.dimension] = p.shift;

    detail::GaussianStream g(spec.seed);
    EmbeddingPairSet set;
    set.model_tag = spec.model_tag;
    set.property = spec.property;
    set.source_hash = "synthetic:seed=" + std::to_string(spec.seed);
    set.pooling = "none";
    set.layer = "none";
    const auto n = static_cast<Eigen::Index>(spec.n_pairs);
    const auto d = static_cast<Eigen::Index>(spec.dim);
    set.s1.resize(n, d);
    set.s2.resize(n, d);
    std::vector<double> base(spec.n_pairs * spec.dim);
    for (auto& v : base) v = spec.noise_std * g.next();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double b = base[static_cast<std::size_t>(i * d + j)];
            set.s1(i, j) = static_cast<float>(b);
            set.s2(i, j) = static_cast<float>(b + spec.noise_std * g.next() + shift[static_cast<std::size_t>(j)]);
        }
    }
    return set;
}

}  // namespace ldsp::io
