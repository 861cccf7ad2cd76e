#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "ldsp/error.hpp"

namespace ldsp {

/// Row-major float32 storage, one sentence embedding per row.
using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One linguistically distinct sentence pair: sentence1 is the base form,
/// sentence2 the transformed form.
struct LdspRecord {
    std::string property;
    std::string sentence1;
    std::string sentence2;

    friend bool operator==(const LdspRecord&, const LdspRecord&) = default;
};

/// N aligned pairs of dim-dimensional embeddings for one property.
struct EmbeddingPairSet {
    std::string model_tag;
    std::string property;
    std::string source_hash;
    std::string pooling = "mean";
    std::string layer = "final";
    EmbeddingMatrix s1;
    EmbeddingMatrix s2;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(s1.rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(s1.cols()); }

    void validate() const {
        if (s1.rows() != s2.rows() || s1.cols() != s2.cols())
            throw Error(ErrorCode::ShapeMismatch, "pair set '" + property + "': s1 is " + std::to_string(s1.rows()) +
                                                      "x" + std::to_string(s1.cols()) + ", s2 is " +
                                                      std::to_string(s2.rows()) + "x" + std::to_string(s2.cols()));
        if (s1.rows() < 1 || s1.cols() < 1)
            throw Error(ErrorCode::ShapeMismatch, "pair set '" + property + "' is empty");
        if (!s1.allFinite() || !s2.allFinite())
            throw Error(ErrorCode::NonFiniteInput, "pair set '" + property + "' contains non-finite values");
    }

    friend bool operator==(const EmbeddingPairSet& a, const EmbeddingPairSet& b) {
        return a.model_tag == b.model_tag && a.property == b.property && a.source_hash == b.source_hash &&
               a.pooling == b.pooling && a.layer == b.layer && a.s1.rows() == b.s1.rows() &&
               a.s1.cols() == b.s1.cols() && a.s2.rows() == b.s2.rows() && a.s2.cols() == b.s2.cols() &&
               a.s1 == b.s1 && a.s2 == b.s2;
    }
};

}  // namespace ldsp
