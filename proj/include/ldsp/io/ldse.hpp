#pragma once

// LDSE v1, the paired-embedding interchange format:
//
//   offset  size  field
//   0       4     magic "LDSE"
//   4       1     version (0x01)
//   5       4     N, u32 little-endian
//   9       4     dim, u32 little-endian
//   13      4     metadata length M, u32 little-endian
//   17      M     UTF-8 JSON {model_tag, property, source_hash, pooling, layer}
//   17+M    ...   N records of 2*dim float32 little-endian (s1 row, then s2 row)
//
// The file ends exactly after the last record.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ldsp/error.hpp"
#include "ldsp/io/files.hpp"
#include "ldsp/pair_set.hpp"

namespace ldsp::io {

inline constexpr std::string_view kLdseMagic = "LDSE";
inline constexpr std::uint8_t kLdseVersion = 0x01;
inline constexpr std::size_t kLdseHeaderSize = 17;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + k])) << (8 * k);
    return v;
}

inline void put_row(std::string& out, const EmbeddingMatrix& m, Eigen::Index row) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_u32(out, std::bit_cast<std::uint32_t>(m(row, j)));
}

}  // namespace detail

inline nlohmann::json ldse_metadata(const EmbeddingPairSet& set) {
    return {{"model_tag", set.model_tag},
            {"property", set.property},
            {"source_hash", set.source_hash},
            {"pooling", set.pooling},
            {"layer", set.layer}};
}

inline std::string encode_ldse(const EmbeddingPairSet& set) {
    if (set.s1.rows() != set.s2.rows() || set.s1.cols() != set.s2.cols())
        throw Error(ErrorCode::ShapeMismatch, "encode_ldse: s1 and s2 shapes differ");
    if (set.s1.rows() < 1 || set.s1.cols() < 1) throw Error(ErrorCode::ShapeMismatch, "encode_ldse: empty set");
    constexpr auto u32_max = static_cast<Eigen::Index>(std::numeric_limits<std::uint32_t>::max());
    if (set.s1.rows() > u32_max || set.s1.cols() > u32_max)
        throw Error(ErrorCode::ShapeMismatch, "encode_ldse: shape exceeds u32 range");
    const std::string meta = ldse_metadata(set).dump();
    std::string out;
    out.reserve(kLdseHeaderSize + meta.size() +
                static_cast<std::size_t>(set.s1.rows() * set.s1.cols()) * 2 * sizeof(float));
    out.append(kLdseMagic);
    out.push_back(static_cast<char>(kLdseVersion));
    detail::put_u32(out, static_cast<std::uint32_t>(set.s1.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(set.s1.cols()));
    detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.append(meta);
    for (Eigen::Index i = 0; i < set.s1.rows(); ++i) {
        detail::put_row(out, set.s1, i);
        detail::put_row(out, set.s2, i);
    }
    return out;
}

inline EmbeddingPairSet decode_ldse(std::string_view bytes) {
    if (bytes.size() < kLdseMagic.size() || bytes.substr(0, 4) != kLdseMagic) {
        if (bytes.size() < kLdseMagic.size() && kLdseMagic.substr(0, bytes.size()) == bytes)
            throw Error(ErrorCode::TruncatedFile, "file ends inside the magic");
        throw Error(ErrorCode::BadMagic, "missing LDSE magic");
    }
    if (bytes.size() < 5) throw Error(ErrorCode::TruncatedFile, "file ends before the version byte");
    const auto version = static_cast<std::uint8_t>(bytes[4]);
    if (version != kLdseVersion)
        throw Error(ErrorCode::UnsupportedVersion, "LDSE version " + std::to_string(version) + " is not supported");
    if (bytes.size() < kLdseHeaderSize) throw Error(ErrorCode::TruncatedFile, "file ends inside the header");
    const std::uint64_t n = detail::get_u32(bytes, 5);
    const std::uint64_t dim = detail::get_u32(bytes, 9);
    const std::uint64_t meta_len = detail::get_u32(bytes, 13);
    if (n == 0 || dim == 0)
        throw Error(ErrorCode::ShapeMismatch, "header declares an empty set (N=" + std::to_string(n) +
                                                  ", dim=" + std::to_string(dim) + ")");
    if (bytes.size() < kLdseHeaderSize + meta_len) throw Error(ErrorCode::TruncatedFile, "file ends inside metadata");
    const std::uint64_t payload = n * dim * 2 * sizeof(float);
    const std::uint64_t expected = kLdseHeaderSize + meta_len + payload;
    if (bytes.size() < expected)
        throw Error(ErrorCode::TruncatedFile, "expected " + std::to_string(expected) + " bytes, found " +
                                                  std::to_string(bytes.size()));
    if (bytes.size() > expected)
        throw Error(ErrorCode::ShapeMismatch, std::to_string(bytes.size() - expected) +
                                                  " trailing bytes after the declared " + std::to_string(n) + "x" +
                                                  std::to_string(dim) + " records");

    EmbeddingPairSet set;
    try {
        const auto meta = nlohmann::json::parse(bytes.substr(kLdseHeaderSize, meta_len));
        set.model_tag = meta.at("model_tag").get<std::string>();
        set.property = meta.at("property").get<std::string>();
        set.source_hash = meta.at("source_hash").get<std::string>();
        set.pooling = meta.at("pooling").get<std::string>();
        set.layer = meta.at("layer").is_string() ? meta.at("layer").get<std::string>() : meta.at("layer").dump();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedMetadata, std::string("metadata: ") + e.what());
    }

    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(dim);
    set.s1.resize(rows, cols);
    set.s2.resize(rows, cols);
    std::size_t at = kLdseHeaderSize + meta_len;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j, at += 4) set.s1(i, j) = std::bit_cast<float>(detail::get_u32(bytes, at));
        for (Eigen::Index j = 0; j < cols; ++j, at += 4) set.s2(i, j) = std::bit_cast<float>(detail::get_u32(bytes, at));
    }
    return set;
}

inline void write_ldse(const std::filesystem::path& path, const EmbeddingPairSet& set) {
    write_file(path, encode_ldse(set));
}

inline EmbeddingPairSet read_ldse(const std::filesystem::path& path) {
    try {
        return decode_ldse(read_file(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoError) throw;
        throw Error(e.code(), path.string() + ": " + e.message());
    }
}

}  // namespace ldsp::io
