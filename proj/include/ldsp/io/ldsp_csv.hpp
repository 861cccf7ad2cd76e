#pragma once

// LDSP pair files: one `<property>.csv` per property with a
// `sentence1,sentence2` header, an optional `property` column and an optional
// leading index column (as written by pandas). Quoting follows RFC 4180.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ldsp/error.hpp"
#include "ldsp/io/files.hpp"
#include "ldsp/pair_set.hpp"
#include "ldsp/properties.hpp"

namespace ldsp::io {

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the row starts
    std::string raw;       // source text of the row, without the terminator
};

/// Splits RFC 4180 text into rows. Quoted fields may contain commas, doubled
/// quotes and line breaks; blank lines are skipped. Throws MalformedCsv on an
/// unterminated quote or stray characters after a closing quote.
inline std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::size_t i = 0;
    std::size_t line = 1;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    while (i < text.size()) {
        CsvRow row;
        row.line = line;
        const std::size_t row_start = i;
        std::string field;
        bool row_done = false;
        while (!row_done) {
            field.clear();
            if (i < text.size() && text[i] == '"') {
                ++i;
                for (;;) {
                    if (i >= text.size())
                        throw Error(ErrorCode::MalformedCsv,
                                    "line " + std::to_string(row.line) + ": unterminated quoted field");
                    const char c = text[i++];
                    if (c == '"') {
                        if (i < text.size() && text[i] == '"') {
                            field.push_back('"');
                            ++i;
                        } else {
                            break;
                        }
                    } else {
                        if (c == '\n') ++line;
                        field.push_back(c);
                    }
                }
                if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
                    throw Error(ErrorCode::MalformedCsv,
                                "line " + std::to_string(line) + ": unexpected character after closing quote");
            } else {
                while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
                    if (text[i] == '"')
                        throw Error(ErrorCode::MalformedCsv,
                                    "line " + std::to_string(line) + ": quote inside unquoted field");
                    field.push_back(text[i++]);
                }
            }
            row.fields.push_back(field);
            if (i < text.size() && text[i] == ',') {
                ++i;
            } else {
                row_done = true;
            }
        }
        const std::size_t row_end = i;
        if (i < text.size() && text[i] == '\r') ++i;
        if (i < text.size() && text[i] == '\n') {
            ++i;
            ++line;
        }
        row.raw = std::string(text.substr(row_start, row_end - row_start));
        const bool blank = row.fields.size() == 1 && row.fields[0].empty() && row.raw.empty();
        if (!blank) rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace detail {

inline std::string lower_trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

}  // namespace detail

struct LdspCsvInfo {
    bool index_column_detected = false;
    bool property_column = false;
};

/// Parses LDSP CSV text. `default_property` applies when there is no property
/// column (normally the file stem).
inline std::vector<LdspRecord> parse_ldsp_csv(std::string_view text, std::string_view default_property,
                                              LdspCsvInfo* info = nullptr) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorCode::EmptyFile, "no rows");
    const auto& header = rows.front();
    std::optional<std::size_t> c1, c2, cp;
    for (std::size_t k = 0; k < header.fields.size(); ++k) {
        const auto name = detail::lower_trim(header.fields[k]);
        if (name == "sentence1" && !c1) c1 = k;
        else if (name == "sentence2" && !c2) c2 = k;
        else if (name == "property" && !cp) cp = k;
    }
    if (!c1 || !c2)
        throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(header.line) +
                                                 ": header must contain sentence1 and sentence2 columns");
    bool index_col = false;
    for (std::size_t k = 0; k < header.fields.size(); ++k) {
        if (k == *c1 || k == *c2 || (cp && k == *cp)) continue;
        if (k == 0) {
            index_col = true;
            continue;
        }
        throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(header.line) + ": unexpected column '" +
                                                 header.fields[k] + "'");
    }
    if (info) {
        info->index_column_detected = index_col;
        info->property_column = cp.has_value();
    }
    if (!cp) require_property(default_property);

    std::vector<LdspRecord> out;
    out.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != header.fields.size())
            throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(row.line) + ": expected " +
                                                     std::to_string(header.fields.size()) + " fields, found " +
                                                     std::to_string(row.fields.size()));
        LdspRecord rec;
        rec.sentence1 = row.fields[*c1];
        rec.sentence2 = row.fields[*c2];
        if (rec.sentence1.empty() || rec.sentence2.empty())
            throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(row.line) + ": empty sentence");
        rec.property = cp ? detail::lower_trim(row.fields[*cp]) : std::string(default_property);
        require_property(rec.property);
        out.push_back(std::move(rec));
    }
    return out;
}

/// Reads `<property>.csv`; the property comes from the file stem unless the
/// file carries a property column.
inline std::vector<LdspRecord> read_ldsp_csv(const std::filesystem::path& path, LdspCsvInfo* info = nullptr) {
    const std::string text = read_file(path);
    if (text.find_first_not_of(" \t\r\n\xEF\xBB\xBF") == std::string::npos)
        throw Error(ErrorCode::EmptyFile, "'" + path.string() + "' is empty");
    try {
        return parse_ldsp_csv(text, path.stem().string(), info);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.message());
    }
}

inline std::string format_ldsp_csv(const std::vector<LdspRecord>& records, bool with_property = false) {
    std::string out = with_property ? "sentence1,sentence2,property\n" : "sentence1,sentence2\n";
    for (const auto& r : records) {
        out += csv_escape(r.sentence1);
        out += ',';
        out += csv_escape(r.sentence2);
        if (with_property) {
            out += ',';
            out += csv_escape(r.property);
        }
        out += '\n';
    }
    return out;
}

inline void write_ldsp_csv(const std::filesystem::path& path, const std::vector<LdspRecord>& records,
                           bool with_property = false) {
    write_file(path, format_ldsp_csv(records, with_property));
}

}  // namespace ldsp::io
