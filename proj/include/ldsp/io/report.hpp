#pragma once

// JSON and CSV serialization of analysis and evaluation reports. The JSON
// layout is documented in docs/report-schema.md.

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ldsp/edi.hpp"
#include "ldsp/error.hpp"
#include "ldsp/evaluation.hpp"
#include "ldsp/io/files.hpp"

namespace ldsp::io {

inline constexpr int kReportSchemaVersion = 1;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string alternative_name(stats::Alternative a) {
    switch (a) {
        case stats::Alternative::Greater: return "greater";
        case stats::Alternative::Less: return "less";
        case stats::Alternative::TwoSided: break;
    }
    return "two-sided";
}

inline stats::Alternative parse_alternative(const std::string& s) {
    if (s == "two-sided") return stats::Alternative::TwoSided;
    if (s == "greater") return stats::Alternative::Greater;
    if (s == "less") return stats::Alternative::Less;
    throw Error(ErrorCode::MalformedReport, "unknown alternative '" + s + "'");
}

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedReport, std::string(what) + ": " + e.what());
    }
}

}  // namespace detail

inline nlohmann::json to_json(const edi::EdiConfig& c) {
    return {{"w1", c.w1},
            {"w2", c.w2},
            {"w3", c.w3},
            {"bins", c.bins},
            {"keep_count", c.keep_count},
            {"p_floor", c.p_floor},
            {"edi_threshold", c.edi_threshold},
            {"rfe_step_fraction", c.rfe_step_fraction},
            {"l2_lambda", c.l2_lambda},
            {"exact_threshold", c.wilcoxon.exact_threshold},
            {"alternative", detail::alternative_name(c.wilcoxon.alternative)}};
}

inline edi::EdiConfig edi_config_from_json(const nlohmann::json& j) {
    edi::EdiConfig c;
    c.w1 = j.at("w1").get<double>();
    c.w2 = j.at("w2").get<double>();
    c.w3 = j.at("w3").get<double>();
    c.bins = j.at("bins").get<std::size_t>();
    c.keep_count = j.at("keep_count").get<std::size_t>();
    c.p_floor = j.at("p_floor").get<double>();
    c.edi_threshold = j.at("edi_threshold").get<double>();
    c.rfe_step_fraction = j.at("rfe_step_fraction").get<double>();
    c.l2_lambda = j.at("l2_lambda").get<double>();
    c.wilcoxon.exact_threshold = j.at("exact_threshold").get<std::size_t>();
    c.wilcoxon.alternative = detail::parse_alternative(j.at("alternative").get<std::string>());
    return c;
}

inline nlohmann::json to_json(const edi::PropertyReport& r) {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : r.dims) {
        dims.push_back({{"dimension", d.dimension},
                        {"p_value", d.p_value},
                        {"mi", d.mi},
                        {"rfe_weight", d.rfe_weight},
                        {"neg_log_p_scaled", d.neg_log_p_scaled},
                        {"mi_scaled", d.mi_scaled},
                        {"rfe_weight_scaled", d.rfe_weight_scaled},
                        {"edi", d.edi}});
    }
    return {{"kind", "property_report"},
            {"schema_version", kReportSchemaVersion},
            {"property", r.property},
            {"model_tag", r.model_tag},
            {"n_pairs", r.n_pairs},
            {"config", to_json(r.config)},
            {"dims", dims},
            {"relevant_dims", r.relevant_dims},
            {"rfe_selected", r.rfe_selected},
            {"warnings", r.warnings}};
}

inline edi::PropertyReport property_report_from_json(const nlohmann::json& j) {
    return detail::guarded("property report", [&] {
        if (j.at("kind").get<std::string>() != "property_report")
            throw Error(ErrorCode::MalformedReport, "not a property report");
        edi::PropertyReport r;
        r.property = j.at("property").get<std::string>();
        r.model_tag = j.at("model_tag").get<std::string>();
        r.n_pairs = j.at("n_pairs").get<std::size_t>();
        r.config = edi_config_from_json(j.at("config"));
        for (const auto& d : j.at("dims")) {
            edi::DimensionAnalysis a;
            a.dimension = d.at("dimension").get<std::size_t>();
            a.p_value = d.at("p_value").get<double>();
            a.mi = d.at("mi").get<double>();
            a.rfe_weight = d.at("rfe_weight").get<double>();
            a.neg_log_p_scaled = d.at("neg_log_p_scaled").get<double>();
            a.mi_scaled = d.at("mi_scaled").get<double>();
            a.rfe_weight_scaled = d.at("rfe_weight_scaled").get<double>();
            a.edi = d.at("edi").get<double>();
            r.dims.push_back(a);
        }
        r.relevant_dims = j.at("relevant_dims").get<std::vector<std::size_t>>();
        r.rfe_selected = j.at("rfe_selected").get<std::vector<std::size_t>>();
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    });
}

inline nlohmann::json to_json(const eval::EvaluationReport& r) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.high_edi_curve) curve.push_back({{"k", p.k}, {"accuracy", p.accuracy}});
    nlohmann::json cross = nlohmann::json::object();
    for (const auto& [name, acc] : r.cross_property) cross[name] = acc;
    return {{"kind", "evaluation_report"},
            {"schema_version", kReportSchemaVersion},
            {"property", r.property},
            {"model_tag", r.model_tag},
            {"seed", r.seed},
            {"n_train_pairs", r.n_train_pairs},
            {"n_test_pairs", r.n_test_pairs},
            {"stop_ratio", r.stop_ratio},
            {"baseline_accuracy", r.baseline_accuracy},
            {"high_edi_curve", curve},
            {"k_at_95", r.k_at_95},
            {"reached", r.reached},
            {"bottom_k", r.bottom_k},
            {"low_edi_accuracy", r.low_edi_accuracy},
            {"cross_k", r.cross_k},
            {"cross_property", cross}};
}

inline eval::EvaluationReport evaluation_report_from_json(const nlohmann::json& j) {
    return detail::guarded("evaluation report", [&] {
        if (j.at("kind").get<std::string>() != "evaluation_report")
            throw Error(ErrorCode::MalformedReport, "not an evaluation report");
        eval::EvaluationReport r;
        r.property = j.at("property").get<std::string>();
        r.model_tag = j.at("model_tag").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.n_train_pairs = j.at("n_train_pairs").get<std::size_t>();
        r.n_test_pairs = j.at("n_test_pairs").get<std::size_t>();
        r.stop_ratio = j.at("stop_ratio").get<double>();
        r.baseline_accuracy = j.at("baseline_accuracy").get<double>();
        for (const auto& p : j.at("high_edi_curve"))
            r.high_edi_curve.push_back({p.at("k").get<std::size_t>(), p.at("accuracy").get<double>()});
        r.k_at_95 = j.at("k_at_95").get<std::size_t>();
        r.reached = j.at("reached").get<bool>();
        r.bottom_k = j.at("bottom_k").get<std::size_t>();
        r.low_edi_accuracy = j.at("low_edi_accuracy").get<double>();
        r.cross_k = j.at("cross_k").get<std::size_t>();
        for (const auto& [name, acc] : j.at("cross_property").items()) r.cross_property[name] = acc.get<double>();
        return r;
    });
}

inline nlohmann::json to_json(const eval::LpClassifierResult& r) {
    return {{"kind", "lp_classifier"},
            {"schema_version", kReportSchemaVersion},
            {"accuracy", r.accuracy},
            {"n_train", r.n_train},
            {"n_test", r.n_test},
            {"converged", r.converged},
            {"labels", r.confusion.labels},
            {"confusion", r.confusion.counts}};
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_report_json(const std::filesystem::path& path, const edi::PropertyReport& r) {
    write_file(path, dump_json(to_json(r)));
}

inline void write_report_json(const std::filesystem::path& path, const eval::EvaluationReport& r) {
    write_file(path, dump_json(to_json(r)));
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedReport, path.string() + ": " + e.what());
    }
}

inline edi::PropertyReport read_property_report(const std::filesystem::path& path) {
    try {
        return property_report_from_json(read_json_file(path));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedReport) throw;
        throw Error(e.code(), path.string() + ": " + e.message());
    }
}

/// `dimension,p_value,mi,rfe_weight,edi`, one row per dimension in report
/// order (edi descending), floats with 17 significant digits.
inline std::string format_report_csv(const edi::PropertyReport& r) {
    std::string out = "dimension,p_value,mi,rfe_weight,edi\n";
    for (const auto& d : r.dims) {
        out += std::to_string(d.dimension);
        out += ',' + format_double(d.p_value);
        out += ',' + format_double(d.mi);
        out += ',' + format_double(d.rfe_weight);
        out += ',' + format_double(d.edi);
        out += '\n';
    }
    return out;
}

inline void write_report_csv(const std::filesystem::path& path, const edi::PropertyReport& r) {
    write_file(path, format_report_csv(r));
}

/// `k,accuracy` rows of the high-EDI curve.
inline std::string format_report_csv(const eval::EvaluationReport& r) {
    std::string out = "k,accuracy\n";
    for (const auto& p : r.high_edi_curve) out += std::to_string(p.k) + ',' + format_double(p.accuracy) + '\n';
    return out;
}

inline void write_report_csv(const std::filesystem::path& path, const eval::EvaluationReport& r) {
    write_file(path, format_report_csv(r));
}

}  // namespace ldsp::io
