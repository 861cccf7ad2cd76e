// ldsp: command-line driver for the EDI analysis pipeline.
//
//   ldsp analyze  --embeddings <dir|file.ldse> --out <dir>
//   ldsp evaluate --embeddings <dir|file.ldse> --edi <dir|report.json> --out <dir>
//   ldsp classify --embeddings <dir> --out <dir>
//   ldsp synth    --spec <spec.json> --out <file.ldse>
//   ldsp gen      --property P --endpoint URL --model M --out <dir>
//
// Exit codes: 0 ok, 1 usage/config, 2 I/O, 3 degenerate data, 4 missing API key.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldsp/dataset_gen.hpp"
#include "ldsp/edi.hpp"
#include "ldsp/error.hpp"
#include "ldsp/evaluation.hpp"
#include "ldsp/http_transport.hpp"
#include "ldsp/io/files.hpp"
#include "ldsp/io/hash.hpp"
#include "ldsp/io/ldse.hpp"
#include "ldsp/io/report.hpp"
#include "ldsp/io/svg.hpp"
#include "ldsp/io/synthetic.hpp"

#ifndef LDSP_VERSION
#define LDSP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using ldsp::Error;
using ldsp::ErrorCode;

namespace {

// Accepts JSON objects as well as TOML. Nested objects map to subcommand
// sections, e.g. {"seed": 3, "analyze": {"bins": 12}}.
class JsonOrTomlConfig : public CLI::ConfigTOML {
public:
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::stringstream buf;
        buf << input.rdbuf();
        const std::string text = buf.str();
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string::npos || text[first] != '{') {
            std::istringstream again(text);
            return CLI::ConfigTOML::from_config(again);
        }
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        std::vector<CLI::ConfigItem> items;
        flatten(j, {}, items);
        return items;
    }

private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : obj.items()) {
            if (value.is_object()) {
                auto p = parents;
                p.push_back(key);
                flatten(value, p, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array())
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(value));
            out.push_back(std::move(item));
        }
    }
};

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::AuthMissing: return 4;
        case ErrorCode::DegenerateReport:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::DegenerateDistribution:
        case ErrorCode::AllZeroDifferences:
        case ErrorCode::SingleClassInput:
        case ErrorCode::TooFewPairs:
        case ErrorCode::NonFiniteInput: return 3;
        case ErrorCode::InvalidArgument:
        case ErrorCode::UnknownProperty: return 1;
        default: return 2;
    }
}

void info(const std::string& msg) { std::cerr << "ldsp: " << msg << "\n"; }
void warn(const std::string& msg) { std::cerr << "ldsp: warning: " << msg << "\n"; }

struct Global {
    std::uint64_t seed = 0;
    std::string out = ".";
    std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
    std::string config_path;
};

struct Input {
    fs::path path;
    std::string sha256;
};

/// Sorted *.ldse files of a directory, or the file itself.
std::vector<fs::path> ldse_inputs(const fs::path& p) {
    std::error_code ec;
    if (!fs::exists(p, ec)) throw Error(ErrorCode::IoError, "'" + p.string() + "' does not exist");
    if (!fs::is_directory(p, ec)) return {p};
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".ldse") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error(ErrorCode::IoError, "no .ldse files in '" + p.string() + "'");
    return out;
}

struct LoadedSet {
    Input input;
    ldsp::EmbeddingPairSet set;
};

std::vector<LoadedSet> load_sets(const fs::path& p) {
    std::vector<LoadedSet> out;
    std::map<std::string, fs::path> seen;
    for (const auto& f : ldse_inputs(p)) {
        LoadedSet s;
        s.input = {f, ldsp::io::sha256_file(f)};
        s.set = ldsp::io::read_ldse(f);
        const auto [it, fresh] = seen.emplace(s.set.property, f);
        if (!fresh)
            throw Error(ErrorCode::InvalidArgument, "'" + f.string() + "' and '" + it->second.string() +
                                                        "' both hold property '" + s.set.property + "'");
        out.push_back(std::move(s));
    }
    return out;
}

/// Wraps errors from one input so the message names the file.
template <typename Fn>
auto for_file(const fs::path& f, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.message().find(f.string()) != std::string::npos) throw;
        throw Error(e.code(), f.string() + ": " + e.message());
    }
}

void write_manifest(const fs::path& dir, const std::string& command, const Global& g, const json& config,
                    const std::vector<Input>& inputs, const std::vector<std::string>& outputs) {
    json in = json::array();
    for (const auto& i : inputs) in.push_back({{"path", i.path.generic_string()}, {"sha256", i.sha256}});
    json m{{"tool", "ldsp"},
           {"version", LDSP_VERSION},
           {"command", command},
           {"seed", g.seed},
           {"config", config},
           {"inputs", in},
           {"outputs", outputs}};
    if (!g.config_path.empty())
        m["config_file"] = {{"path", fs::path(g.config_path).generic_string()},
                            {"sha256", ldsp::io::sha256_file(g.config_path)}};
    ldsp::io::write_file(dir / "run-manifest.json", ldsp::io::dump_json(m));
}

// ---- analyze ----

struct AnalyzeArgs {
    std::string embeddings;
    ldsp::edi::EdiConfig config;
    std::string alternative = "two-sided";
};

int run_analyze(const Global& g, AnalyzeArgs a) {
    a.config.wilcoxon.alternative = ldsp::io::detail::parse_alternative(a.alternative);
    a.config.validate();
    const fs::path out(g.out);
    const auto sets = load_sets(a.embeddings);
    std::vector<Input> inputs;
    std::vector<std::string> outputs;
    for (const auto& s : sets) {
        inputs.push_back(s.input);
        const auto report = for_file(s.input.path, [&] { return ldsp::edi::compute_edi(s.set, a.config, g.threads); });
        for (const auto& w : report.warnings) warn(s.input.path.string() + ": " + w);
        const std::string stem = report.property;
        ldsp::io::write_report_json(out / (stem + ".edi.json"), report);
        ldsp::io::write_report_csv(out / (stem + ".edi.csv"), report);
        ldsp::io::render_svg(report, report.rfe_selected, out / (stem + ".combined.svg"));
        outputs.insert(outputs.end(), {stem + ".edi.json", stem + ".edi.csv", stem + ".combined.svg"});
        std::string top;
        for (const auto& r : ldsp::edi::edi_rank_table(report, 5))
            top += " " + std::to_string(r.dimension) + "(" + ldsp::io::svg::num(r.edi) + ")";
        info(report.property + ": " + std::to_string(report.dim()) + " dims, " +
             std::to_string(report.relevant_dims.size()) + " at or above " +
             ldsp::io::svg::num(a.config.edi_threshold) + "; top" + top);
    }
    write_manifest(out, "analyze", g, {{"embeddings", a.embeddings}, {"edi", ldsp::io::to_json(a.config)}}, inputs,
                   outputs);
    return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
    std::string embeddings;
    std::string edi;
    double stop = 0.95;
    std::size_t bottom = 100;
    std::size_t cross_k = 25;
    std::size_t k_max = 0;
    double train_fraction = 0.8;
};

int run_evaluate(const Global& g, const EvaluateArgs& a) {
    if (!(a.stop >= 0.0 && a.stop <= 1.0)) throw Error(ErrorCode::InvalidArgument, "--stop must be in [0, 1]");
    if (a.bottom < 1) throw Error(ErrorCode::InvalidArgument, "--bottom must be >= 1");
    if (!(a.train_fraction > 0.0 && a.train_fraction < 1.0))
        throw Error(ErrorCode::InvalidArgument, "--train-fraction must be in (0, 1)");
    const fs::path out(g.out);

    std::vector<Input> inputs;
    std::map<std::string, ldsp::edi::PropertyReport> reports;
    std::vector<fs::path> report_files;
    const fs::path edi_path(a.edi);
    std::error_code ec;
    if (fs::is_directory(edi_path, ec)) {
        for (const auto& e : fs::directory_iterator(edi_path)) {
            const std::string name = e.path().filename().string();
            if (e.is_regular_file() && name.size() > 9 && name.ends_with(".edi.json")) report_files.push_back(e.path());
        }
        std::sort(report_files.begin(), report_files.end());
        if (report_files.empty()) throw Error(ErrorCode::IoError, "no .edi.json reports in '" + a.edi + "'");
    } else {
        report_files.push_back(edi_path);
    }
    for (const auto& f : report_files) {
        auto r = for_file(f, [&] { return ldsp::io::read_property_report(f); });
        inputs.push_back({f, ldsp::io::sha256_file(f)});
        const std::string prop = r.property;
        if (!reports.emplace(prop, std::move(r)).second)
            throw Error(ErrorCode::InvalidArgument, "two reports for property '" + prop + "'");
    }

    const auto sets = load_sets(a.embeddings);
    std::vector<std::string> outputs;
    for (const auto& s : sets) {
        inputs.push_back(s.input);
        const auto own = reports.find(s.set.property);
        if (own == reports.end())
            throw Error(ErrorCode::IoError, s.input.path.string() + ": no EDI report for property '" +
                                                s.set.property + "' in '" + a.edi + "'");
        const std::size_t d = s.set.dim();
        if (own->second.dim() != d)
            throw Error(ErrorCode::DimensionMismatch, s.input.path.string() + ": report for '" + s.set.property +
                                                          "' covers " + std::to_string(own->second.dim()) +
                                                          " dimensions, embeddings have " + std::to_string(d));
        if (own->second.model_tag != s.set.model_tag)
            warn("report model '" + own->second.model_tag + "' differs from embeddings model '" + s.set.model_tag +
                 "'");
        std::map<std::string, std::vector<std::size_t>> others;
        for (const auto& [prop, rep] : reports) {
            if (prop == s.set.property) continue;
            if (rep.dim() != d)
                throw Error(ErrorCode::DimensionMismatch, "report for '" + prop + "' covers " +
                                                              std::to_string(rep.dim()) + " dimensions, '" +
                                                              s.set.property + "' embeddings have " + std::to_string(d));
            others.emplace(prop, rep.ranked_dims());
        }
        ldsp::eval::EvaluationOptions opts;
        opts.split.seed = g.seed;
        opts.split.train_fraction = a.train_fraction;
        opts.stop_ratio = a.stop;
        opts.k_max = a.k_max;
        opts.bottom_k = a.bottom;
        if (opts.bottom_k > d) {
            warn("--bottom " + std::to_string(a.bottom) + " exceeds " + std::to_string(d) + " dimensions; using " +
                 std::to_string(d));
            opts.bottom_k = d;
        }
        opts.cross_k = std::min(a.cross_k, d);
        opts.threads = g.threads;
        const auto ranked = own->second.ranked_dims();
        const auto r = for_file(s.input.path, [&] { return ldsp::eval::evaluate_property(s.set, ranked, others, opts); });
        if (!r.reached)
            warn(r.property + ": accuracy never reached " + ldsp::io::svg::num(a.stop) + " of baseline; k_at_95 = " +
                 std::to_string(r.k_at_95) + " (k_max)");
        const std::string stem = r.property;
        ldsp::io::write_report_json(out / (stem + ".evaluation.json"), r);
        ldsp::io::write_report_csv(out / (stem + ".evaluation.csv"), r);
        ldsp::io::render_svg(r, out / (stem + ".evaluation.svg"));
        outputs.insert(outputs.end(), {stem + ".evaluation.json", stem + ".evaluation.csv", stem + ".evaluation.svg"});
        info(r.property + ": baseline " + ldsp::io::format_double(r.baseline_accuracy) + ", k_at_95 " +
             std::to_string(r.k_at_95) + ", low-EDI(" + std::to_string(r.bottom_k) + ") " +
             ldsp::io::format_double(r.low_edi_accuracy));
    }
    write_manifest(out, "evaluate", g,
                   {{"embeddings", a.embeddings},
                    {"edi", a.edi},
                    {"stop_ratio", a.stop},
                    {"bottom_k", a.bottom},
                    {"cross_k", a.cross_k},
                    {"k_max", a.k_max},
                    {"train_fraction", a.train_fraction}},
                   inputs, outputs);
    return 0;
}

// ---- classify ----

struct ClassifyArgs {
    std::string embeddings;
    double train_fraction = 0.8;
};

int run_classify(const Global& g, const ClassifyArgs& a) {
    const fs::path out(g.out);
    auto sets = load_sets(a.embeddings);
    if (sets.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "classify needs embeddings for at least 2 properties, found " +
                                                    std::to_string(sets.size()));
    std::vector<Input> inputs;
    std::map<std::string, ldsp::EmbeddingPairSet> data;
    for (auto& s : sets) {
        inputs.push_back(s.input);
        data.emplace(s.set.property, std::move(s.set));
    }
    ldsp::eval::SplitSpec spec;
    spec.seed = g.seed;
    spec.train_fraction = a.train_fraction;
    const auto res = ldsp::eval::lp_classifier(data, spec);
    if (!res.converged) warn("classifier did not reach the gradient tolerance");
    ldsp::io::write_file(out / "lp-classifier.json", ldsp::io::dump_json(ldsp::io::to_json(res)));
    ldsp::io::render_svg(res, out / "confusion.svg");
    info(std::to_string(data.size()) + " properties, accuracy " + ldsp::io::format_double(res.accuracy));
    write_manifest(out, "classify", g, {{"embeddings", a.embeddings}, {"train_fraction", a.train_fraction}}, inputs,
                   {"lp-classifier.json", "confusion.svg"});
    return 0;
}

// ---- synth ----

int run_synth(const Global& g, const std::string& spec_path, bool seed_given) {
    const fs::path spec_file(spec_path);
    const json j = ldsp::io::read_json_file(spec_file);
    ldsp::io::SyntheticSpec spec;
    try {
        spec = j.get<ldsp::io::SyntheticSpec>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, spec_path + ": " + e.what());
    }
    if (seed_given) spec.seed = g.seed;
    const auto set = ldsp::io::generate_synthetic(spec);
    const fs::path out(g.out);
    ldsp::io::write_ldse(out, set);
    info("wrote " + std::to_string(spec.n_pairs) + "x" + std::to_string(spec.dim) + " pairs to " + out.string());
    Global m = g;
    m.seed = spec.seed;
    write_manifest(out.has_parent_path() ? out.parent_path() : fs::path("."), "synth", m, json(spec),
                   {{spec_file, ldsp::io::sha256_file(spec_file)}}, {out.filename().string()});
    return 0;
}

// ---- gen ----

struct GenArgs {
    ldsp::gen::GenerationJob job;
    long long backoff_ms = 1000;
    int timeout_s = 120;
};

int run_gen(const Global& g, GenArgs a) {
    a.job.out_dir = g.out;
    a.job.backoff = std::chrono::milliseconds(a.backoff_ms);
    const auto res = ldsp::gen::run_job(a.job, ldsp::gen::http_transport(std::chrono::seconds(a.timeout_s)), {}, info);
    info(a.job.property + ": " + std::to_string(res.records.size()) + " accepted, " +
         std::to_string(res.rejected.size()) + " rejected, " + std::to_string(res.flagged.size()) +
         " flagged (flag rate " + ldsp::io::svg::num(100.0 * res.log.flag_rate()) + "%), " +
         std::to_string(res.log.retries) + " retries");
    const ldsp::gen::JobPaths paths(a.job);
    write_manifest(a.job.out_dir, "gen", g,
                   {{"property", a.job.property},
                    {"endpoint", a.job.endpoint_url},
                    {"model", a.job.model_name},
                    {"total", a.job.total},
                    {"batch_size", a.job.batch_size},
                    {"api_key_env", a.job.api_key_env},
                    {"max_attempts", a.job.max_attempts},
                    {"prompt_sha256", ldsp::io::sha256_hex(ldsp::gen::build_prompt(a.job))}},
                   {},
                   {paths.csv.filename().string(), paths.rejected.filename().string(),
                    paths.flagged.filename().string(), paths.checkpoint.filename().string()});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Embedding Dimension Importance analysis for linguistically distinct sentence pairs", "ldsp"};
    app.set_version_flag("--version", std::string(LDSP_VERSION));
    app.require_subcommand(1);
    app.fallthrough();
    app.config_formatter(std::make_shared<JsonOrTomlConfig>());

    Global g;
    app.add_option("--seed", g.seed, "split / generation seed")->capture_default_str();
    app.add_option("--out", g.out, "output directory (output file for synth)")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.set_config("--config", "", "JSON or TOML config file; command-line flags take precedence")
        ->each([&](const std::string& p) { g.config_path = p; });

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "per-dimension EDI reports");
    analyze->add_option("--embeddings", an.embeddings, "LDSE file or directory")->required();
    analyze->add_option("--bins", an.config.bins, "quantile bins for MI")->capture_default_str();
    analyze->add_option("--keep", an.config.keep_count, "RFE keep count")->capture_default_str();
    analyze->add_option("--w1", an.config.w1, "Wilcoxon weight")->capture_default_str();
    analyze->add_option("--w2", an.config.w2, "MI weight")->capture_default_str();
    analyze->add_option("--w3", an.config.w3, "RFE weight")->capture_default_str();
    analyze->add_option("--threshold", an.config.edi_threshold, "relevance threshold")->capture_default_str();
    analyze->add_option("--rfe-step", an.config.rfe_step_fraction, "fraction removed per RFE round")
        ->capture_default_str();
    analyze->add_option("--lambda", an.config.l2_lambda, "L2 strength for RFE")->capture_default_str();
    analyze->add_option("--p-floor", an.config.p_floor, "floor applied before -log p")->capture_default_str();
    analyze->add_option("--exact-threshold", an.config.wilcoxon.exact_threshold, "largest n for exact Wilcoxon")
        ->capture_default_str();
    analyze->add_option("--alternative", an.alternative, "two-sided, greater or less")
        ->check(CLI::IsMember({"two-sided", "greater", "less"}))
        ->capture_default_str();

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "baseline, high/low-EDI and cross-property accuracy");
    evaluate->add_option("--embeddings", ev.embeddings, "LDSE file or directory")->required();
    evaluate->add_option("--edi", ev.edi, "EDI report or directory of <property>.edi.json")->required();
    evaluate->add_option("--stop", ev.stop, "fraction of baseline to reach")->capture_default_str();
    evaluate->add_option("--bottom", ev.bottom, "low-EDI dimension count")->capture_default_str();
    evaluate->add_option("--cross-k", ev.cross_k, "top dims taken from other properties")->capture_default_str();
    evaluate->add_option("--k-max", ev.k_max, "cap for the high-EDI loop (0: d)")->capture_default_str();
    evaluate->add_option("--train-fraction", ev.train_fraction, "pairs used for training")->capture_default_str();

    ClassifyArgs cl;
    auto* classify = app.add_subcommand("classify", "multiclass property classifier on difference vectors");
    classify->add_option("--embeddings", cl.embeddings, "directory of LDSE files")->required();
    classify->add_option("--train-fraction", cl.train_fraction, "pairs used for training")->capture_default_str();

    std::string spec_path;
    auto* synth = app.add_subcommand("synth", "planted-signal synthetic LDSE");
    synth->add_option("--spec", spec_path, "SyntheticSpec JSON")->required();

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "generate LDSPs through a chat-completions endpoint");
    gen->add_option("--property", ga.job.property)->required();
    gen->add_option("--endpoint", ga.job.endpoint_url, "chat-completions URL")->required();
    gen->add_option("--model", ga.job.model_name)->required();
    gen->add_option("--total", ga.job.total)->capture_default_str();
    gen->add_option("--batch-size", ga.job.batch_size)->capture_default_str();
    gen->add_option("--api-key-env", ga.job.api_key_env)->capture_default_str();
    gen->add_option("--max-attempts", ga.job.max_attempts)->capture_default_str();
    gen->add_option("--backoff-ms", ga.backoff_ms, "first retry delay, doubled per attempt")->capture_default_str();
    gen->add_option("--timeout", ga.timeout_s, "per-request timeout in seconds")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*analyze) return run_analyze(g, an);
        if (*evaluate) return run_evaluate(g, ev);
        if (*classify) return run_classify(g, cl);
        if (*synth) return run_synth(g, spec_path, app.get_option("--seed")->count() > 0);
        if (*gen) {
            if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "--out is required");
            return run_gen(g, ga);
        }
    } catch (const Error& e) {
        std::cerr << "ldsp: error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "ldsp: error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ldsp: error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
