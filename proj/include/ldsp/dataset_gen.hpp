#pragma once

// LDSP generation against a chat-completions style endpoint: prompt
// construction, batched requests with retry, per-row quarantine, ordering
// heuristics and checkpoint/resume.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ldsp/error.hpp"
#include "ldsp/io/files.hpp"
#include "ldsp/io/ldsp_csv.hpp"
#include "ldsp/pair_set.hpp"
#include "ldsp/properties.hpp"

namespace ldsp::gen {

struct GenerationJob {
    std::string property;
    std::string property_description;  // empty: taken from the registry
    LdspRecord example_ldsp;           // empty sentences: taken from the registry
    std::size_t total = 1000;
    std::size_t batch_size = 100;
    std::string endpoint_url;
    std::string model_name;
    std::string api_key_env = "LDSP_LLM_API_KEY";
    std::filesystem::path out_dir = ".";
    int max_attempts = 3;
    std::chrono::milliseconds backoff{1000};  // doubled after each failed attempt

    /// Fills description and example from the registry; checks batching.
    void resolve() {
        const PropertyInfo& info = require_property(property);
        if (property_description.empty()) property_description = std::string(info.description);
        if (example_ldsp.sentence1.empty() || example_ldsp.sentence2.empty())
            example_ldsp = {property, std::string(info.example_sentence1), std::string(info.example_sentence2)};
        if (batch_size == 0 || total == 0 || total % batch_size != 0)
            throw Error(ErrorCode::InvalidArgument, "GenerationJob: total (" + std::to_string(total) +
                                                        ") must be a positive multiple of batch_size (" +
                                                        std::to_string(batch_size) + ")");
        if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "GenerationJob: max_attempts must be >= 1");
    }

    [[nodiscard]] std::size_t batches() const { return batch_size ? total / batch_size : 0; }
};

inline constexpr std::string_view kPromptTemplate =
    R"(You are generating a dataset of Linguistically Distinct Sentence Pairs (LDSPs).
Each LDSP will differ in one key linguistic property while maintaining the same overall meaning.

Below are some examples of LDSPs

Linguistic Property: negation
LDSP: ('The box is on the counter', 'The box is not on the counter')

Linguistic Property: tense
LDSP: ('The box is on the counter', 'The box was on the counter')

You will generate {num_ldsps} distinct LDSPs of various topics, 100 at a time.

You will generate them as two columns of a CSV. One column for first sentence of the LDSP, and the other column for the second.
Each row is a new LDSP, so you will generate {num_ldsps} rows in total.

Generate no other text. Vary the sentence structure.

The property for which you will be generating LDSPs will be {linguistic_property}.

Property Description: {property_description}

An example LDSP for this property is
{example_ldsp}

Generate the first 100 LDSPs.
)";

inline std::string replace_all(std::string text, std::string_view key, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

inline std::string format_example(const LdspRecord& r) { return "('" + r.sentence1 + "', '" + r.sentence2 + "')"; }

inline std::string build_prompt(GenerationJob job) {
    job.resolve();
    std::string p(kPromptTemplate);
    p = replace_all(std::move(p), "{num_ldsps}", std::to_string(job.total));
    p = replace_all(std::move(p), "{linguistic_property}", job.property);
    p = replace_all(std::move(p), "{property_description}", job.property_description);
    p = replace_all(std::move(p), "{example_ldsp}", format_example(job.example_ldsp));
    return p;
}

inline std::string next_batch_message(std::size_t batch_size) {
    return "Generate the next " + std::to_string(batch_size) + " LDSPs.";
}

// ---- ordering heuristics ----

namespace detail {

inline std::vector<std::string> tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'' && !cur.empty() && i + 1 < s.size() && s[i + 1] == 't' && cur.back() == 'n') {
            // "isn't" -> "is", "n't"
            cur.pop_back();
            flush();
            out.emplace_back("n't");
            ++i;
        } else {
            flush();
        }
    }
    flush();
    return out;
}

using Bag = std::multiset<std::string>;

/// Tokens of a that are not matched in b (multiset difference).
inline Bag only_in(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    Bag rest(b.begin(), b.end());
    Bag out;
    for (const auto& t : a) {
        auto it = rest.find(t);
        if (it != rest.end()) rest.erase(it);
        else out.insert(t);
    }
    return out;
}

inline std::size_t count_in(const Bag& bag, const std::set<std::string>& words) {
    std::size_t n = 0;
    for (const auto& t : bag) n += words.count(t);
    return n;
}

inline std::size_t count_in(const std::vector<std::string>& toks, const std::set<std::string>& words) {
    return count_in(Bag(toks.begin(), toks.end()), words);
}

inline const std::set<std::string> kNegators{"not",  "n't",    "no",      "never", "cannot", "none",
                                             "nobody", "nothing", "neither", "nor",   "nowhere"};
inline const std::set<std::string> kDefinite{"the"};
inline const std::set<std::string> kIndefinite{"a", "an"};
inline const std::set<std::string> kPastAux{"was", "were", "had", "did"};
inline const std::set<std::string> kPresentAux{"is", "are", "am", "has", "have", "does", "do"};
inline const std::set<std::string> kIrregularPast{
    "ate",   "began", "bought", "brought", "built", "came",  "caught", "chose", "drank", "drove", "fell",
    "felt",  "flew",  "forgot", "found",   "gave",  "got",   "grew",   "heard", "held",  "kept",  "knew",
    "left",  "led",   "lost",   "made",    "meant", "met",   "paid",   "ran",   "rang",  "rode",  "rose",
    "said",  "sang",  "sat",    "saw",     "sent",  "shook", "shone",  "slept", "sold",  "spoke", "spent",
    "stood", "stole", "swam",   "taught",  "told",  "took",  "thought", "threw", "understood", "went",
    "woke",  "won",   "wore",   "wrote"};
inline const std::set<std::string> kIntensifiers{
    "very",      "extremely", "really",  "incredibly", "surprisingly", "highly",  "remarkably", "quite",
    "truly",     "absolutely", "totally", "exceptionally", "deeply",    "utterly", "completely", "super",
    "so",        "particularly", "especially", "immensely", "tremendously", "exceedingly", "awfully",
    "terribly",  "genuinely", "thoroughly"};
inline const std::set<std::string> kHedges{"could",    "might",      "may",      "possibly", "perhaps",
                                           "probably", "maybe",      "likely",   "seems",    "seem",
                                           "appears",  "appear",     "allegedly", "supposedly", "reportedly",
                                           "would",    "should",     "presumably", "apparently", "unlikely"};
inline const std::set<std::string> kGrouping{"several", "many",     "some",   "few",     "dozens", "lots",
                                             "multiple", "numerous", "couple", "various", "handful", "group",
                                             "bunch",   "plenty",   "hundreds", "thousands", "dozen"};
inline const std::set<std::string> kNumberWords{"one",   "two",   "three",  "four",   "five",   "six",
                                                "seven", "eight", "nine",   "ten",    "eleven", "twelve",
                                                "twenty", "thirty", "forty", "fifty", "hundred"};
inline const std::set<std::string> kBeForms{"is", "are", "was", "were", "be", "been", "being", "am"};

inline bool is_past_form(const std::string& t) {
    return kPastAux.count(t) || kIrregularPast.count(t) || (t.size() > 3 && t.ends_with("ed"));
}

inline std::size_t count_past(const Bag& bag) {
    return static_cast<std::size_t>(std::count_if(bag.begin(), bag.end(), is_past_form));
}

inline bool is_number(const std::string& t) {
    return kNumberWords.count(t) || std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
}

inline std::size_t count_numbers(const Bag& bag) {
    return static_cast<std::size_t>(std::count_if(bag.begin(), bag.end(), is_number));
}

inline bool looks_passive(const std::vector<std::string>& toks) {
    return std::find(toks.begin(), toks.end(), "by") != toks.end() && count_in(toks, kBeForms) > 0;
}

}  // namespace detail

/// Direction evidence for one pair: forward means sentence2 carries the
/// marked form, backward means sentence1 does.
struct OrderingEvidence {
    bool forward = false;
    bool backward = false;
};

inline OrderingEvidence ordering_evidence(const LdspRecord& r, std::string_view property) {
    using namespace detail;
    const auto t1 = tokens(r.sentence1), t2 = tokens(r.sentence2);
    const Bag a = only_in(t1, t2), b = only_in(t2, t1);  // a: only in s1, b: only in s2
    OrderingEvidence e;
    if (property == "negation") {
        const auto n1 = count_in(t1, kNegators), n2 = count_in(t2, kNegators);
        e.forward = n2 > n1;
        e.backward = n1 > n2;
    } else if (property == "definiteness") {
        e.forward = count_in(a, kDefinite) > 0 || count_in(b, kIndefinite) > 0;
        e.backward = count_in(b, kDefinite) > 0 || count_in(a, kIndefinite) > 0;
    } else if (property == "tense") {
        e.forward = count_past(b) > 0 || count_in(a, kPresentAux) > 0;
        e.backward = count_past(a) > 0 || count_in(b, kPresentAux) > 0;
    } else if (property == "intensifier") {
        e.forward = count_in(b, kIntensifiers) > 0;
        e.backward = count_in(a, kIntensifiers) > 0;
    } else if (property == "factuality") {
        e.forward = count_in(b, kHedges) > 0;
        e.backward = count_in(a, kHedges) > 0;
    } else if (property == "quantity") {
        e.forward = count_numbers(a) > 0 || count_in(b, kGrouping) > 0;
        e.backward = count_numbers(b) > 0 || count_in(a, kGrouping) > 0;
    } else if (property == "voice") {
        e.forward = looks_passive(t2) && !looks_passive(t1);
        e.backward = looks_passive(t1) && !looks_passive(t2);
    }
    return e;
}

/// Whether a pair passes the ordering rule for its property. negation,
/// definiteness and tense need forward evidence and no backward evidence;
/// intensifier, factuality, quantity and voice fail only on purely backward
/// evidence; polarity, synonym and control have no ordering constraint.
inline bool ordering_ok(const LdspRecord& r, std::string_view property) {
    const OrderingEvidence e = ordering_evidence(r, property);
    if (property == "negation" || property == "definiteness" || property == "tense") return e.forward && !e.backward;
    if (property == "intensifier" || property == "factuality" || property == "quantity" || property == "voice")
        return !(e.backward && !e.forward);
    return true;
}

struct OrderingResult {
    std::vector<LdspRecord> accepted;
    std::vector<LdspRecord> flagged;

    [[nodiscard]] double flag_rate() const {
        const std::size_t n = accepted.size() + flagged.size();
        return n ? static_cast<double>(flagged.size()) / static_cast<double>(n) : 0.0;
    }
};

inline OrderingResult validate_ordering(const std::vector<LdspRecord>& records, std::string_view property) {
    require_property(property);
    OrderingResult out;
    for (const auto& r : records) (ordering_ok(r, property) ? out.accepted : out.flagged).push_back(r);
    return out;
}

// ---- response parsing ----

struct RejectedRow {
    std::size_t batch = 0;
    std::size_t line = 0;  // 0 for a whole-response rejection
    std::string raw;
    std::string reason;

    friend bool operator==(const RejectedRow&, const RejectedRow&) = default;
};

struct ParsedBatch {
    std::vector<LdspRecord> records;
    std::vector<RejectedRow> rejected;
};

/// Drops ``` fence lines from a model reply.
inline std::string strip_fences(std::string_view content) {
    std::string out;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        std::string_view trimmed = line;
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front()))) trimmed.remove_prefix(1);
        if (!trimmed.starts_with("```")) {
            out.append(line);
            if (end < content.size()) out.push_back('\n');
        }
        if (end == content.size()) break;
        pos = end + 1;
    }
    return out;
}

namespace detail {

inline std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

inline bool is_header(const std::vector<std::string>& fields) {
    if (fields.size() != 2) return false;
    const auto f0 = io::detail::lower_trim(fields[0]), f1 = io::detail::lower_trim(fields[1]);
    return (f0.find("sentence") != std::string::npos && f1.find("sentence") != std::string::npos) ||
           (f0 == "sentence1" && f1 == "sentence2");
}

inline void take_row(const io::CsvRow& row, std::size_t batch, std::string_view property, bool first, ParsedBatch& out) {
    if (first && is_header(row.fields)) return;
    if (row.fields.size() != 2) {
        out.rejected.push_back({batch, row.line, row.raw, "expected 2 fields, found " + std::to_string(row.fields.size())});
        return;
    }
    LdspRecord r{std::string(property), trim(row.fields[0]), trim(row.fields[1])};
    if (r.sentence1.empty() || r.sentence2.empty()) {
        out.rejected.push_back({batch, row.line, row.raw, "empty sentence"});
        return;
    }
    if (r.sentence1 == r.sentence2) {
        out.rejected.push_back({batch, row.line, row.raw, "identical sentences"});
        return;
    }
    out.records.push_back(std::move(r));
}

}  // namespace detail

/// Parses a reply as two-column CSV. Rows that do not have exactly two
/// non-empty fields are rejected individually. If the text is not valid CSV
/// as a whole, each line is parsed on its own.
inline ParsedBatch parse_batch(std::string_view content, std::size_t batch, std::string_view property) {
    const std::string text = strip_fences(content);
    ParsedBatch out;
    try {
        const auto rows = io::parse_csv(text);
        for (std::size_t i = 0; i < rows.size(); ++i) detail::take_row(rows[i], batch, property, i == 0, out);
        return out;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MalformedCsv) throw;
    }
    out = {};
    std::size_t pos = 0, line_no = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line_no;
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (detail::trim(line).empty()) continue;
        try {
            auto rows = io::parse_csv(line);
            for (auto& row : rows) {
                row.line = line_no;
                detail::take_row(row, batch, property, first, out);
                first = false;
            }
        } catch (const Error& e) {
            out.rejected.push_back({batch, line_no, line, e.message()});
            first = false;
        }
    }
    return out;
}

// ---- transport ----

struct HttpRequest {
    std::string url;
    std::string body;
    std::map<std::string, std::string> headers;
};

struct HttpResponse {
    int status = 0;  // 0: transport failure
    std::string body;
    std::string error;
};

using Transport = std::function<HttpResponse(const HttpRequest&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;
using Logger = std::function<void(const std::string&)>;

inline bool is_transient(const HttpResponse& r) { return r.status == 0 || r.status == 429 || r.status >= 500; }

// ---- job runner ----

struct GenerationLog {
    std::size_t requests = 0;
    std::size_t retries = 0;
    std::size_t batches_completed = 0;
    std::size_t resumed_batches = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t flagged = 0;
    std::vector<std::size_t> retries_per_batch;

    [[nodiscard]] double flag_rate() const {
        const std::size_t n = accepted + flagged;
        return n ? static_cast<double>(flagged) / static_cast<double>(n) : 0.0;
    }
};

struct JobResult {
    std::vector<LdspRecord> records;  // accepted, main CSV
    std::vector<LdspRecord> flagged;
    std::vector<RejectedRow> rejected;
    GenerationLog log;
};

struct JobPaths {
    std::filesystem::path csv, rejected, flagged, checkpoint;

    explicit JobPaths(const GenerationJob& job)
        : csv(job.out_dir / (job.property + ".csv")),
          rejected(job.out_dir / (job.property + ".rejected.csv")),
          flagged(job.out_dir / (job.property + ".flagged.csv")),
          checkpoint(job.out_dir / (job.property + ".ckpt.json")) {}
};

inline std::string format_rejected_csv(const std::vector<RejectedRow>& rows) {
    std::string out = "batch,line,reason,raw\n";
    for (const auto& r : rows)
        out += std::to_string(r.batch) + ',' + std::to_string(r.line) + ',' + io::csv_escape(r.reason) + ',' +
               io::csv_escape(r.raw) + '\n';
    return out;
}

/// Chat-completions request body for batch `batch` given earlier replies.
inline std::string request_body(const GenerationJob& job, const std::string& prompt,
                                const std::vector<std::string>& replies) {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "user"}, {"content", prompt}});
    for (const auto& r : replies) {
        messages.push_back({{"role", "assistant"}, {"content", r}});
        messages.push_back({{"role", "user"}, {"content", next_batch_message(job.batch_size)}});
    }
    return nlohmann::json{{"model", job.model_name}, {"messages", messages}}.dump();
}

/// Extracts choices[0].message.content; throws ParseError.
inline std::string reply_content(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("response is not a chat completion: ") + e.what());
    }
}

class JobRunner {
public:
    JobRunner(GenerationJob job, Transport transport, Sleeper sleeper = {}, Logger logger = {})
        : job_(std::move(job)), transport_(std::move(transport)), sleep_(std::move(sleeper)), log_(std::move(logger)) {
        if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
        if (!log_) log_ = [](const std::string&) {};
    }

    /// Runs the remaining batches, resuming from `<property>.ckpt.json` when
    /// present. `stop_after` limits the number of new batches (0: no limit).
    JobResult run(std::size_t stop_after = 0) {
        job_.resolve();
        const char* key = std::getenv(job_.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            throw Error(ErrorCode::AuthMissing, "environment variable " + job_.api_key_env + " is not set");
        api_key_ = key;

        const JobPaths paths(job_);
        const std::string prompt = build_prompt(job_);
        std::vector<std::string> replies = load_checkpoint(paths, prompt);

        JobResult result;
        result.log.resumed_batches = replies.size();
        for (std::size_t b = 0; b < replies.size(); ++b) absorb(b, replies[b], result);
        if (!replies.empty()) log_("resuming " + job_.property + " at batch " + std::to_string(replies.size() + 1));

        std::size_t fresh = 0;
        while (replies.size() < job_.batches() && (stop_after == 0 || fresh < stop_after)) {
            const std::size_t b = replies.size();
            std::size_t retries = 0;
            const HttpResponse resp = post_with_retry(request_body(job_, prompt, replies), b, retries, result.log);
            result.log.retries += retries;
            result.log.retries_per_batch.push_back(retries);
            std::string content;
            try {
                content = reply_content(resp.body);
            } catch (const Error& e) {
                // whole response quarantined; stored as empty reply so the conversation stays aligned
                log_("batch " + std::to_string(b + 1) + ": " + e.message());
                content.clear();
                result.rejected.push_back({b, 0, resp.body, e.message()});
                pending_whole_.push_back(result.rejected.back());
            }
            replies.push_back(content);
            if (!content.empty()) absorb(b, content, result);
            ++fresh;
            write_outputs(paths, prompt, replies, result);
            log_("batch " + std::to_string(b + 1) + "/" + std::to_string(job_.batches()) + ": " +
                 std::to_string(result.records.size()) + " accepted, " + std::to_string(result.rejected.size()) +
                 " rejected, " + std::to_string(result.flagged.size()) + " flagged, " + std::to_string(retries) +
                 " retries");
        }
        if (replies.size() == job_.batches() && fresh == 0) write_outputs(paths, prompt, replies, result);
        result.log.batches_completed = replies.size();
        result.log.accepted = result.records.size();
        result.log.flagged = result.flagged.size();
        result.log.rejected = result.rejected.size();
        return result;
    }

private:
    GenerationJob job_;
    Transport transport_;
    Sleeper sleep_;
    Logger log_;
    std::string api_key_;
    std::vector<RejectedRow> pending_whole_;

    HttpResponse post_with_retry(const std::string& body, std::size_t batch, std::size_t& retries, GenerationLog& log) {
        HttpRequest req{job_.endpoint_url, body,
                        {{"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}}};
        auto delay = job_.backoff;
        for (int attempt = 1;; ++attempt) {
            ++log.requests;
            HttpResponse resp = transport_(req);
            if (resp.status >= 200 && resp.status < 300) return resp;
            const std::string what = resp.status == 0 ? "transport error: " + resp.error
                                                      : "HTTP " + std::to_string(resp.status);
            if (!is_transient(resp))
                throw Error(ErrorCode::EndpointError, "batch " + std::to_string(batch + 1) + ": " + what + " " +
                                                          resp.body.substr(0, 200));
            if (attempt >= job_.max_attempts)
                throw Error(ErrorCode::EndpointError, "batch " + std::to_string(batch + 1) + ": " + what +
                                                          " after " + std::to_string(attempt) + " attempts");
            log_("batch " + std::to_string(batch + 1) + ": " + what + ", retrying in " +
                 std::to_string(delay.count()) + " ms");
            sleep_(delay);
            delay *= 2;
            ++retries;
        }
    }

    void absorb(std::size_t batch, const std::string& content, JobResult& result) const {
        ParsedBatch parsed = parse_batch(content, batch, job_.property);
        OrderingResult ord = validate_ordering(parsed.records, job_.property);
        for (auto& r : ord.accepted) result.records.push_back(std::move(r));
        for (auto& r : ord.flagged) result.flagged.push_back(std::move(r));
        for (auto& r : parsed.rejected) result.rejected.push_back(std::move(r));
    }

    std::vector<std::string> load_checkpoint(const JobPaths& paths, const std::string& prompt) {
        if (!std::filesystem::exists(paths.checkpoint)) return {};
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_file(paths.checkpoint));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, paths.checkpoint.string() + ": " + e.what());
        }
        try {
            if (j.at("property").get<std::string>() != job_.property || j.at("prompt").get<std::string>() != prompt ||
                j.at("batch_size").get<std::size_t>() != job_.batch_size)
                throw Error(ErrorCode::InvalidArgument,
                            paths.checkpoint.string() + ": checkpoint belongs to a different job");
            auto replies = j.at("replies").get<std::vector<std::string>>();
            for (const auto& r : j.value("whole_rejections", nlohmann::json::array()))
                pending_whole_.push_back({r.at("batch").get<std::size_t>(), 0, r.at("raw").get<std::string>(),
                                          r.at("reason").get<std::string>()});
            if (replies.size() > job_.batches())
                throw Error(ErrorCode::InvalidArgument, paths.checkpoint.string() + ": more batches than the job");
            return replies;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, paths.checkpoint.string() + ": " + e.what());
        }
    }

    void write_outputs(const JobPaths& paths, const std::string& prompt, const std::vector<std::string>& replies,
                       JobResult& result) {
        // whole-response rejections restored from a checkpoint go back in batch order
        std::vector<RejectedRow> rejected = result.rejected;
        for (const auto& w : pending_whole_)
            if (std::find(rejected.begin(), rejected.end(), w) == rejected.end()) rejected.push_back(w);
        std::stable_sort(rejected.begin(), rejected.end(),
                         [](const RejectedRow& a, const RejectedRow& b) { return a.batch < b.batch; });
        result.rejected = rejected;

        io::write_ldsp_csv(paths.csv, result.records);
        io::write_file(paths.rejected, format_rejected_csv(result.rejected));
        io::write_ldsp_csv(paths.flagged, result.flagged);

        nlohmann::json whole = nlohmann::json::array();
        for (const auto& w : pending_whole_)
            whole.push_back({{"batch", w.batch}, {"raw", w.raw}, {"reason", w.reason}});
        const nlohmann::json ckpt{{"property", job_.property},
                                  {"model", job_.model_name},
                                  {"total", job_.total},
                                  {"batch_size", job_.batch_size},
                                  {"batches_completed", replies.size()},
                                  {"prompt", prompt},
                                  {"replies", replies},
                                  {"whole_rejections", whole}};
        io::write_file(paths.checkpoint, ckpt.dump(2) + "\n");
    }
};

inline JobResult run_job(const GenerationJob& job, Transport transport, Sleeper sleeper = {}, Logger logger = {}) {
    return JobRunner(job, std::move(transport), std::move(sleeper), std::move(logger)).run();
}

}  // namespace ldsp::gen
