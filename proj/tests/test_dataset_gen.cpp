#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <thread>

#include "ldsp/dataset_gen.hpp"
#include "ldsp/http_transport.hpp"
#include "ldsp/io/files.hpp"
#include "ldsp/io/ldsp_csv.hpp"

using namespace ldsp;
using namespace ldsp::gen;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("ldsp_gen_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

constexpr const char* kKeyEnv = "LDSP_TEST_GEN_KEY";

GenerationJob negation_job(const fs::path& out) {
    ::setenv(kKeyEnv, "sk-test", 1);
    GenerationJob job;
    job.property = "negation";
    job.endpoint_url = "http://mock.invalid/v1/chat/completions";
    job.model_name = "mock-model";
    job.api_key_env = kKeyEnv;
    job.out_dir = out;
    job.backoff = std::chrono::milliseconds(1);
    return job;
}

std::size_t batch_index(const HttpRequest& req) {
    const auto j = nlohmann::json::parse(req.body);
    std::size_t n = 0;
    for (const auto& m : j.at("messages"))
        if (m.at("role") == "assistant") ++n;
    return n;
}

std::string completion(const std::string& content) {
    return nlohmann::json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
}

// 100 negation pairs unique to the batch; `bad_rows` of them are malformed
std::string batch_csv(std::size_t batch, std::size_t bad_rows = 0) {
    std::string out = "sentence1,sentence2\n";
    for (std::size_t i = 0; i < 100; ++i) {
        const std::string id = std::to_string(batch) + "-" + std::to_string(i);
        if (i < bad_rows) out += "Row " + id + " has a single field\n";
        else out += "The parcel " + id + " arrived.,The parcel " + id + " did not arrive.\n";
    }
    return out;
}

Transport fixed_endpoint(std::size_t bad_rows = 0, std::vector<HttpRequest>* seen = nullptr) {
    return [bad_rows, seen](const HttpRequest& req) {
        if (seen) seen->push_back(req);
        return HttpResponse{200, completion(batch_csv(batch_index(req), bad_rows)), ""};
    };
}

Sleeper no_sleep(std::vector<std::chrono::milliseconds>* delays = nullptr) {
    return [delays](std::chrono::milliseconds d) {
        if (delays) delays->push_back(d);
    };
}

}  // namespace

// ---- prompt ----

TEST(Prompt, ContainsFewShotPairs) {
    GenerationJob job;
    job.property = "negation";
    const std::string p = build_prompt(job);
    EXPECT_NE(p.find("('The box is on the counter', 'The box is not on the counter')"), std::string::npos);
    EXPECT_NE(p.find("('The box is on the counter', 'The box was on the counter')"), std::string::npos);
    EXPECT_NE(p.find("You are generating a dataset of Linguistically Distinct Sentence Pairs (LDSPs)."),
              std::string::npos);
    EXPECT_NE(p.find("The property for which you will be generating LDSPs will be negation."), std::string::npos);
    EXPECT_NE(p.find("Property Description: Negation occurs when a not is added"), std::string::npos);
    EXPECT_NE(p.find("('The project is successful.', 'The project is not successful.')"), std::string::npos);
    EXPECT_NE(p.find("You will generate 1000 distinct LDSPs"), std::string::npos);
    EXPECT_EQ(p.find('{'), std::string::npos);
}

TEST(Prompt, TenseJob) {
    GenerationJob job;
    job.property = "tense";
    job.total = 200;
    const std::string p = build_prompt(job);
    EXPECT_NE(p.find("Linguistic Property: tense\nLDSP: ('The box is on the counter', 'The box was on the counter')"),
              std::string::npos);
    EXPECT_NE(p.find("will be tense."), std::string::npos);
    EXPECT_NE(p.find("so you will generate 200 rows in total"), std::string::npos);
}

TEST(Prompt, CustomDescriptionAndExample) {
    GenerationJob job;
    job.property = "voice";
    job.property_description = "Custom.";
    job.example_ldsp = {"voice", "X saw Y.", "Y was seen by X."};
    const std::string p = build_prompt(job);
    EXPECT_NE(p.find("Property Description: Custom."), std::string::npos);
    EXPECT_NE(p.find("('X saw Y.', 'Y was seen by X.')"), std::string::npos);
}

TEST(Prompt, UnknownPropertyAndBadBatching) {
    GenerationJob job;
    job.property = "sarcasm";
    try {
        build_prompt(job);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownProperty);
    }
    job.property = "tense";
    job.total = 150;
    EXPECT_THROW(build_prompt(job), Error);
}

TEST(Prompt, NextBatchMessage) { EXPECT_EQ(next_batch_message(100), "Generate the next 100 LDSPs."); }

// ---- ordering ----

TEST(Ordering, NegationExamples) {
    const LdspRecord pair{"negation", "The project is successful.", "The project is not successful."};
    EXPECT_TRUE(ordering_ok(pair, "negation"));
    EXPECT_FALSE(ordering_ok({"negation", pair.sentence2, pair.sentence1}, "negation"));
    EXPECT_TRUE(ordering_ok({"negation", "She can swim.", "She can't swim."}, "negation"));
    EXPECT_FALSE(ordering_ok({"negation", "A cat.", "A dog."}, "negation"));
}

TEST(Ordering, RegistryExamplesAcceptedReversedFlagged) {
    const std::set<std::string_view> unconstrained{"control", "polarity", "synonym"};
    for (const auto& p : kProperties) {
        const LdspRecord fwd{std::string(p.name), std::string(p.example_sentence1), std::string(p.example_sentence2)};
        const LdspRecord rev{fwd.property, fwd.sentence2, fwd.sentence1};
        EXPECT_TRUE(ordering_ok(fwd, p.name)) << p.name;
        EXPECT_EQ(ordering_ok(rev, p.name), unconstrained.count(p.name) == 1) << p.name;
    }
}

TEST(Ordering, TemplatePairs) {
    EXPECT_TRUE(ordering_ok({"tense", "The box is on the counter", "The box was on the counter"}, "tense"));
    EXPECT_FALSE(ordering_ok({"tense", "The box was on the counter", "The box is on the counter"}, "tense"));
    EXPECT_TRUE(ordering_ok({"tense", "They walk home.", "They walked home."}, "tense"));
    EXPECT_TRUE(ordering_ok({"definiteness", "The dog barked.", "A dog barked."}, "definiteness"));
    EXPECT_FALSE(ordering_ok({"definiteness", "An apple fell.", "The apple fell."}, "definiteness"));
}

TEST(Ordering, ControlAlwaysAccepted) {
    std::vector<LdspRecord> recs{{"control", "They sound excited.", "The farmer has 20 sheep."},
                                 {"control", "The farmer has 20 sheep.", "They sound excited."},
                                 {"control", "x", "x"}};
    const auto res = validate_ordering(recs, "control");
    EXPECT_EQ(res.accepted.size(), 3u);
    EXPECT_TRUE(res.flagged.empty());
    EXPECT_EQ(res.flag_rate(), 0.0);
}

TEST(Ordering, FlagRateAndOrderPreserved) {
    std::vector<LdspRecord> recs;
    for (int i = 0; i < 99; ++i)
        recs.push_back({"negation", "Item " + std::to_string(i) + " works.", "Item " + std::to_string(i) + " does not work."});
    recs.push_back({"negation", "It does not work.", "It works."});
    const auto res = validate_ordering(recs, "negation");
    EXPECT_EQ(res.accepted.size(), 99u);
    ASSERT_EQ(res.flagged.size(), 1u);
    EXPECT_DOUBLE_EQ(res.flag_rate(), 0.01);
    EXPECT_EQ(res.accepted.front(), recs.front());
    EXPECT_THROW(validate_ordering(recs, "nope"), Error);
}

// ---- parsing ----

TEST(ParseBatch, FencesHeaderAndRejects) {
    const std::string content =
        "```csv\nsentence1,sentence2\n\"Hi, there.\",\"Hi, not there.\"\nonly one field\nsame,same\n,empty\na,b\n```\n";
    const auto res = parse_batch(content, 4, "negation");
    ASSERT_EQ(res.records.size(), 2u);
    EXPECT_EQ(res.records[0], (LdspRecord{"negation", "Hi, there.", "Hi, not there."}));
    ASSERT_EQ(res.rejected.size(), 3u);
    for (const auto& r : res.rejected) EXPECT_EQ(r.batch, 4u);
    EXPECT_EQ(res.rejected[0].raw, "only one field");
}

TEST(ParseBatch, BrokenQuoteFallsBackPerLine) {
    const auto res = parse_batch("a,b\n\"broken,c\nd,e\n", 0, "negation");
    EXPECT_EQ(res.records.size(), 2u);
    EXPECT_EQ(res.rejected.size(), 1u);
}

// ---- job runner with a mock transport ----

TEST(RunJob, TenBatchesThousandRecords) {
    TempDir dir;
    std::vector<HttpRequest> seen;
    const auto res = run_job(negation_job(dir.path()), fixed_endpoint(0, &seen), no_sleep());
    EXPECT_EQ(seen.size(), 10u);
    EXPECT_EQ(res.records.size(), 1000u);
    EXPECT_TRUE(res.rejected.empty());
    EXPECT_TRUE(res.flagged.empty());
    EXPECT_EQ(res.log.requests, 10u);
    EXPECT_EQ(res.log.batches_completed, 10u);
    EXPECT_EQ(io::read_ldsp_csv(dir.path() / "negation.csv").size(), 1000u);
    EXPECT_TRUE(fs::exists(dir.path() / "negation.ckpt.json"));
    EXPECT_TRUE(fs::exists(dir.path() / "negation.rejected.csv"));

    // request shape: bearer auth, model, growing conversation
    EXPECT_EQ(seen[0].headers.at("Authorization"), "Bearer sk-test");
    EXPECT_EQ(seen[0].url, "http://mock.invalid/v1/chat/completions");
    const auto last = nlohmann::json::parse(seen[9].body);
    EXPECT_EQ(last.at("model"), "mock-model");
    ASSERT_EQ(last.at("messages").size(), 19u);
    EXPECT_EQ(last.at("messages")[18].at("content"), "Generate the next 100 LDSPs.");
    EXPECT_EQ(last.at("messages")[0].at("content"), build_prompt(negation_job(dir.path())));
}

TEST(RunJob, MalformedRowPerBatchIsQuarantined) {
    TempDir dir;
    const auto res = run_job(negation_job(dir.path()), fixed_endpoint(1), no_sleep());
    EXPECT_EQ(res.records.size(), 990u);
    EXPECT_EQ(res.rejected.size(), 10u);
    for (std::size_t b = 0; b < 10; ++b) EXPECT_EQ(res.rejected[b].batch, b);
    const auto rejected = io::parse_csv(io::read_file(dir.path() / "negation.rejected.csv"));
    EXPECT_EQ(rejected.size(), 11u);
}

TEST(RunJob, TransientFailuresRetried) {
    TempDir dir;
    auto job = negation_job(dir.path());
    job.total = 100;
    int calls = 0;
    std::vector<std::chrono::milliseconds> delays;
    Transport flaky = [&](const HttpRequest& req) {
        ++calls;
        if (calls <= 2) return HttpResponse{500, "oops", ""};
        return HttpResponse{200, completion(batch_csv(batch_index(req))), ""};
    };
    const auto res = run_job(job, flaky, no_sleep(&delays));
    EXPECT_EQ(res.records.size(), 100u);
    EXPECT_EQ(res.log.retries, 2u);
    EXPECT_EQ(res.log.retries_per_batch, (std::vector<std::size_t>{2}));
    EXPECT_EQ(res.log.requests, 3u);
    EXPECT_EQ(delays, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1), std::chrono::milliseconds(2)}));
}

TEST(RunJob, ExhaustedRetriesAndClientErrors) {
    TempDir dir;
    auto job = negation_job(dir.path());
    int calls = 0;
    Transport down = [&](const HttpRequest&) {
        ++calls;
        return HttpResponse{0, "", "connection refused"};
    };
    try {
        run_job(job, down, no_sleep());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EndpointError);
    }
    EXPECT_EQ(calls, 3);

    calls = 0;
    Transport forbidden = [&](const HttpRequest&) {
        ++calls;
        return HttpResponse{403, "{\"error\":\"bad key\"}", ""};
    };
    try {
        run_job(job, forbidden, no_sleep());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EndpointError);
    }
    EXPECT_EQ(calls, 1);
}

TEST(RunJob, MissingKey) {
    TempDir dir;
    auto job = negation_job(dir.path());
    job.api_key_env = "LDSP_TEST_GEN_KEY_UNSET";
    ::unsetenv(job.api_key_env.c_str());
    int calls = 0;
    Transport t = [&](const HttpRequest&) {
        ++calls;
        return HttpResponse{};
    };
    try {
        run_job(job, t, no_sleep());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AuthMissing);
    }
    EXPECT_EQ(calls, 0);
}

TEST(RunJob, UnparseableResponseQuarantinedJobContinues) {
    TempDir dir;
    auto job = negation_job(dir.path());
    job.total = 300;
    Transport t = [](const HttpRequest& req) {
        const auto b = batch_index(req);
        if (b == 1) return HttpResponse{200, "<html>not json</html>", ""};
        return HttpResponse{200, completion(batch_csv(b)), ""};
    };
    const auto res = run_job(job, t, no_sleep());
    EXPECT_EQ(res.records.size(), 200u);
    ASSERT_EQ(res.rejected.size(), 1u);
    EXPECT_EQ(res.rejected[0].batch, 1u);
    EXPECT_EQ(res.rejected[0].line, 0u);
    EXPECT_EQ(res.rejected[0].raw, "<html>not json</html>");
}

TEST(RunJob, FlaggedRowsGoToSidecar) {
    TempDir dir;
    auto job = negation_job(dir.path());
    job.total = 100;
    Transport t = [](const HttpRequest&) {
        std::string csv = batch_csv(0);
        csv += "It is not here.,It is here.\n";
        return HttpResponse{200, completion(csv), ""};
    };
    const auto res = run_job(job, t, no_sleep());
    EXPECT_EQ(res.records.size(), 100u);
    ASSERT_EQ(res.flagged.size(), 1u);
    EXPECT_EQ(io::read_ldsp_csv(dir.path() / "negation.csv").size(), 100u);
    EXPECT_EQ(io::parse_ldsp_csv(io::read_file(dir.path() / "negation.flagged.csv"), "negation"), res.flagged);
}

TEST(RunJob, ResumeMatchesUninterrupted) {
    TempDir full, part;
    Transport mixed = [](const HttpRequest& req) {
        const auto b = batch_index(req);
        if (b == 6) return HttpResponse{200, "garbage", ""};
        std::string csv = batch_csv(b, b % 3);
        if (b == 2) csv += "It is not here.,It is here.\n";
        return HttpResponse{200, completion(csv), ""};
    };
    run_job(negation_job(full.path()), mixed, no_sleep());

    JobRunner first(negation_job(part.path()), mixed, no_sleep());
    const auto partial = first.run(4);
    EXPECT_EQ(partial.log.batches_completed, 4u);
    JobRunner second(negation_job(part.path()), mixed, no_sleep());
    const auto partial2 = second.run(3);
    EXPECT_EQ(partial2.log.resumed_batches, 4u);
    JobRunner third(negation_job(part.path()), mixed, no_sleep());
    const auto rest = third.run();
    EXPECT_EQ(rest.log.resumed_batches, 7u);
    EXPECT_EQ(rest.log.batches_completed, 10u);

    for (const char* name : {"negation.csv", "negation.rejected.csv", "negation.flagged.csv", "negation.ckpt.json"})
        EXPECT_EQ(io::read_file(full.path() / name), io::read_file(part.path() / name)) << name;
}

TEST(RunJob, ForeignCheckpointRejected) {
    TempDir dir;
    auto job = negation_job(dir.path());
    job.total = 200;
    JobRunner(job, fixed_endpoint(), no_sleep()).run(1);
    job.batch_size = 50;
    EXPECT_THROW(JobRunner(job, fixed_endpoint(), no_sleep()).run(), Error);
}

// ---- real HTTP against an in-process server ----

TEST(HttpTransport, TalksToLocalServer) {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = hits++;
        auth = req.get_header_value("Authorization");
        if (n == 0) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        std::size_t b = 0;
        for (const auto& m : body.at("messages"))
            if (m.at("role") == "assistant") ++b;
        res.set_content(completion(batch_csv(b)), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    TempDir dir;
    auto job = negation_job(dir.path());
    job.total = 200;
    job.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    const auto res = run_job(job, http_transport(std::chrono::seconds(10)), no_sleep());
    server.stop();
    th.join();

    EXPECT_EQ(res.records.size(), 200u);
    EXPECT_EQ(res.log.retries, 1u);
    EXPECT_EQ(hits.load(), 3);
    EXPECT_EQ(auth, "Bearer sk-test");
}

TEST(HttpTransport, UnreachableIsTransportFailure) {
    const auto t = http_transport(std::chrono::seconds(2));
    const auto r = t({"http://127.0.0.1:1/x", "{}", {}});
    EXPECT_EQ(r.status, 0);
    EXPECT_FALSE(r.error.empty());
    EXPECT_THROW(split_url("ftp://x/y"), Error);
    EXPECT_EQ(split_url("https://api.example.com/v1/chat").path, "/v1/chat");
    EXPECT_EQ(split_url("https://api.example.com").path, "/");
}
