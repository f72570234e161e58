#include "impactrank/keywords.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <regex>
#include <thread>

using namespace impactrank;

namespace {

ChangeRequest request_of(std::string text) {
    ChangeRequest r;
    r.request_id = "r";
    r.text = std::move(text);
    return r;
}

bool contains(const KeywordSet& set, const std::string& term) {
    return std::find(set.keywords.begin(), set.keywords.end(), term) != set.keywords.end();
}

/// Completion endpoint on a loopback port that answers every POST with `reply`.
class StubServer {
public:
    explicit StubServer(std::string reply) : reply_(std::move(reply)) {
        server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_body_ = req.body;
            res.set_content(nlohmann::json{{"choices", {{{"text", reply_}}}}}.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    LlmEndpoint endpoint() const {
        LlmEndpoint e;
        e.base_url = "http://127.0.0.1:" + std::to_string(port_);
        e.model = "stub";
        e.timeout_s = 5;
        return e;
    }
    const std::string& last_body() const { return last_body_; }

private:
    std::string reply_;
    std::string last_body_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST_CASE("compound identifiers keep the compound and its parts") {
    const KeywordSet set = extract_keywords_local(request_of("Fix LocalExecutor memory spike by applying gc.freeze"));
    for (const char* term : {"localexecutor", "local", "executor", "memory", "spike", "gc", "freeze"})
        CHECK_MESSAGE(contains(set, term), term);
    CHECK(set.source == KeywordSource::local);
}

TEST_CASE("empty and all-stopword text yield no keywords") {
    CHECK(extract_keywords_local(request_of("")).empty());
    CHECK(extract_keywords_local(request_of("the of and")).empty());
}

TEST_CASE("snake_case splits and duplicates collapse in first-occurrence order") {
    const KeywordSet set = extract_keywords_local(request_of("worker_pool shutdown; Worker pool"));
    CHECK(set.keywords == std::vector<std::string>{"worker_pool", "worker", "pool", "shutdown"});
    CHECK(set.weights == std::vector<double>(4, 1.0));
}

TEST_CASE("keywords follow the token grammar and extraction is pure") {
    const std::regex grammar("[a-z0-9_.]+");
    for (const char* text : {"HTTPServer::handle() -> 500!", "naïve café über", "a.b.c/d-e_f 42x", "x"}) {
        const KeywordSet a = extract_keywords_local(request_of(text));
        CHECK(a == extract_keywords_local(request_of(text)));
        for (const auto& k : a.keywords) CHECK_MESSAGE(std::regex_match(k, grammar), k);
    }
}

TEST_CASE("text with an alphanumeric non-stopword token gives a non-empty set") {
    CHECK_FALSE(extract_keywords_local(request_of("... parser!!")).empty());
    CHECK(is_stopword("the"));
    CHECK_FALSE(is_stopword("parser"));
}

TEST_CASE("keyword responses are parsed line by line") {
    const KeywordSet set = parse_keyword_response("1. Executor\n- memory\n* gc\n\n");
    CHECK(set.keywords == std::vector<std::string>{"executor", "memory", "gc"});
    CHECK(set.source == KeywordSource::llm);
    CHECK(parse_keyword_response("gc\ngc").size() == 1);
}

TEST_CASE("the prompt embeds the request text") {
    const std::string prompt = render_keyword_prompt(request_of("Fix LocalExecutor memory spike"));
    CHECK(prompt.find("Fix LocalExecutor memory spike") != std::string::npos);
    CHECK(prompt.find("{request}") == std::string::npos);
}

TEST_CASE("stub endpoint keywords are used as returned") {
    StubServer server("executor\nmemory\ngc");
    const LlmKeywordResult r = extract_keywords_llm(request_of("Fix LocalExecutor memory spike"), server.endpoint());
    CHECK_FALSE(r.fell_back);
    CHECK(r.keywords.size() == 3);
    CHECK(r.keywords.source == KeywordSource::llm);
    CHECK(nlohmann::json::parse(server.last_body()).at("prompt").get<std::string>().find("LocalExecutor") !=
          std::string::npos);
}

TEST_CASE("stub endpoint duplicates collapse") {
    StubServer server("gc\ngc");
    CHECK(extract_keywords_llm(request_of("gc pause"), server.endpoint()).keywords.size() == 1);
}

TEST_CASE("unreachable endpoint falls back to local extraction") {
    const ChangeRequest req = request_of("Fix LocalExecutor memory spike");
    LlmEndpoint endpoint;
    {
        // Bind and release a port so nothing is listening on it.
        httplib::Server probe;
        endpoint.base_url = "http://127.0.0.1:" + std::to_string(probe.bind_to_any_port("127.0.0.1"));
    }
    endpoint.timeout_s = 1;
    const LlmKeywordResult r = extract_keywords_llm(req, endpoint);
    CHECK(r.fell_back);
    CHECK(r.keywords == extract_keywords_local(req));
    CHECK(r.keywords.source == KeywordSource::local);
}

TEST_CASE("change types parse and print") {
    CHECK(parse_change_type("feature") == ChangeType::feature);
    CHECK(to_string(ChangeType::refactor) == "refactor");
    CHECK_THROWS(parse_change_type("chore"));
}
