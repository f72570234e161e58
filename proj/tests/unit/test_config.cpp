#include "fixtures.hpp"

#include "impactrank/config.hpp"
#include "impactrank/error.hpp"

#include <doctest.h>

using namespace impactrank;
namespace ts = testing_support;

TEST_CASE("defaults") {
    const RunConfig c;
    CHECK(c.top_k == 50);
    CHECK(c.top_n == 25);
    CHECK(c.pagerank.damping == 0.85);
    CHECK(c.pagerank.tol == 1e-8);
    CHECK(c.pagerank.max_iter == 100);
    CHECK(c.bm25.k1 == 1.2);
    CHECK(c.bm25.b == 0.75);
    CHECK(c.attention.hidden_dim == 64);
    CHECK(c.attention.head_count == 4);
    CHECK(c.attention.pagerank_weight == 0.1);
    CHECK(c.train.learning_rate == 1e-3);
    CHECK(c.train.margin == 1.0);
    CHECK(c.keyword_mode == KeywordMode::local);
    CHECK_FALSE(c.seed.has_value());
}

TEST_CASE("nested blocks overlay the defaults") {
    RunConfig c;
    apply_config_json(c, R"({
        "seed": 7, "now": 1700000000, "top_k": 10,
        "weights": {"bm25": 0.5},
        "stages": {"first": 100, "second": 50, "final_min": 30, "final_max": 50},
        "attention": {"head_count": 1, "scale_mode": "dk", "combine_mode": "multiplicative"},
        "train": {"epochs": 3, "loss_mode": "pointwise"},
        "keyword_mode": "llm", "llm": {"base_url": "http://127.0.0.1:9"}
    })");
    CHECK(*c.seed == 7);
    CHECK(*c.now == 1700000000);
    CHECK(c.top_k == 10);
    CHECK(c.weights[kSigBm25] == 0.5);
    CHECK(c.weights[kSigHitFraction] == 0.15);
    CHECK(c.stages.final_min == 30);
    CHECK(c.attention.head_count == 1);
    CHECK(c.attention.scale_mode == ScaleMode::dk);
    CHECK(c.attention.combine_mode == CombineMode::multiplicative);
    CHECK(c.train.epochs == 3);
    CHECK(c.train.loss_mode == LossMode::pointwise);
    CHECK(c.keyword_mode == KeywordMode::llm);
    CHECK(c.llm.base_url == "http://127.0.0.1:9");
}

TEST_CASE("unknown keys and wrong types are usage errors") {
    RunConfig c;
    CHECK_THROWS_WITH_AS(apply_config_json(c, R"({"speed": 1})"), doctest::Contains("unknown key 'speed'"), UsageError);
    CHECK_THROWS_WITH_AS(apply_config_json(c, R"({"attention": {"heads": 2}})"),
                         doctest::Contains("attention.heads"), UsageError);
    CHECK_THROWS_WITH_AS(apply_config_json(c, R"({"weights": {"magic": 1}})"), doctest::Contains("magic"), UsageError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"top_k": "ten"})"), UsageError);
    CHECK_THROWS_AS(apply_config_json(c, R"([1, 2])"), UsageError);
    CHECK_THROWS_AS(apply_config_json(c, "{broken"), UsageError);
    CHECK_THROWS_AS(apply_config_json(c, R"({"keyword_mode": "oracle"})"), UsageError);
}

TEST_CASE("inconsistent settings are rejected") {
    RunConfig c;
    CHECK_THROWS_AS(apply_config_json(c, R"({"attention": {"hidden_dim": 30}})"), UsageError);
    RunConfig d;
    CHECK_THROWS_AS(apply_config_json(d, R"({"stages": {"final_min": 80}})"), UsageError);
    RunConfig e;
    CHECK_THROWS_AS(apply_config_json(e, R"({"train": {"train_fraction": 0.9}})"), UsageError);
}

TEST_CASE("config files resolve relative paths against their directory") {
    ts::TempDir dir;
    ts::write_file(dir / "conf/run.json", R"({"files": "data/files.ndjson", "snapshot": "/abs/snap.json"})");
    const RunConfig c = load_config(dir / "conf/run.json");
    CHECK(c.files == dir / "conf/data/files.ndjson");
    CHECK(c.snapshot == "/abs/snap.json");
    CHECK_THROWS_AS(load_config(dir / "missing.json"), UsageError);
}

TEST_CASE("weights files accept a bare or wrapped block") {
    ts::TempDir dir;
    ts::write_file(dir / "bare.json", R"({"pagerank": 0.4})");
    ts::write_file(dir / "wrapped.json", R"({"weights": {"embedding_cosine": 0.2}})");
    CHECK(load_weights(dir / "bare.json")[kSigPageRank] == 0.4);
    const DeterministicWeights w = load_weights(dir / "wrapped.json");
    CHECK(w[kSigEmbedding] == 0.2);
    CHECK(w[kSigBm25] == 0.3);
}

TEST_CASE("serialized config round-trips") {
    RunConfig c;
    apply_config_json(c, R"({"seed": 3, "weights": {"fan_in": 0.2}, "attention": {"pagerank_weight": 0.0}})");
    RunConfig back;
    apply_config_json(back, config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(*back.seed == 3);
    CHECK(back.weights[kSigFanIn] == 0.2);
}
