#include "impactrank/history.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace impactrank;

namespace {

Repository two_files() {
    std::istringstream files(R"({"id":"a","path":"a.py","first_commit_ts":1000})"
                             "\n"
                             R"({"id":"b","path":"b.py"})");
    return ingest_ndjson(files, nullptr, nullptr);
}

std::string commit(std::int64_t ts, const std::string& author, const std::string& path) {
    return R"({"ts":)" + std::to_string(ts) + R"(,"author":")" + author + R"(","paths":[")" + path + "\"]}\n";
}

constexpr std::int64_t kNow = 100 * 365 * kSecondsPerDay;

}  // namespace

TEST_CASE("empty history gives zero churn and zero contributor share") {
    const Repository repo = two_files();
    std::istringstream log("");
    const History h = ingest_history(log, repo);
    for (const auto& c : churn_stats(repo, h, kNow)) {
        CHECK(c.total_changes == 0);
        CHECK(c.changes_in_window == 0);
        CHECK(c.top_contributor_pct == 0);
    }
}

TEST_CASE("top contributor share counts events per author") {
    const Repository repo = two_files();
    std::string text;
    for (int i = 0; i < 4; ++i) text += commit(kNow - (i + 1) * kSecondsPerDay, "alice", "a.py");
    text += commit(kNow - 10 * kSecondsPerDay, "bob", "a.py");
    std::istringstream log(text);
    const auto stats = churn_stats(repo, ingest_history(log, repo), kNow);
    CHECK(stats[0].total_changes == 5);
    CHECK(stats[0].top_contributor_pct == doctest::Approx(0.8));
}

TEST_CASE("window counts only recent events") {
    const Repository repo = two_files();
    std::istringstream log(commit(kNow - 30 * kSecondsPerDay, "a", "a.py") +
                           commit(kNow - 400 * kSecondsPerDay, "a", "a.py"));
    const auto stats = churn_stats(repo, ingest_history(log, repo), kNow, 365.0);
    CHECK(stats[0].changes_in_window == 1);
    CHECK(stats[0].total_changes == 2);
    CHECK(stats[0].days_since_last_change == doctest::Approx(30.0));
}

TEST_CASE("never-changed files report the repository age") {
    const Repository repo = two_files();
    std::istringstream log(commit(kNow - 50 * kSecondsPerDay, "a", "a.py"));
    const History h = ingest_history(log, repo);
    const auto stats = churn_stats(repo, h, kNow);
    CHECK(stats[1].days_since_last_change == doctest::Approx(repository_age_days(repo, h, kNow)));
    CHECK(repository_age_days(repo, h, kNow) == doctest::Approx((kNow - 1000) / double(kSecondsPerDay)));
}

TEST_CASE("malformed records and unknown paths are tallied") {
    const Repository repo = two_files();
    std::istringstream log("garbage\n" + commit(5000, "a", "missing.py") + commit(6000, "a", "b.py"));
    const History h = ingest_history(log, repo);
    CHECK(h.malformed_records == 1);
    CHECK(h.unknown_paths == 1);
    CHECK(h.per_file[1].size() == 1);
    CHECK(latest_timestamp(repo, h) == 6000);
}

TEST_CASE("per-file events are sorted by time") {
    const Repository repo = two_files();
    std::istringstream log(commit(300, "x", "a.py") + commit(100, "y", "a.py") + commit(200, "z", "a.py"));
    const History h = ingest_history(log, repo);
    REQUIRE(h.per_file[0].size() == 3);
    CHECK(std::is_sorted(h.per_file[0].begin(), h.per_file[0].end(),
                         [](const auto& l, const auto& r) { return l.timestamp < r.timestamp; }));
}

TEST_CASE("churn statistics do not depend on record order") {
    const Repository repo = two_files();
    std::mt19937_64 rng(7);
    std::vector<std::string> lines;
    for (int i = 0; i < 40; ++i)
        lines.push_back(commit(kNow - static_cast<std::int64_t>(rng() % 800) * kSecondsPerDay,
                               std::string(1, static_cast<char>('a' + rng() % 4)), rng() % 2 ? "a.py" : "b.py"));
    auto stats_of = [&](const std::vector<std::string>& ls) {
        std::string text;
        for (const auto& l : ls) text += l;
        std::istringstream log(text);
        return churn_stats(repo, ingest_history(log, repo), kNow);
    };
    const auto base = stats_of(lines);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(lines.begin(), lines.end(), rng);
        const auto other = stats_of(lines);
        for (std::size_t f = 0; f < base.size(); ++f) {
            CHECK(other[f].total_changes == base[f].total_changes);
            CHECK(other[f].changes_in_window == base[f].changes_in_window);
            CHECK(other[f].top_contributor_pct == base[f].top_contributor_pct);
            CHECK(other[f].days_since_last_change == base[f].days_since_last_change);
        }
    }
}
