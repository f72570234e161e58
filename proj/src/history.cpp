#include "impactrank/history.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <map>

namespace impactrank {

using json = nlohmann::json;

History empty_history(const Repository& repo) {
    History h;
    h.per_file.assign(repo.size(), {});
    return h;
}

History ingest_history(std::istream& log, const Repository& repo) {
    History history = empty_history(repo);
    std::string line;
    while (std::getline(log, line)) {
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
            continue;
        try {
            const json j = json::parse(line);
            const auto ts = j.at("ts").get<std::int64_t>();
            const auto author = j.at("author").get<std::string>();
            const auto& paths = j.at("paths");
            if (!paths.is_array()) {
                ++history.malformed_records;
                continue;
            }
            for (const auto& p : paths) {
                auto file = repo.find_path(p.get<std::string>());
                if (!file) {
                    ++history.unknown_paths;
                    continue;
                }
                history.per_file[*file].push_back(ChangeEvent{*file, ts, author});
            }
        } catch (const json::exception&) {
            ++history.malformed_records;
        }
    }
    for (auto& events : history.per_file) {
        std::sort(events.begin(), events.end(), [](const ChangeEvent& a, const ChangeEvent& b) {
            return std::tie(a.timestamp, a.author_id) < std::tie(b.timestamp, b.author_id);
        });
    }
    return history;
}

namespace {

std::optional<std::int64_t> first_seen(const Repository& repo, const History& history,
                                       std::size_t file) {
    std::optional<std::int64_t> first = repo.files[file].first_commit_ts;
    if (file < history.per_file.size() && !history.per_file[file].empty()) {
        const auto ts = history.per_file[file].front().timestamp;
        if (!first || ts < *first) first = ts;
    }
    return first;
}

double days_between(std::int64_t from, std::int64_t to) {
    return std::max(0.0, static_cast<double>(to - from) / static_cast<double>(kSecondsPerDay));
}

}  // namespace

double repository_age_days(const Repository& repo, const History& history, std::int64_t now) {
    std::optional<std::int64_t> earliest;
    for (std::size_t i = 0; i < repo.size(); ++i) {
        auto first = first_seen(repo, history, i);
        if (first && (!earliest || *first < *earliest)) earliest = first;
    }
    return earliest ? days_between(*earliest, now) : 0.0;
}

std::vector<ChurnStats> churn_stats(const Repository& repo, const History& history,
                                    std::int64_t now, double window_days) {
    const double repo_age = repository_age_days(repo, history, now);
    const double window_s = window_days * static_cast<double>(kSecondsPerDay);
    std::vector<ChurnStats> out(repo.size());
    for (std::size_t i = 0; i < repo.size(); ++i) {
        ChurnStats& s = out[i];
        const auto* events = i < history.per_file.size() ? &history.per_file[i] : nullptr;
        if (auto first = first_seen(repo, history, i)) s.age_days = days_between(*first, now);

        if (!events || events->empty()) {
            s.days_since_last_change = repo_age;
            continue;
        }
        std::map<std::string, std::int64_t> by_author;
        std::int64_t last = std::numeric_limits<std::int64_t>::min();
        for (const auto& e : *events) {
            s.total_changes += 1;
            if (e.timestamp <= now && static_cast<double>(now - e.timestamp) <= window_s)
                s.changes_in_window += 1;
            ++by_author[e.author_id];
            last = std::max(last, e.timestamp);
        }
        std::int64_t top = 0;
        for (const auto& [author, n] : by_author) top = std::max(top, n);
        s.top_contributor_pct = static_cast<double>(top) / s.total_changes;
        s.days_since_last_change = days_between(last, now);
    }
    return out;
}

std::int64_t latest_timestamp(const Repository& repo, const History& history) {
    std::int64_t latest = 0;
    for (const auto& f : repo.files)
        if (f.first_commit_ts) latest = std::max(latest, *f.first_commit_ts);
    for (const auto& events : history.per_file)
        for (const auto& e : events) latest = std::max(latest, e.timestamp);
    return latest;
}

}  // namespace impactrank
