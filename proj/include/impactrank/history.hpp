#pragma once

// Version-history ingestion and churn statistics.
//
// Log lines are {"ts": int, "author": str, "paths": [str]}. Paths that do not
// resolve to a repository file are counted but otherwise ignored.

#include "impactrank/repository.hpp"

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace impactrank {

inline constexpr std::int64_t kSecondsPerDay = 86400;

struct ChangeEvent {
    std::size_t file = 0;  // index into Repository::files
    std::int64_t timestamp = 0;
    std::string author_id;

    bool operator==(const ChangeEvent&) const = default;
};

struct History {
    /// Per-file events sorted by (timestamp, author).
    std::vector<std::vector<ChangeEvent>> per_file;
    std::int64_t malformed_records = 0;
    std::int64_t unknown_paths = 0;

    bool operator==(const History&) const = default;
};

struct ChurnStats {
    double total_changes = 0;
    double changes_in_window = 0;
    double top_contributor_pct = 0;
    double days_since_last_change = 0;
    double age_days = 0;
};

History ingest_history(std::istream& log, const Repository& repo);

/// An empty history for `repo`.
History empty_history(const Repository& repo);

/// Age of the repository at `now`, from the earliest known commit, in days.
double repository_age_days(const Repository& repo, const History& history, std::int64_t now);

/// Churn statistics for every file relative to an explicit `now`.
/// Files never changed report days_since_last_change = repository age.
std::vector<ChurnStats> churn_stats(const Repository& repo, const History& history,
                                    std::int64_t now, double window_days = 365.0);

/// Latest timestamp appearing in the repository or history (0 if none); the
/// default reference instant when none is configured.
std::int64_t latest_timestamp(const Repository& repo, const History& history);

}  // namespace impactrank
