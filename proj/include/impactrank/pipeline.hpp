#pragma once

// End-to-end ranking over a persisted repository snapshot.

#include "impactrank/attention.hpp"
#include "impactrank/config.hpp"
#include "impactrank/deterministic.hpp"
#include "impactrank/features.hpp"
#include "impactrank/history.hpp"
#include "impactrank/keywords.hpp"
#include "impactrank/report.hpp"
#include "impactrank/repository.hpp"
#include "impactrank/training.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace impactrank {

inline constexpr int kSnapshotVersion = 1;

struct Snapshot {
    Repository repo;
    History history;
    std::int64_t now = 0;
    std::string content_hash;  // FNV-1a 64 over the canonical payload
};

/// Ingests the configured NDJSON exports (or the source tree when fallback is
/// requested or calls are missing) plus history.
Snapshot build_snapshot(const RunConfig& config);

std::string snapshot_to_json(const Snapshot& snapshot);
/// Throws DataError on version or hash mismatch.
Snapshot snapshot_from_json(std::string_view text);
void save_snapshot(const Snapshot& snapshot, const std::filesystem::path& path);
Snapshot load_snapshot(const std::filesystem::path& path);

std::string fnv1a64_hex(std::string_view bytes);

/// Request-level intermediate state.
struct PreparedRequest {
    ChangeRequest request;
    KeywordSet keywords;
    bool keyword_fallback = false;
    RequestSignals signals;
    std::vector<ScoredFile> scored;  // every file, sorted
    CandidateSet candidates;
};

class Ranker {
public:
    Ranker(Snapshot snapshot, RunConfig config,
           std::shared_ptr<const SimilarityProvider> provider = nullptr);

    const Snapshot& snapshot() const { return snapshot_; }
    const RepoFeatures& features() const { return features_; }
    const RunConfig& config() const { return config_; }

    PreparedRequest prepare(const ChangeRequest& request) const;

    /// Ranks the candidate set. Without a model the deterministic order is kept.
    /// When `truth` is given, recall and reciprocal rank are filled in.
    RankingReport rank(const PreparedRequest& prepared, const AttentionModel* model,
                       const std::set<std::string>* truth = nullptr) const;

    RankingReport rank(const ChangeRequest& request, const AttentionModel* model,
                       const std::set<std::string>* truth = nullptr) const;

    /// Builds a training case. With `candidate_ids` the given files form the
    /// candidate set (unknown ids throw DataError); otherwise progressive
    /// filtering chooses them.
    LabeledCase labeled_case(const ChangeRequest& request,
                             const std::optional<std::vector<std::string>>& candidate_ids,
                             const std::vector<std::string>& positive_ids) const;

private:
    Snapshot snapshot_;
    RunConfig config_;
    std::shared_ptr<const SimilarityProvider> provider_;
    RepoFeatures features_;
};

/// Ranks a labeled case directly (for evaluation of prebuilt cases).
RankingReport rank_case(const LabeledCase& c, const AttentionModel* model);

struct CorpusRecord {
    ChangeRequest request;
    std::optional<std::vector<std::string>> candidates;
    std::vector<std::string> positives;
};

/// One record per line: {"request": {...}, "candidates": [...], "positives": [...]}.
std::vector<CorpusRecord> read_labeled_corpus(std::istream& in);
std::vector<CorpusRecord> read_labeled_corpus(const std::filesystem::path& path);

ChangeRequest request_from_json(std::string_view json_text);

}  // namespace impactrank
