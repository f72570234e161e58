#pragma once

// Deterministic baseline score and progressive candidate filtering.

#include "impactrank/features.hpp"
#include "impactrank/repository.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace impactrank {

enum Signal : std::size_t {
    kSigBm25 = 0,
    kSigHitFraction,
    kSigPathHits,
    kSigSymbolHits,
    kSigCallHits,
    kSigRouteHits,
    kSigDbHits,
    kSigPageRank,
    kSigFanIn,
    kSigChurnRecent,
    kSigEmbedding,
};

inline constexpr std::size_t kSignalCount = 11;

using SignalVector = std::array<double, kSignalCount>;

const std::array<std::string_view, kSignalCount>& signal_names();

struct DeterministicWeights {
    SignalVector values{0.3, 0.15, 0.1, 0.1, 0.05, 0.025, 0.025, 0.1, 0.05, 0.05, 0.05};

    double& operator[](Signal s) { return values[s]; }
    double operator[](Signal s) const { return values[s]; }
    /// Throws UsageError on non-finite weights.
    void validate() const;
};

/// Raw (unnormalized) signals per file.
std::vector<SignalVector> raw_signals(const RepoFeatures& features, const RequestSignals& request);

/// Min-max normalizes each signal across files to [0, 1]; constant signals become 0.
void normalize_signals(std::vector<SignalVector>& signals);

double deterministic_score(const SignalVector& signals, const DeterministicWeights& weights);

struct ScoredFile {
    std::size_t file = 0;
    double score = 0;
};

/// Sorts by score descending, ties by path ascending.
void sort_scored(std::vector<ScoredFile>& scored, const Repository& repo);

enum class Stage { s120, s60, s40 };

struct StageSizes {
    std::size_t first = 120;
    std::size_t second = 60;
    std::size_t final_min = 40;
    std::size_t final_max = 60;

    void validate() const;
};

struct CandidateSet {
    std::vector<ScoredFile> entries;
    Stage stage = Stage::s40;

    std::vector<std::size_t> files() const;
    std::vector<double> scores() const;
};

/// Top-k truncations of one ordering. The final stage keeps final_min files and
/// extends through files tied with the boundary score, up to final_max.
/// Repositories smaller than a stage pass through.
CandidateSet progressive_filter(std::vector<ScoredFile> scored, const Repository& repo,
                                const StageSizes& sizes = {});

/// Scores every repository file (normalized signals . weights), sorted.
std::vector<ScoredFile> score_repository(const Repository& repo, const RepoFeatures& features,
                                         const RequestSignals& request,
                                         const DeterministicWeights& weights);

}  // namespace impactrank
