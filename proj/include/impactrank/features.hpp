#pragma once

// Per-file features for a change request: the 20-dimensional vector fed to the
// attention layer, plus fine-grained keyword hits used by deterministic ranking.

#include "impactrank/depgraph.hpp"
#include "impactrank/history.hpp"
#include "impactrank/keywords.hpp"
#include "impactrank/repository.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace impactrank {

inline constexpr std::size_t kFeatureDim = 20;

/// Column layout of the feature vector.
enum Feature : std::size_t {
    kTotalChanges = 0,
    kChangesLast12Mo,
    kTopContributorPct,
    kDaysSinceLastChange,
    kLoc,
    kFunctionCount,
    kClassCount,
    kComplexity,
    kPageRank,
    kInDegree,
    kOutDegree,
    kFanIn,
    kFanOut,
    kBm25,
    kKeywordHitFraction,
    kEmbeddingCosine,
    kIsBugfix,
    kIsFeature,
    kIsRefactor,
    kFileAgeDays,
};

const std::array<std::string_view, kFeatureDim>& feature_names();

using FeatureVector = std::array<double, kFeatureDim>;

struct KeywordHits {
    std::int64_t path_hits = 0;
    std::int64_t symbol_hits = 0;
    std::int64_t call_hits = 0;
    std::int64_t route_hits = 0;
    std::int64_t db_hits = 0;
    double bm25 = 0;
    double hit_fraction = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Document frequencies over the whole repository.
struct CorpusStats {
    std::map<std::string, std::int64_t> doc_freq;
    std::int64_t doc_count = 0;
    double avg_doc_length = 0;

    static CorpusStats build(const std::vector<std::map<std::string, std::int64_t>>& docs);
};

/// BM25 idf, floored at zero: max(0, ln((N - df + 0.5) / (df + 0.5))).
double bm25_idf(std::int64_t doc_count, std::int64_t doc_freq);

double bm25(const KeywordSet& keywords, const std::map<std::string, std::int64_t>& term_freqs,
            const CorpusStats& stats, const Bm25Params& params = {});

/// Term -> files whose symbols (or call names) contain that term.
struct NameIndex {
    std::map<std::string, std::set<std::size_t>> symbol_terms;
    std::map<std::string, std::set<std::size_t>> call_terms;
    std::vector<bool> registers_routes;  // file has a route-registration call
    std::vector<bool> touches_db;        // file has a database-operation call
    std::vector<std::set<std::string>> route_terms;  // terms of route/literal symbols

    static NameIndex build(const Repository& repo);
};

/// True for call names like "app.get", "router.post", "bp.route".
bool is_route_registration(std::string_view call_name);
/// True for call names whose last segment is add/commit/query/execute.
bool is_db_operation(std::string_view call_name);

KeywordHits keyword_hits(const KeywordSet& keywords, std::size_t file, const Repository& repo,
                         const NameIndex& names);

/// Pluggable text-similarity source for the embedding slot.
class SimilarityProvider {
public:
    virtual ~SimilarityProvider() = default;
    virtual double similarity(std::string_view a, std::string_view b) const = 0;
};

/// Hashed bag-of-tokens vectors (dimension 256, fixed seed) compared by cosine.
class HashedBagSimilarity final : public SimilarityProvider {
public:
    static constexpr std::size_t kDim = 256;
    static constexpr std::uint64_t kSeed = 0x9e3779b97f4a7c15ULL;

    double similarity(std::string_view a, std::string_view b) const override;
    std::array<double, kDim> embed(std::string_view text) const;
};

/// Provider similarity clamped to [-1, 1]. Provider failures and non-finite
/// values yield 0.0 and increment `*failures` when given.
double embedding_cosine(std::string_view request_text, std::string_view file_text,
                        const SimilarityProvider& provider, std::int64_t* failures = nullptr);

/// Text of a file as seen by the similarity provider.
std::string file_text(const Repository& repo, std::size_t file);

/// Per-dimension standard scaling.
struct FeatureScaler {
    std::array<double, kFeatureDim> mean{};
    std::array<double, kFeatureDim> std{};
    bool fitted = false;

    static FeatureScaler identity();
    bool operator==(const FeatureScaler&) const = default;
};

/// Mean and population std per column; std < 1e-12 becomes 1. Needs >= 2 rows.
FeatureScaler fit_scaler(const Eigen::MatrixXd& training_rows);

/// (x - mean) / std per column. Throws std::logic_error if the scaler is not fitted.
Eigen::MatrixXd apply_scaler(const FeatureScaler& scaler, const Eigen::MatrixXd& raw);

/// Everything about a repository that does not depend on the change request.
struct RepoFeatures {
    std::vector<ChurnStats> churn;
    std::vector<double> pagerank;
    std::vector<DegreeFeatures> degrees;
    CorpusStats corpus;
    NameIndex names;
    std::vector<std::array<double, 4>> structure;  // loc, functions, classes, complexity
    std::vector<std::string> texts;                // file_text per file

    static RepoFeatures build(const Repository& repo, const History& history, std::int64_t now,
                              const PageRankOptions& pagerank_options = {});
};

/// Request-dependent signals for every repository file.
struct RequestSignals {
    std::vector<KeywordHits> hits;
    std::vector<double> embedding;
    std::int64_t provider_failures = 0;
};

RequestSignals compute_request_signals(const Repository& repo, const RepoFeatures& features,
                                       const ChangeRequest& request, const KeywordSet& keywords,
                                       const SimilarityProvider& provider,
                                       const Bm25Params& bm25_params = {});

/// Unscaled feature vector of one file.
FeatureVector raw_feature_vector(std::size_t file, const RepoFeatures& features,
                                 const RequestSignals& signals, ChangeType change_type);

/// Unscaled N x 20 matrix for the given candidate files.
Eigen::MatrixXd raw_feature_matrix(std::span<const std::size_t> candidates,
                                   const RepoFeatures& features, const RequestSignals& signals,
                                   ChangeType change_type);

/// Scaled N x 20 matrix; throws std::logic_error if the scaler is not fitted.
Eigen::MatrixXd build_feature_matrix(std::span<const std::size_t> candidates,
                                     const RepoFeatures& features, const RequestSignals& signals,
                                     ChangeType change_type, const FeatureScaler& scaler);

/// CSV with a header of feature names, one row per candidate.
std::string feature_matrix_csv(const Eigen::MatrixXd& matrix);

}  // namespace impactrank
