#include "impactrank/deterministic.hpp"

#include "impactrank/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace impactrank {

const std::array<std::string_view, kSignalCount>& signal_names() {
    static const std::array<std::string_view, kSignalCount> names = {
        "bm25", "hit_fraction", "path_hits", "symbol_hits", "call_hits", "route_hits",
        "db_hits", "pagerank", "fan_in", "churn_recent", "embedding_cosine"};
    return names;
}

void DeterministicWeights::validate() const {
    for (std::size_t i = 0; i < kSignalCount; ++i)
        if (!std::isfinite(values[i]))
            throw UsageError("deterministic weight '" + std::string(signal_names()[i]) + "' is not finite");
}

std::vector<SignalVector> raw_signals(const RepoFeatures& features, const RequestSignals& request) {
    std::vector<SignalVector> out(request.hits.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const KeywordHits& h = request.hits[i];
        SignalVector& s = out[i];
        s[kSigBm25] = h.bm25;
        s[kSigHitFraction] = h.hit_fraction;
        s[kSigPathHits] = static_cast<double>(h.path_hits);
        s[kSigSymbolHits] = static_cast<double>(h.symbol_hits);
        s[kSigCallHits] = static_cast<double>(h.call_hits);
        s[kSigRouteHits] = static_cast<double>(h.route_hits);
        s[kSigDbHits] = static_cast<double>(h.db_hits);
        s[kSigPageRank] = features.pagerank[i];
        s[kSigFanIn] = features.degrees[i].fan_in;
        s[kSigChurnRecent] = features.churn[i].changes_in_window;
        s[kSigEmbedding] = request.embedding[i];
    }
    return out;
}

void normalize_signals(std::vector<SignalVector>& signals) {
    if (signals.empty()) return;
    for (std::size_t c = 0; c < kSignalCount; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& s : signals) {
            lo = std::min(lo, s[c]);
            hi = std::max(hi, s[c]);
        }
        const double range = hi - lo;
        for (auto& s : signals) s[c] = range > 0 ? (s[c] - lo) / range : 0.0;
    }
}

double deterministic_score(const SignalVector& signals, const DeterministicWeights& weights) {
    double score = 0;
    for (std::size_t i = 0; i < kSignalCount; ++i) score += weights.values[i] * signals[i];
    return score;
}

void sort_scored(std::vector<ScoredFile>& scored, const Repository& repo) {
    std::sort(scored.begin(), scored.end(), [&](const ScoredFile& a, const ScoredFile& b) {
        if (a.score != b.score) return a.score > b.score;
        return repo.files[a.file].path < repo.files[b.file].path;
    });
}

void StageSizes::validate() const {
    if (!(first >= second && second >= final_max && final_max >= final_min && final_min > 0))
        throw UsageError("stage sizes must satisfy first >= second >= final_max >= final_min > 0");
}

std::vector<std::size_t> CandidateSet::files() const {
    std::vector<std::size_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.file);
    return out;
}

std::vector<double> CandidateSet::scores() const {
    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.score);
    return out;
}

CandidateSet progressive_filter(std::vector<ScoredFile> scored, const Repository& repo,
                                const StageSizes& sizes) {
    sizes.validate();
    sort_scored(scored, repo);

    auto truncate = [&](std::size_t k) {
        if (scored.size() > k) scored.resize(k);
    };
    truncate(sizes.first);
    truncate(sizes.second);

    std::size_t keep = std::min(sizes.final_min, scored.size());
    const std::size_t cap = std::min(sizes.final_max, scored.size());
    while (keep > 0 && keep < cap && scored[keep].score == scored[keep - 1].score) ++keep;
    truncate(keep);

    return CandidateSet{std::move(scored), Stage::s40};
}

std::vector<ScoredFile> score_repository(const Repository& repo, const RepoFeatures& features,
                                         const RequestSignals& request,
                                         const DeterministicWeights& weights) {
    auto signals = raw_signals(features, request);
    normalize_signals(signals);
    std::vector<ScoredFile> scored(signals.size());
    for (std::size_t i = 0; i < signals.size(); ++i)
        scored[i] = ScoredFile{i, deterministic_score(signals[i], weights)};
    sort_scored(scored, repo);
    return scored;
}

}  // namespace impactrank
