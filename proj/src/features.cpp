#include "impactrank/features.hpp"

#include "impactrank/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace impactrank {

const std::array<std::string_view, kFeatureDim>& feature_names() {
    static const std::array<std::string_view, kFeatureDim> names = {
        "total_change_count", "changes_last_12mo", "top_contributor_pct", "days_since_last_change",
        "loc", "function_count", "class_count", "cyclomatic_complexity",
        "pagerank", "in_degree", "out_degree", "fan_in", "fan_out",
        "bm25_score", "keyword_hit_fraction", "embedding_cosine",
        "is_bugfix", "is_feature", "is_refactor", "file_age_days"};
    return names;
}

// ---------------------------------------------------------------------------
// BM25

CorpusStats CorpusStats::build(const std::vector<std::map<std::string, std::int64_t>>& docs) {
    CorpusStats stats;
    stats.doc_count = static_cast<std::int64_t>(docs.size());
    double total_length = 0;
    for (const auto& doc : docs) {
        for (const auto& [term, tf] : doc) {
            ++stats.doc_freq[term];
            total_length += static_cast<double>(tf);
        }
    }
    stats.avg_doc_length = docs.empty() ? 0.0 : total_length / static_cast<double>(docs.size());
    return stats;
}

double bm25_idf(std::int64_t doc_count, std::int64_t doc_freq) {
    const double n = static_cast<double>(doc_count);
    const double df = static_cast<double>(doc_freq);
    return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
}

double bm25(const KeywordSet& keywords, const std::map<std::string, std::int64_t>& term_freqs,
            const CorpusStats& stats, const Bm25Params& params) {
    if (keywords.empty() || stats.doc_count == 0) return 0.0;
    double doc_length = 0;
    for (const auto& [term, tf] : term_freqs) doc_length += static_cast<double>(tf);
    const double avg = stats.avg_doc_length > 0 ? stats.avg_doc_length : 1.0;

    double score = 0;
    for (const auto& term : keywords.keywords) {
        auto df_it = stats.doc_freq.find(term);
        auto tf_it = term_freqs.find(term);
        if (df_it == stats.doc_freq.end() || tf_it == term_freqs.end()) continue;
        const double tf = static_cast<double>(tf_it->second);
        const double idf = bm25_idf(stats.doc_count, df_it->second);
        const double norm = params.k1 * (1.0 - params.b + params.b * doc_length / avg);
        score += idf * tf * (params.k1 + 1.0) / (tf + norm);
    }
    return score;
}

// ---------------------------------------------------------------------------
// Keyword hits

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string_view> dotted_segments(std::string_view name) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= name.size(); ++i) {
        if (i == name.size() || name[i] == '.') {
            parts.push_back(name.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

bool contains(const std::map<std::string, std::set<std::size_t>>& index, const std::string& term,
              std::size_t file) {
    auto it = index.find(term);
    return it != index.end() && it->second.count(file) > 0;
}

}  // namespace

bool is_route_registration(std::string_view call_name) {
    static const std::set<std::string, std::less<>> receivers = {"app", "router", "api", "bp",
                                                                 "blueprint", "server", "routes"};
    static const std::set<std::string, std::less<>> verbs = {"get", "post", "put", "delete", "patch",
                                                             "route", "head", "options"};
    const std::string name = lower(call_name);
    if (name.ends_with("add_url_rule") || name.ends_with("add_api_route")) return true;
    const auto parts = dotted_segments(name);
    if (parts.size() < 2) return false;
    return receivers.count(parts[parts.size() - 2]) > 0 && verbs.count(parts.back()) > 0;
}

bool is_db_operation(std::string_view call_name) {
    static const std::set<std::string, std::less<>> ops = {"add", "commit", "query", "execute"};
    const std::string name = lower(call_name);
    return ops.count(dotted_segments(name).back()) > 0;
}

NameIndex NameIndex::build(const Repository& repo) {
    NameIndex idx;
    idx.registers_routes.assign(repo.size(), false);
    idx.touches_db.assign(repo.size(), false);
    idx.route_terms.assign(repo.size(), {});
    for (std::size_t i = 0; i < repo.size(); ++i) {
        for (const auto& sym : repo.files[i].symbols) {
            const auto terms = tokenize_terms(sym.name);
            for (const auto& t : terms) idx.symbol_terms[t].insert(i);
            if (sym.kind == "route" || sym.kind == "literal") {
                idx.route_terms[i].insert(terms.begin(), terms.end());
                if (sym.kind == "route") idx.registers_routes[i] = true;
            }
        }
        if (i < repo.call_names.size()) {
            for (const auto& name : repo.call_names[i]) {
                for (const auto& t : tokenize_terms(name)) idx.call_terms[t].insert(i);
                if (is_route_registration(name)) idx.registers_routes[i] = true;
                if (is_db_operation(name)) idx.touches_db[i] = true;
            }
        }
    }
    return idx;
}

KeywordHits keyword_hits(const KeywordSet& keywords, std::size_t file, const Repository& repo,
                         const NameIndex& names) {
    KeywordHits hits;
    if (keywords.empty()) return hits;
    const std::string path = lower(repo.files[file].path);
    const auto& tf = repo.term_freqs[file];

    std::int64_t matched = 0;
    for (const auto& k : keywords.keywords) {
        const bool in_path = path.find(k) != std::string::npos;
        const bool in_symbols = contains(names.symbol_terms, k, file);
        const bool in_calls = contains(names.call_terms, k, file);
        const bool in_routes = names.route_terms[file].count(k) > 0;
        const bool in_text = tf.count(k) > 0;

        hits.path_hits += in_path;
        hits.symbol_hits += in_symbols;
        hits.call_hits += in_calls;
        if (names.registers_routes[file] && (in_routes || in_symbols || in_calls)) ++hits.route_hits;
        if (names.touches_db[file] && (in_symbols || in_calls)) ++hits.db_hits;
        if (in_path || in_symbols || in_calls || in_routes || in_text) ++matched;
    }
    hits.hit_fraction = static_cast<double>(matched) / static_cast<double>(keywords.size());
    return hits;
}

// ---------------------------------------------------------------------------
// Similarity

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::array<double, HashedBagSimilarity::kDim> HashedBagSimilarity::embed(std::string_view text) const {
    std::array<double, kDim> v{};
    for (const auto& token : tokenize_terms(text)) v[mix(fnv1a(token) ^ kSeed) % kDim] += 1.0;
    return v;
}

double HashedBagSimilarity::similarity(std::string_view a, std::string_view b) const {
    const auto va = embed(a);
    const auto vb = embed(b);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < kDim; ++i) {
        dot += va[i] * vb[i];
        na += va[i] * va[i];
        nb += vb[i] * vb[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double embedding_cosine(std::string_view request_text, std::string_view file_text,
                        const SimilarityProvider& provider, std::int64_t* failures) {
    try {
        const double s = provider.similarity(request_text, file_text);
        if (std::isfinite(s)) return std::clamp(s, -1.0, 1.0);
    } catch (const std::exception&) {
    }
    if (failures) ++*failures;
    return 0.0;
}

std::string file_text(const Repository& repo, std::size_t file) {
    std::string text = repo.files[file].path;
    for (const auto& s : repo.files[file].symbols) {
        text += ' ';
        text += s.name;
    }
    if (file < repo.call_names.size()) {
        for (const auto& n : repo.call_names[file]) {
            text += ' ';
            text += n;
        }
    }
    if (!repo.complete) {
        // Fallback repositories index source content, not just names.
        for (const auto& [term, tf] : repo.term_freqs[file]) {
            for (std::int64_t i = 0; i < tf; ++i) {
                text += ' ';
                text += term;
            }
        }
    }
    return text;
}

// ---------------------------------------------------------------------------
// Scaling

FeatureScaler FeatureScaler::identity() {
    FeatureScaler s;
    s.mean.fill(0.0);
    s.std.fill(1.0);
    s.fitted = true;
    return s;
}

FeatureScaler fit_scaler(const Eigen::MatrixXd& rows) {
    if (rows.rows() < 2) throw DataError("fit_scaler: need at least 2 rows");
    if (static_cast<std::size_t>(rows.cols()) != kFeatureDim)
        throw DataError("fit_scaler: expected " + std::to_string(kFeatureDim) + " columns");
    FeatureScaler s;
    const double m = static_cast<double>(rows.rows());
    for (std::size_t c = 0; c < kFeatureDim; ++c) {
        const auto col = rows.col(static_cast<Eigen::Index>(c));
        const double mean = col.sum() / m;
        const double var = (col.array() - mean).square().sum() / m;
        const double sd = std::sqrt(var);
        s.mean[c] = mean;
        s.std[c] = sd < 1e-12 ? 1.0 : sd;
    }
    s.fitted = true;
    return s;
}

Eigen::MatrixXd apply_scaler(const FeatureScaler& scaler, const Eigen::MatrixXd& raw) {
    if (!scaler.fitted) throw std::logic_error("feature scaler is not fitted");
    if (static_cast<std::size_t>(raw.cols()) != kFeatureDim)
        throw std::invalid_argument("apply_scaler: expected " + std::to_string(kFeatureDim) + " columns");
    Eigen::MatrixXd out(raw.rows(), raw.cols());
    for (Eigen::Index c = 0; c < raw.cols(); ++c)
        out.col(c) = (raw.col(c).array() - scaler.mean[c]) / scaler.std[c];
    return out;
}

// ---------------------------------------------------------------------------
// Assembly

RepoFeatures RepoFeatures::build(const Repository& repo, const History& history, std::int64_t now,
                                 const PageRankOptions& pagerank_options) {
    RepoFeatures f;
    f.churn = churn_stats(repo, history, now);
    const DepGraph graph = DepGraph::build(repo);
    f.pagerank = impactrank::pagerank(graph.graph, pagerank_options).scores;
    f.degrees = graph.degrees;
    f.corpus = CorpusStats::build(repo.term_freqs);
    f.names = NameIndex::build(repo);
    f.structure.reserve(repo.size());
    for (const auto& file : repo.files) {
        f.structure.push_back({static_cast<double>(file.loc), static_cast<double>(file.function_count),
                               static_cast<double>(file.class_count), file.cyclomatic_complexity});
    }
    f.texts.reserve(repo.size());
    for (std::size_t i = 0; i < repo.size(); ++i) f.texts.push_back(file_text(repo, i));
    return f;
}

RequestSignals compute_request_signals(const Repository& repo, const RepoFeatures& features,
                                       const ChangeRequest& request, const KeywordSet& keywords,
                                       const SimilarityProvider& provider,
                                       const Bm25Params& bm25_params) {
    RequestSignals s;
    s.hits.resize(repo.size());
    s.embedding.resize(repo.size());
    for (std::size_t i = 0; i < repo.size(); ++i) {
        s.hits[i] = keyword_hits(keywords, i, repo, features.names);
        s.hits[i].bm25 = bm25(keywords, repo.term_freqs[i], features.corpus, bm25_params);
        s.embedding[i] = embedding_cosine(request.text, features.texts[i], provider, &s.provider_failures);
    }
    return s;
}

FeatureVector raw_feature_vector(std::size_t file, const RepoFeatures& features,
                                 const RequestSignals& signals, ChangeType change_type) {
    FeatureVector v{};
    const ChurnStats& churn = features.churn[file];
    v[kTotalChanges] = churn.total_changes;
    v[kChangesLast12Mo] = churn.changes_in_window;
    v[kTopContributorPct] = churn.top_contributor_pct;
    v[kDaysSinceLastChange] = churn.days_since_last_change;
    v[kLoc] = features.structure[file][0];
    v[kFunctionCount] = features.structure[file][1];
    v[kClassCount] = features.structure[file][2];
    v[kComplexity] = features.structure[file][3];
    v[kPageRank] = features.pagerank[file];
    v[kInDegree] = features.degrees[file].in_degree;
    v[kOutDegree] = features.degrees[file].out_degree;
    v[kFanIn] = features.degrees[file].fan_in;
    v[kFanOut] = features.degrees[file].fan_out;
    v[kBm25] = signals.hits[file].bm25;
    v[kKeywordHitFraction] = signals.hits[file].hit_fraction;
    v[kEmbeddingCosine] = signals.embedding[file];
    v[kIsBugfix] = change_type == ChangeType::bugfix ? 1.0 : 0.0;
    v[kIsFeature] = change_type == ChangeType::feature ? 1.0 : 0.0;
    v[kIsRefactor] = change_type == ChangeType::refactor ? 1.0 : 0.0;
    v[kFileAgeDays] = churn.age_days;
    return v;
}

Eigen::MatrixXd raw_feature_matrix(std::span<const std::size_t> candidates,
                                   const RepoFeatures& features, const RequestSignals& signals,
                                   ChangeType change_type) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(candidates.size()), static_cast<Eigen::Index>(kFeatureDim));
    for (std::size_t r = 0; r < candidates.size(); ++r) {
        const FeatureVector v = raw_feature_vector(candidates[r], features, signals, change_type);
        for (std::size_t c = 0; c < kFeatureDim; ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
    }
    return x;
}

Eigen::MatrixXd build_feature_matrix(std::span<const std::size_t> candidates,
                                     const RepoFeatures& features, const RequestSignals& signals,
                                     ChangeType change_type, const FeatureScaler& scaler) {
    if (!scaler.fitted) throw std::logic_error("feature scaler is not fitted");
    return apply_scaler(scaler, raw_feature_matrix(candidates, features, signals, change_type));
}

std::string feature_matrix_csv(const Eigen::MatrixXd& matrix) {
    std::ostringstream out;
    out.precision(17);
    const auto& names = feature_names();
    for (std::size_t c = 0; c < kFeatureDim; ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) out << (c ? "," : "") << matrix(r, c);
        out << '\n';
    }
    return out.str();
}

}  // namespace impactrank
