#include "impactrank/pipeline.hpp"

#include "impactrank/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace impactrank {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::ifstream open_input(const fs::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(std::string("cannot open ") + what + ": " + path.string());
    return in;
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

ojson payload_of(const Snapshot& s) {
    const Repository& repo = s.repo;
    ojson p;
    p["now"] = s.now;
    p["complete"] = repo.complete;
    p["warnings"] = {{"malformed_lines", repo.warnings.malformed_lines},
                     {"unresolved_calls", repo.warnings.unresolved_calls},
                     {"unresolved_symbols", repo.warnings.unresolved_symbols},
                     {"skipped_files", repo.warnings.skipped_files}};
    auto& files = p["files"] = ojson::array();
    for (std::size_t i = 0; i < repo.size(); ++i) {
        const FileRecord& f = repo.files[i];
        ojson jf;
        jf["id"] = f.file_id;
        jf["path"] = f.path;
        jf["loc"] = f.loc;
        jf["functions"] = f.function_count;
        jf["classes"] = f.class_count;
        jf["complexity"] = f.cyclomatic_complexity;
        jf["first_commit_ts"] = f.first_commit_ts ? ojson(*f.first_commit_ts) : ojson(nullptr);
        auto& syms = jf["symbols"] = ojson::array();
        for (const auto& sym : f.symbols) syms.push_back({sym.name, sym.kind});
        jf["call_names"] = repo.call_names[i];
        auto& tf = jf["terms"] = ojson::object();
        for (const auto& [term, count] : repo.term_freqs[i]) tf[term] = count;
        files.push_back(std::move(jf));
    }
    auto& edges = p["edges"] = ojson::array();
    for (const auto& e : repo.edges) edges.push_back({e.caller, e.callee, e.call_name, e.weight});
    auto& history = p["history"] = ojson::array();
    for (const auto& events : s.history.per_file) {
        ojson je = ojson::array();
        for (const auto& e : events) je.push_back({e.timestamp, e.author_id});
        history.push_back(std::move(je));
    }
    p["history_malformed"] = s.history.malformed_records;
    p["history_unknown_paths"] = s.history.unknown_paths;
    return p;
}

}  // namespace

Snapshot build_snapshot(const RunConfig& config) {
    Snapshot s;
    const bool calls_missing = config.calls.empty() || !fs::exists(config.calls);
    if (config.fallback_ast || (calls_missing && config.files.empty())) {
        if (config.source_root.empty()) throw UsageError("fallback ingest needs a source root");
        s.repo = fallback_ast_ingest(config.source_root);
    } else {
        if (config.files.empty()) throw UsageError("no files export given");
        auto files = open_input(config.files, "files export");
        std::ifstream symbols, calls;
        if (!config.symbols.empty()) symbols = open_input(config.symbols, "symbols export");
        if (!calls_missing) calls = open_input(config.calls, "calls export");
        s.repo = ingest_ndjson(files, config.symbols.empty() ? nullptr : &symbols,
                               calls_missing ? nullptr : &calls);
    }
    if (config.history.empty()) {
        s.history = empty_history(s.repo);
    } else {
        auto log = open_input(config.history, "history log");
        s.history = ingest_history(log, s.repo);
    }
    s.now = config.now ? *config.now : latest_timestamp(s.repo, s.history);
    s.content_hash = fnv1a64_hex(payload_of(s).dump());
    return s;
}


std::string snapshot_to_json(const Snapshot& s) {
    const ojson payload = payload_of(s);
    ojson doc;
    doc["version"] = kSnapshotVersion;
    doc["content_hash"] = fnv1a64_hex(payload.dump());
    doc["payload"] = payload;
    return doc.dump();
}

Snapshot snapshot_from_json(std::string_view text) {
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw DataError(std::string("corrupt snapshot: ") + e.what());
    }
    try {
        if (!doc.is_object() || !doc.contains("version")) throw DataError("corrupt snapshot: missing version");
        const int version = doc.at("version").get<int>();
        if (version != kSnapshotVersion)
            throw DataError("snapshot version mismatch: file has " + std::to_string(version) + ", expected " +
                            std::to_string(kSnapshotVersion));
        const ojson& p = doc.at("payload");
        Snapshot s;
        s.content_hash = doc.at("content_hash").get<std::string>();
        if (fnv1a64_hex(p.dump()) != s.content_hash) throw DataError("corrupt snapshot: content hash mismatch");

        Repository& repo = s.repo;
        s.now = p.at("now").get<std::int64_t>();
        repo.complete = p.at("complete").get<bool>();
        const ojson& w = p.at("warnings");
        repo.warnings.malformed_lines = w.at("malformed_lines").get<std::int64_t>();
        repo.warnings.unresolved_calls = w.at("unresolved_calls").get<std::int64_t>();
        repo.warnings.unresolved_symbols = w.at("unresolved_symbols").get<std::int64_t>();
        repo.warnings.skipped_files = w.at("skipped_files").get<std::int64_t>();
        for (const auto& jf : p.at("files")) {
            FileRecord f;
            f.file_id = jf.at("id").get<std::string>();
            f.path = jf.at("path").get<std::string>();
            f.loc = jf.at("loc").get<std::int64_t>();
            f.function_count = jf.at("functions").get<std::int64_t>();
            f.class_count = jf.at("classes").get<std::int64_t>();
            f.cyclomatic_complexity = jf.at("complexity").get<double>();
            if (!jf.at("first_commit_ts").is_null()) f.first_commit_ts = jf.at("first_commit_ts").get<std::int64_t>();
            for (const auto& sym : jf.at("symbols"))
                f.symbols.push_back({sym.at(0).get<std::string>(), sym.at(1).get<std::string>()});
            const std::size_t index = repo.files.size();
            for (const auto& sym : f.symbols) repo.symbol_index[sym.name].insert(index);
            repo.call_names.push_back(jf.at("call_names").get<std::set<std::string>>());
            std::map<std::string, std::int64_t> tf;
            for (const auto& [term, count] : jf.at("terms").items()) tf[term] = count.get<std::int64_t>();
            repo.term_freqs.push_back(std::move(tf));
            repo.files.push_back(std::move(f));
        }
        for (const auto& je : p.at("edges")) {
            CallEdge e;
            e.caller = je.at(0).get<std::size_t>();
            e.callee = je.at(1).get<std::size_t>();
            e.call_name = je.at(2).get<std::string>();
            e.weight = je.at(3).get<std::int64_t>();
            if (e.caller >= repo.size() || e.callee >= repo.size())
                throw DataError("corrupt snapshot: edge endpoint out of range");
            repo.edges.push_back(std::move(e));
        }
        repo.reindex();
        const ojson& h = p.at("history");
        if (h.size() != repo.size()) throw DataError("corrupt snapshot: history size mismatch");
        s.history.per_file.resize(repo.size());
        for (std::size_t i = 0; i < repo.size(); ++i)
            for (const auto& je : h[i])
                s.history.per_file[i].push_back({i, je.at(0).get<std::int64_t>(), je.at(1).get<std::string>()});
        s.history.malformed_records = p.at("history_malformed").get<std::int64_t>();
        s.history.unknown_paths = p.at("history_unknown_paths").get<std::int64_t>();
        if (repo.files.empty()) throw DataError("corrupt snapshot: no files");
        return s;
    } catch (const ojson::exception& e) {
        throw DataError(std::string("snapshot schema mismatch: ") + e.what());
    }
}

void save_snapshot(const Snapshot& snapshot, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write snapshot: " + path.string());
    out << snapshot_to_json(snapshot);
    if (!out) throw DataError("cannot write snapshot: " + path.string());
}

Snapshot load_snapshot(const fs::path& path) {
    auto in = open_input(path, "snapshot");
    std::ostringstream buf;
    buf << in.rdbuf();
    return snapshot_from_json(buf.str());
}

Ranker::Ranker(Snapshot snapshot, RunConfig config, std::shared_ptr<const SimilarityProvider> provider)
    : snapshot_(std::move(snapshot)), config_(std::move(config)), provider_(std::move(provider)) {
    config_.weights.validate();
    config_.stages.validate();
    if (!provider_) provider_ = std::make_shared<HashedBagSimilarity>();
    features_ = RepoFeatures::build(snapshot_.repo, snapshot_.history, snapshot_.now, config_.pagerank);
}

PreparedRequest Ranker::prepare(const ChangeRequest& request) const {
    if (request.text.empty()) throw DataError("change request text is empty");
    PreparedRequest p;
    p.request = request;
    if (config_.keyword_mode == KeywordMode::llm) {
        auto result = extract_keywords_llm(request, config_.llm);
        p.keywords = std::move(result.keywords);
        p.keyword_fallback = result.fell_back;
    } else {
        p.keywords = extract_keywords_local(request);
    }
    p.signals = compute_request_signals(snapshot_.repo, features_, request, p.keywords, *provider_, config_.bm25);
    p.scored = score_repository(snapshot_.repo, features_, p.signals, config_.weights);
    p.candidates = progressive_filter(p.scored, snapshot_.repo, config_.stages);
    return p;
}

namespace {

// Orders rows by final score, then deterministic score; the stable sort keeps the
// candidate order (deterministic score, then path) for the remaining ties.
std::vector<std::size_t> final_order(const Eigen::VectorXd& final_scores, const Eigen::VectorXd& deterministic) {
    std::vector<std::size_t> order(static_cast<std::size_t>(final_scores.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        if (final_scores[ia] != final_scores[ib]) return final_scores[ia] > final_scores[ib];
        return deterministic[ia] > deterministic[ib];
    });
    return order;
}

struct Scoring {
    Eigen::VectorXd final_scores;
    Eigen::VectorXd adjustments;
    Eigen::VectorXd pagerank_terms;
};

Scoring apply_model(const Eigen::MatrixXd& scaled, const Eigen::VectorXd& deterministic,
                    const AttentionModel* model, RankingReport& report) {
    const auto n = deterministic.size();
    Scoring s{deterministic, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    if (!model || n == 0) return s;
    AttentionOutput out = forward(scaled, *model);
    s.final_scores = combine_scores(deterministic, out.adjustments, out.attention_pagerank,
                                    model->config.combine_mode, model->config.pagerank_weight);
    s.adjustments = out.adjustments;
    if (model->config.combine_mode != CombineMode::multiplicative)
        s.pagerank_terms = model->config.pagerank_weight * out.attention_pagerank;
    report.used_model = true;
    report.combine_mode = std::string(to_string(model->config.combine_mode));
    report.averaged_attention = std::move(out.averaged_attention);
    report.per_head_attention = std::move(out.per_head_attention);
    report.attention_pagerank = std::move(out.attention_pagerank);
    return s;
}

void fill_metrics(RankingReport& report, const std::set<std::string>& truth) {
    if (truth.empty()) return;
    const auto ids = report.ranked_ids();
    report.recall10 = recall_at_k(ids, truth, 10);
    report.recall50 = recall_at_k(ids, truth, 50);
    report.reciprocal_rank = reciprocal_rank(ids, truth);
}

}  // namespace

RankingReport Ranker::rank(const PreparedRequest& prepared, const AttentionModel* model,
                           const std::set<std::string>* truth) const {
    const Repository& repo = snapshot_.repo;
    const auto files = prepared.candidates.files();
    const auto det_scores = prepared.candidates.scores();
    const Eigen::VectorXd det = Eigen::Map<const Eigen::VectorXd>(det_scores.data(),
                                                                 static_cast<Eigen::Index>(det_scores.size()));
    RankingReport report;
    report.request_id = prepared.request.request_id;
    report.keywords = prepared.keywords.keywords;
    report.keyword_source = prepared.keywords.source == KeywordSource::llm ? "llm" : "local";

    Eigen::MatrixXd scaled;
    if (model)
        scaled = build_feature_matrix(files, features_, prepared.signals, prepared.request.change_type, model->scaler);
    const Scoring s = apply_model(scaled, det, model, report);

    for (std::size_t i : final_order(s.final_scores, det)) {
        const auto r = static_cast<Eigen::Index>(i);
        const FileRecord& f = repo.files[files[i]];
        report.ranked.push_back(
            {f.file_id, f.path, s.final_scores[r], det[r], s.adjustments[r], s.pagerank_terms[r], i});
    }
    if (truth) fill_metrics(report, *truth);
    return report;
}

RankingReport Ranker::rank(const ChangeRequest& request, const AttentionModel* model,
                           const std::set<std::string>* truth) const {
    return rank(prepare(request), model, truth);
}

LabeledCase Ranker::labeled_case(const ChangeRequest& request,
                                 const std::optional<std::vector<std::string>>& candidate_ids,
                                 const std::vector<std::string>& positive_ids) const {
    const Repository& repo = snapshot_.repo;
    const PreparedRequest p = prepare(request);
    std::vector<std::size_t> files;
    std::vector<double> det;
    if (candidate_ids) {
        std::vector<double> score_of(repo.size(), 0.0);
        for (const auto& e : p.scored) score_of[e.file] = e.score;
        for (const auto& id : *candidate_ids) {
            const auto idx = repo.find_id(id);
            if (!idx) throw DataError("unknown candidate file id: " + id);
            files.push_back(*idx);
            det.push_back(score_of[*idx]);
        }
    } else {
        files = p.candidates.files();
        det = p.candidates.scores();
    }

    LabeledCase c;
    c.request = request;
    c.features = raw_feature_matrix(files, features_, p.signals, request.change_type);
    c.deterministic = Eigen::Map<const Eigen::VectorXd>(det.data(), static_cast<Eigen::Index>(det.size()));
    const std::set<std::string> positives(positive_ids.begin(), positive_ids.end());
    for (std::size_t i = 0; i < files.size(); ++i) {
        c.file_ids.push_back(repo.files[files[i]].file_id);
        if (positives.count(c.file_ids.back())) c.positives.push_back(i);
    }
    c.truth_ids.assign(positives.begin(), positives.end());
    return c;
}

RankingReport rank_case(const LabeledCase& c, const AttentionModel* model) {
    RankingReport report;
    report.request_id = c.request.request_id;
    Eigen::MatrixXd scaled;
    if (model && c.features.rows() > 0) scaled = apply_scaler(model->scaler, c.features);
    const Scoring s = apply_model(scaled, c.deterministic, model, report);
    for (std::size_t i : final_order(s.final_scores, c.deterministic)) {
        const auto r = static_cast<Eigen::Index>(i);
        const std::string id = i < c.file_ids.size() ? c.file_ids[i] : std::to_string(i);
        report.ranked.push_back({id, id, s.final_scores[r], c.deterministic[r], s.adjustments[r],
                                 s.pagerank_terms[r], i});
    }
    fill_metrics(report, {c.truth_ids.begin(), c.truth_ids.end()});
    return report;
}

namespace {

ChangeRequest request_from(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("change request must be a JSON object");
    ChangeRequest r;
    if (j.contains("id")) r.request_id = j.at("id").get<std::string>();
    else if (j.contains("request_id")) r.request_id = j.at("request_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    if (j.contains("change_type")) r.change_type = parse_change_type(j.at("change_type").get<std::string>());
    if (j.contains("timestamp")) r.timestamp = j.at("timestamp").get<std::int64_t>();
    if (r.text.empty()) throw DataError("change request text is empty");
    return r;
}

}  // namespace

ChangeRequest request_from_json(std::string_view json_text) {
    try {
        return request_from(nlohmann::json::parse(json_text));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed change request: ") + e.what());
    }
}

std::vector<CorpusRecord> read_labeled_corpus(std::istream& in) {
    std::vector<CorpusRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            CorpusRecord rec;
            rec.request = request_from(j.at("request"));
            if (j.contains("candidates") && !j.at("candidates").is_null())
                rec.candidates = j.at("candidates").get<std::vector<std::string>>();
            rec.positives = j.at("positives").get<std::vector<std::string>>();
            out.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("labeled corpus line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("labeled corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<CorpusRecord> read_labeled_corpus(const fs::path& path) {
    auto in = open_input(path, "labeled corpus");
    return read_labeled_corpus(in);
}

}  // namespace impactrank
