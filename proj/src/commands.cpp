#include "impactrank/commands.hpp"

#include "impactrank/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace impactrank {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void require_file(const fs::path& path, const char* what) {
    if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
    if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::optional<AttentionModel> load_optional_model(const RunConfig& config) {
    if (config.model.empty()) return std::nullopt;
    require_file(config.model, "checkpoint");
    return load_model(config.model);
}

Ranker make_ranker(const RunConfig& config) {
    require_file(config.snapshot, "snapshot");
    return Ranker(load_snapshot(config.snapshot), config);
}

SplitMetrics metrics_of(const std::vector<LabeledCase>& cases, const AttentionModel* model) {
    SplitMetrics m;
    std::vector<std::pair<std::vector<std::string>, std::set<std::string>>> ranked;
    for (const auto& c : cases) {
        if (c.truth_ids.empty()) continue;
        const RankingReport r = rank_case(c, model);
        m.recall10 += r.recall10->fraction;
        m.recall50 += r.recall50->fraction;
        m.all_found10 += r.recall10->all_found ? 1.0 : 0.0;
        m.all_found50 += r.recall50->all_found ? 1.0 : 0.0;
        ranked.emplace_back(r.ranked_ids(), std::set<std::string>(c.truth_ids.begin(), c.truth_ids.end()));
    }
    m.cases = ranked.size();
    if (m.cases) {
        const double n = static_cast<double>(m.cases);
        m.recall10 /= n;
        m.recall50 /= n;
        m.all_found10 /= n;
        m.all_found50 /= n;
        m.mrr = mrr(ranked);
    }
    return m;
}

std::vector<LabeledCase> build_cases(const Ranker& ranker, const std::vector<CorpusRecord>& corpus) {
    std::vector<LabeledCase> cases;
    cases.reserve(corpus.size());
    for (const auto& rec : corpus) cases.push_back(ranker.labeled_case(rec.request, rec.candidates, rec.positives));
    return cases;
}

ojson metrics_json(const SplitMetrics& m) {
    return {{"cases", m.cases},         {"recall@10", m.recall10},       {"recall@50", m.recall50},
            {"all_found@10", m.all_found10}, {"all_found@50", m.all_found50}, {"mrr", m.mrr}};
}

}  // namespace

IndexResult cmd_index(const RunConfig& config) {
    if (config.snapshot.empty()) throw UsageError("index needs --snapshot");
    if (config.fallback_ast) {
        if (config.source_root.empty()) throw UsageError("--fallback-ast needs --source-root");
        if (!fs::is_directory(config.source_root))
            throw UsageError("source root not found: " + config.source_root.string());
    } else {
        require_file(config.files, "files export");
        if (!config.symbols.empty()) require_file(config.symbols, "symbols export");
        if (!config.calls.empty()) require_file(config.calls, "calls export");
    }
    if (!config.history.empty()) require_file(config.history, "history log");

    const Snapshot snapshot = build_snapshot(config);
    save_snapshot(snapshot, config.snapshot);
    IndexResult r;
    r.snapshot_path = config.snapshot;
    r.content_hash = snapshot.content_hash;
    r.file_count = snapshot.repo.size();
    r.edge_count = snapshot.repo.edges.size();
    r.complete = snapshot.repo.complete;
    r.warnings = snapshot.repo.warnings;
    return r;
}

RankingReport cmd_rank(const RunConfig& config, const ChangeRequest& request) {
    const Ranker ranker = make_ranker(config);
    const auto model = load_optional_model(config);
    RankingReport report = ranker.rank(request, model ? &*model : nullptr);
    if (report.ranked.size() > config.top_k) report.ranked.resize(config.top_k);
    if (!config.out_dir.empty()) write_text(config.out_dir / "report.json", report_to_json(report));
    return report;
}

TrainSummary cmd_train(const RunConfig& config, const fs::path& corpus_path) {
    if (!config.seed) throw UsageError("train needs --seed");
    require_file(corpus_path, "labeled corpus");
    fs::path checkpoint = config.model;
    if (checkpoint.empty()) {
        if (config.out_dir.empty()) throw UsageError("train needs --model or --out-dir");
        checkpoint = config.out_dir / "model.ckpt";
    }
    const Ranker ranker = make_ranker(config);
    Split split = temporal_split(build_cases(ranker, read_labeled_corpus(corpus_path)), config.train);

    TrainConfig tc = config.train;
    tc.seed = *config.seed;
    TrainSummary s;
    s.result = train(split.train, split.val, config.attention, tc);
    s.checkpoint = checkpoint;
    if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
    save_model(s.result.model, checkpoint);
    s.log_path = checkpoint;
    s.log_path += ".log.ndjson";
    write_text(s.log_path, training_log_ndjson(s.result.log));
    s.val = metrics_of(split.val, &s.result.model);
    s.test = metrics_of(split.test, &s.result.model);
    s.test_deterministic = metrics_of(split.test, nullptr);
    return s;
}

SplitMetrics summarize(const std::vector<CaseComparison>& cases, bool model) {
    SplitMetrics m;
    std::vector<std::pair<std::vector<std::string>, std::set<std::string>>> ranked;
    for (const auto& c : cases) {
        const std::set<std::string> truth(c.truth.begin(), c.truth.end());
        const auto& ids = model ? c.model_ranking : c.deterministic_ranking;
        const RecallResult r10 = recall_at_k(ids, truth, 10);
        const RecallResult r50 = recall_at_k(ids, truth, 50);
        m.recall10 += r10.fraction;
        m.recall50 += r50.fraction;
        m.all_found10 += r10.all_found ? 1.0 : 0.0;
        m.all_found50 += r50.all_found ? 1.0 : 0.0;
        ranked.emplace_back(ids, truth);
    }
    m.cases = cases.size();
    if (m.cases) {
        const double n = static_cast<double>(m.cases);
        m.recall10 /= n;
        m.recall50 /= n;
        m.all_found10 /= n;
        m.all_found50 /= n;
        m.mrr = mrr(ranked);
    }
    return m;
}

EvalSummary cmd_eval(const RunConfig& config, const fs::path& corpus_path) {
    require_file(corpus_path, "labeled corpus");
    const auto model = load_optional_model(config);
    if (!model) throw UsageError("eval needs --model");
    const Ranker ranker = make_ranker(config);
    EvalSummary summary;
    for (const auto& c : build_cases(ranker, read_labeled_corpus(corpus_path))) {
        if (c.truth_ids.empty()) {
            std::cerr << "warning: case " << c.request.request_id << " has no ground truth; skipped\n";
            continue;
        }
        const RankingReport det = rank_case(c, nullptr);
        const RankingReport att = rank_case(c, &*model);
        CaseComparison cc;
        cc.request_id = c.request.request_id;
        cc.truth = c.truth_ids;
        cc.deterministic_ranking = det.ranked_ids();
        cc.model_ranking = att.ranked_ids();
        cc.det_recall10 = det.recall10->fraction;
        cc.det_recall50 = det.recall50->fraction;
        cc.det_all_found10 = det.recall10->all_found;
        cc.det_all_found50 = det.recall50->all_found;
        cc.det_rr = *det.reciprocal_rank;
        cc.model_recall10 = att.recall10->fraction;
        cc.model_recall50 = att.recall50->fraction;
        cc.model_all_found10 = att.recall10->all_found;
        cc.model_all_found50 = att.recall50->all_found;
        cc.model_rr = *att.reciprocal_rank;
        summary.cases.push_back(std::move(cc));
    }
    summary.deterministic = summarize(summary.cases, false);
    summary.model = summarize(summary.cases, true);
    if (!config.out_dir.empty()) write_text(config.out_dir / "eval.json", eval_to_json(summary));
    return summary;
}

std::string eval_to_json(const EvalSummary& s) {
    ojson j;
    j["deterministic"] = metrics_json(s.deterministic);
    j["model"] = metrics_json(s.model);
    j["delta"] = {{"recall@10", s.model.recall10 - s.deterministic.recall10},
                  {"recall@50", s.model.recall50 - s.deterministic.recall50},
                  {"all_found@10", s.model.all_found10 - s.deterministic.all_found10},
                  {"all_found@50", s.model.all_found50 - s.deterministic.all_found50},
                  {"mrr", s.model.mrr - s.deterministic.mrr}};
    auto& cases = j["cases"] = ojson::array();
    for (const auto& c : s.cases) {
        cases.push_back({{"request_id", c.request_id},
                         {"truth", c.truth},
                         {"deterministic",
                          {{"recall@10", c.det_recall10},
                           {"recall@50", c.det_recall50},
                           {"all_found@10", c.det_all_found10},
                           {"all_found@50", c.det_all_found50},
                           {"reciprocal_rank", c.det_rr},
                           {"ranking", c.deterministic_ranking}}},
                         {"model",
                          {{"recall@10", c.model_recall10},
                           {"recall@50", c.model_recall50},
                           {"all_found@10", c.model_all_found10},
                           {"all_found@50", c.model_all_found50},
                           {"reciprocal_rank", c.model_rr},
                           {"ranking", c.model_ranking}}}});
    }
    return j.dump(2);
}

ExplainResult cmd_explain(const RunConfig& config, const ChangeRequest& request) {
    if (config.out_dir.empty()) throw UsageError("explain needs --out-dir");
    const Ranker ranker = make_ranker(config);
    const auto model = load_optional_model(config);
    ExplainResult r;
    r.report = ranker.rank(request, model ? &*model : nullptr);
    r.bundle_dir = config.out_dir;
    r.files = write_report_bundle(r.report, config.out_dir, config.top_n);
    return r;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void print_report(const RankingReport& report, std::ostream& out) {
    out << "request " << (report.request_id.empty() ? "-" : report.request_id) << "  mode "
        << (report.used_model ? report.combine_mode : "deterministic") << "  keywords";
    for (const auto& k : report.keywords) out << ' ' << k;
    out << '\n';
    out << "rank\tfinal\tdeterministic\tadjustment\tpagerank\tpath\n";
    char line[160];
    for (std::size_t i = 0; i < report.ranked.size(); ++i) {
        const auto& r = report.ranked[i];
        std::snprintf(line, sizeof line, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t", i + 1, r.final_score,
                      r.deterministic_score, r.adjustment, r.pagerank_term);
        out << line << r.path << '\n';
    }
}

void print_metrics(const char* label, const SplitMetrics& m, std::ostream& out) {
    char line[200];
    std::snprintf(line, sizeof line,
                  "%-16s cases %3zu  recall@10 %.4f  recall@50 %.4f  all_found@10 %.4f  all_found@50 %.4f  mrr %.4f\n",
                  label, m.cases, m.recall10, m.recall50, m.all_found10, m.all_found50, m.mrr);
    out << line;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Rank repository files by likelihood of being impacted by a change request"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string files, symbols, calls, history, source_root, snapshot, model, config_path, request_text,
        request_file, keyword_mode, out_dir, corpus, weights, change_type = "bugfix", request_id = "cli";
    std::size_t top_k = 0, top_n = 0;
    std::uint64_t seed = 0;
    std::int64_t now = 0;
    bool fallback_ast = false, as_json = false;

    auto* o_files = app.add_option("--files", files, "files.ndjson export");
    auto* o_symbols = app.add_option("--symbols", symbols, "symbols.ndjson export");
    auto* o_calls = app.add_option("--calls", calls, "calls.ndjson export");
    auto* o_history = app.add_option("--history", history, "history log (NDJSON)");
    auto* o_source = app.add_option("--source-root", source_root, "source tree for --fallback-ast");
    auto* o_snapshot = app.add_option("--snapshot", snapshot, "repository snapshot path");
    auto* o_model = app.add_option("--model", model, "model checkpoint path");
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--request", request_text, "change request text");
    app.add_option("--request-file", request_file, "change request file (JSON object or plain text)");
    app.add_option("--request-id", request_id, "identifier for --request");
    app.add_option("--change-type", change_type, "bugfix, feature or refactor");
    auto* o_top_k = app.add_option("--top-k", top_k, "number of ranked files to output");
    auto* o_top_n = app.add_option("--top-n", top_n, "files in explain heatmaps");
    auto* o_seed = app.add_option("--seed", seed, "random seed (required for train)");
    auto* o_now = app.add_option("--now", now, "reference instant, UTC seconds");
    auto* o_kw = app.add_option("--keyword-mode", keyword_mode, "local or llm")
                     ->check(CLI::IsMember({"local", "llm"}));
    auto* o_fallback = app.add_flag("--fallback-ast", fallback_ast, "ingest the source tree lexically");
    auto* o_out = app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--corpus", corpus, "labeled corpus (JSONL) for train and eval");
    app.add_option("--weights", weights, "JSON weights block for the deterministic score");
    app.add_flag("--json", as_json, "print JSON instead of a table");

    auto* index = app.add_subcommand("index", "ingest exports and persist a repository snapshot");
    auto* rank = app.add_subcommand("rank", "rank files for a change request");
    auto* train_cmd = app.add_subcommand("train", "train the attention layer on a labeled corpus");
    auto* eval = app.add_subcommand("eval", "compare deterministic and attention rankings");
    auto* explain = app.add_subcommand("explain", "write heatmap, decay and coverage exports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        RunConfig config;
        if (!config_path.empty()) {
            require_file(config_path, "config");
            config = load_config(config_path);
        }
        if (o_files->count()) config.files = files;
        if (o_symbols->count()) config.symbols = symbols;
        if (o_calls->count()) config.calls = calls;
        if (o_history->count()) config.history = history;
        if (o_source->count()) config.source_root = source_root;
        if (o_snapshot->count()) config.snapshot = snapshot;
        if (o_model->count()) config.model = model;
        if (o_out->count()) config.out_dir = out_dir;
        if (o_fallback->count()) config.fallback_ast = true;
        if (o_top_k->count()) config.top_k = top_k;
        if (o_top_n->count()) config.top_n = top_n;
        if (o_seed->count()) config.seed = seed;
        if (o_now->count()) config.now = now;
        if (o_kw->count()) config.keyword_mode = keyword_mode == "llm" ? KeywordMode::llm : KeywordMode::local;
        if (!weights.empty()) {
            require_file(weights, "weights");
            config.weights = load_weights(weights, config.weights);
        }

        auto request = [&] {
            if (request_text.empty() == request_file.empty())
                throw UsageError("give exactly one of --request or --request-file");
            if (!request_file.empty()) {
                const std::string text = read_file(request_file);
                const auto first = text.find_first_not_of(" \t\r\n");
                if (first != std::string::npos && text[first] == '{') return request_from_json(text);
                ChangeRequest r;
                r.request_id = fs::path(request_file).stem().string();
                r.text = text;
                r.change_type = parse_change_type(change_type);
                return r;
            }
            ChangeRequest r;
            r.request_id = request_id;
            r.text = request_text;
            r.change_type = parse_change_type(change_type);
            return r;
        };

        std::ostream& out = std::cout;
        if (*index) {
            const IndexResult r = cmd_index(config);
            out << "snapshot " << r.snapshot_path.string() << "\nhash " << r.content_hash << "\nfiles "
                << r.file_count << "\nedges " << r.edge_count << "\ncomplete " << (r.complete ? "yes" : "no")
                << "\nwarnings " << r.warnings.total() << " (malformed " << r.warnings.malformed_lines
                << ", unresolved calls " << r.warnings.unresolved_calls << ", unresolved symbols "
                << r.warnings.unresolved_symbols << ", skipped files " << r.warnings.skipped_files << ")\n";
        } else if (*rank) {
            const RankingReport r = cmd_rank(config, request());
            if (as_json) out << report_to_json(r) << '\n';
            else print_report(r, out);
        } else if (*train_cmd) {
            if (corpus.empty()) throw UsageError("train needs --corpus");
            const TrainSummary s = cmd_train(config, corpus);
            out << "checkpoint " << s.checkpoint.string() << "\nlog " << s.log_path.string() << "\nbest epoch "
                << s.result.best_epoch << (s.result.diverged ? " (diverged)" : "") << '\n';
            print_metrics("val", s.val, out);
            print_metrics("test", s.test, out);
            print_metrics("test baseline", s.test_deterministic, out);
        } else if (*eval) {
            if (corpus.empty()) throw UsageError("eval needs --corpus");
            const EvalSummary s = cmd_eval(config, corpus);
            if (as_json) {
                out << eval_to_json(s) << '\n';
            } else {
                print_metrics("deterministic", s.deterministic, out);
                print_metrics("attention", s.model, out);
                char line[200];
                std::snprintf(line, sizeof line,
                              "%-16s recall@10 %+.4f  recall@50 %+.4f  all_found@10 %+.4f  all_found@50 %+.4f  "
                              "mrr %+.4f\n",
                              "delta", s.model.recall10 - s.deterministic.recall10,
                              s.model.recall50 - s.deterministic.recall50,
                              s.model.all_found10 - s.deterministic.all_found10,
                              s.model.all_found50 - s.deterministic.all_found50, s.model.mrr - s.deterministic.mrr);
                out << line;
            }
        } else if (*explain) {
            const ExplainResult r = cmd_explain(config, request());
            out << "bundle " << r.bundle_dir.string() << '\n';
            for (const auto& f : r.files) out << "  " << f << '\n';
        }
        return kExitOk;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}

}  // namespace impactrank
