#pragma once

// Command implementations behind the `impactrank` executable.

#include "impactrank/config.hpp"
#include "impactrank/pipeline.hpp"
#include "impactrank/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace impactrank {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitInternal = 3 };

struct IndexResult {
    std::filesystem::path snapshot_path;
    std::string content_hash;
    std::size_t file_count = 0;
    std::size_t edge_count = 0;
    bool complete = true;
    IngestWarnings warnings;
};

IndexResult cmd_index(const RunConfig& config);

/// Loads the snapshot and, when configured, the checkpoint; writes report.json
/// into out_dir when set. The ranked list is truncated to top_k.
RankingReport cmd_rank(const RunConfig& config, const ChangeRequest& request);

struct SplitMetrics {
    std::size_t cases = 0;
    double recall10 = 0;
    double recall50 = 0;
    double all_found10 = 0;
    double all_found50 = 0;
    double mrr = 0;
};

struct TrainSummary {
    std::filesystem::path checkpoint;
    std::filesystem::path log_path;
    TrainResult result;
    SplitMetrics val;
    SplitMetrics test;
    SplitMetrics test_deterministic;
};

/// Requires config.seed. Writes the checkpoint to config.model.
TrainSummary cmd_train(const RunConfig& config, const std::filesystem::path& corpus);

struct CaseComparison {
    std::string request_id;
    std::vector<std::string> truth;
    std::vector<std::string> deterministic_ranking;
    std::vector<std::string> model_ranking;
    double det_recall10 = 0, det_recall50 = 0, det_rr = 0;
    bool det_all_found10 = false, det_all_found50 = false;
    double model_recall10 = 0, model_recall50 = 0, model_rr = 0;
    bool model_all_found10 = false, model_all_found50 = false;
};

struct EvalSummary {
    std::vector<CaseComparison> cases;
    SplitMetrics deterministic;
    SplitMetrics model;
};

/// Paired deterministic vs model metrics on every corpus case; writes eval.json
/// into out_dir when set.
EvalSummary cmd_eval(const RunConfig& config, const std::filesystem::path& corpus);

/// Recomputes summary metrics from per-case rankings.
SplitMetrics summarize(const std::vector<CaseComparison>& cases, bool model);

std::string eval_to_json(const EvalSummary& summary);

struct ExplainResult {
    RankingReport report;
    std::filesystem::path bundle_dir;
    std::vector<std::string> files;
};

/// Ranks the request and writes the report bundle into out_dir.
ExplainResult cmd_explain(const RunConfig& config, const ChangeRequest& request);

/// Parses argv and dispatches; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace impactrank
