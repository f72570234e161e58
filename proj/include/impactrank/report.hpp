#pragma once

// Ranking reports, retrieval metrics and plot-ready exports.

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace impactrank {

struct RankedFile {
    std::string file_id;
    std::string path;
    double final_score = 0;
    double deterministic_score = 0;
    double adjustment = 0;
    double pagerank_term = 0;
    std::size_t candidate_index = 0;  // row in the attention matrices
};

struct RecallResult {
    double fraction = 0;     // |truth ∩ top-k| / |truth|
    bool all_found = false;  // every truth file within top-k
};

struct RankingReport {
    std::string request_id;
    std::vector<RankedFile> ranked;
    std::vector<std::string> keywords;
    std::string keyword_source;
    bool used_model = false;
    std::string combine_mode = "additive";
    std::optional<RecallResult> recall10;
    std::optional<RecallResult> recall50;
    std::optional<double> reciprocal_rank;
    /// Candidate-order attention matrices; empty without a model.
    Eigen::MatrixXd averaged_attention;
    std::vector<Eigen::MatrixXd> per_head_attention;
    Eigen::VectorXd attention_pagerank;

    std::vector<std::string> ranked_ids() const;
};

/// Throws std::invalid_argument for an empty truth set.
RecallResult recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& truth,
                         std::size_t k);

/// 1 / rank of the first truth file in `ranked`, 0 if none appears.
double reciprocal_rank(const std::vector<std::string>& ranked, const std::set<std::string>& truth);

/// Mean reciprocal rank over (ranked list, truth) cases; 0 for no cases.
double mrr(const std::vector<std::pair<std::vector<std::string>, std::set<std::string>>>& cases);

/// Cumulative mass share of the top-n entries for each n (sorted descending).
/// Empty `n_values` means 1..size. Zero total mass yields all-zero fractions.
std::vector<std::pair<std::size_t, double>> attention_coverage(const std::vector<double>& mass,
                                                               const std::vector<std::size_t>& n_values = {});

/// Column sums of an attention matrix: the attention each file receives.
std::vector<double> column_mass(const Eigen::MatrixXd& attention);

/// CSV of the top_n x top_n block in rank order. `order[r]` is the matrix row of
/// rank r; `labels[r]` its header label.
std::string export_heatmap(const Eigen::MatrixXd& attention, const std::vector<std::size_t>& order,
                           const std::vector<std::string>& labels, std::size_t top_n);

/// (rank, final score) for ranks 1..min(N, max_rank).
std::vector<std::pair<std::size_t, double>> export_score_decay(const RankingReport& report,
                                                               std::size_t max_rank = 50);

std::string report_to_json(const RankingReport& report);

/// Writes report.json, heatmap.csv, heads/head_{i}.csv, decay.csv and coverage.csv.
/// Returns the written file paths relative to `dir`.
std::vector<std::string> write_report_bundle(const RankingReport& report,
                                             const std::filesystem::path& dir,
                                             std::size_t top_n = 25);

}  // namespace impactrank
