#include "impactrank/report.hpp"

#include "impactrank/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace impactrank {

namespace fs = std::filesystem;

std::vector<std::string> RankingReport::ranked_ids() const {
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (const auto& r : ranked) out.push_back(r.file_id);
    return out;
}

RecallResult recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& truth,
                         std::size_t k) {
    if (truth.empty()) throw std::invalid_argument("recall_at_k: empty ground truth");
    std::size_t found = 0;
    const std::size_t limit = std::min(k, ranked.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < limit; ++i)
        if (truth.count(ranked[i]) && seen.insert(ranked[i]).second) ++found;
    RecallResult r;
    r.fraction = static_cast<double>(found) / static_cast<double>(truth.size());
    r.all_found = found == truth.size();
    return r;
}

double reciprocal_rank(const std::vector<std::string>& ranked, const std::set<std::string>& truth) {
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (truth.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

double mrr(const std::vector<std::pair<std::vector<std::string>, std::set<std::string>>>& cases) {
    if (cases.empty()) return 0.0;
    double total = 0;
    for (const auto& [ranked, truth] : cases) total += reciprocal_rank(ranked, truth);
    return total / static_cast<double>(cases.size());
}

std::vector<std::pair<std::size_t, double>> attention_coverage(const std::vector<double>& mass,
                                                               const std::vector<std::size_t>& n_values) {
    for (double m : mass)
        if (!(m >= 0)) throw std::invalid_argument("attention_coverage: negative or NaN mass");
    std::vector<double> sorted = mass;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::vector<double> cumulative(sorted.size());
    std::partial_sum(sorted.begin(), sorted.end(), cumulative.begin());
    const double total = cumulative.empty() ? 0.0 : cumulative.back();

    std::vector<std::size_t> ns = n_values;
    if (ns.empty()) {
        ns.resize(sorted.size());
        std::iota(ns.begin(), ns.end(), 1);
    }
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(ns.size());
    for (auto n : ns) {
        double frac = 0.0;
        if (total > 0 && n > 0) frac = n >= sorted.size() ? 1.0 : cumulative[n - 1] / total;
        out.emplace_back(n, frac);
    }
    return out;
}

std::vector<double> column_mass(const Eigen::MatrixXd& attention) {
    std::vector<double> out(static_cast<std::size_t>(attention.cols()));
    for (Eigen::Index j = 0; j < attention.cols(); ++j) out[static_cast<std::size_t>(j)] = attention.col(j).sum();
    return out;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace

std::string export_heatmap(const Eigen::MatrixXd& attention, const std::vector<std::size_t>& order,
                           const std::vector<std::string>& labels, std::size_t top_n) {
    const std::size_t n = std::min({top_n, order.size(), labels.size()});
    std::ostringstream out;
    out.precision(17);
    out << "file";
    for (std::size_t c = 0; c < n; ++c) out << ',' << csv_escape(labels[c]);
    out << '\n';
    for (std::size_t r = 0; r < n; ++r) {
        out << csv_escape(labels[r]);
        for (std::size_t c = 0; c < n; ++c)
            out << ',' << attention(static_cast<Eigen::Index>(order[r]), static_cast<Eigen::Index>(order[c]));
        out << '\n';
    }
    return out.str();
}

std::vector<std::pair<std::size_t, double>> export_score_decay(const RankingReport& report, std::size_t max_rank) {
    std::vector<std::pair<std::size_t, double>> out;
    const std::size_t n = std::min(max_rank, report.ranked.size());
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(i + 1, report.ranked[i].final_score);
    return out;
}

std::string report_to_json(const RankingReport& report) {
    nlohmann::ordered_json j;
    j["request_id"] = report.request_id;
    j["used_model"] = report.used_model;
    j["combine_mode"] = report.combine_mode;
    j["keyword_source"] = report.keyword_source;
    j["keywords"] = report.keywords;
    auto& ranked = j["ranked"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < report.ranked.size(); ++i) {
        const auto& r = report.ranked[i];
        ranked.push_back({{"rank", i + 1},
                          {"file_id", r.file_id},
                          {"path", r.path},
                          {"final_score", r.final_score},
                          {"deterministic_score", r.deterministic_score},
                          {"adjustment", r.adjustment},
                          {"pagerank_term", r.pagerank_term}});
    }
    if (report.recall10) {
        j["recall@10"] = report.recall10->fraction;
        j["all_found@10"] = report.recall10->all_found;
    }
    if (report.recall50) {
        j["recall@50"] = report.recall50->fraction;
        j["all_found@50"] = report.recall50->all_found;
    }
    if (report.reciprocal_rank) j["reciprocal_rank"] = *report.reciprocal_rank;
    return j.dump(2);
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

}  // namespace

std::vector<std::string> write_report_bundle(const RankingReport& report, const fs::path& dir, std::size_t top_n) {
    fs::create_directories(dir / "heads");
    std::vector<std::string> written;
    auto emit = [&](const std::string& rel, const std::string& text) {
        write_file(dir / rel, text);
        written.push_back(rel);
    };

    emit("report.json", report_to_json(report));

    std::vector<std::size_t> order;
    std::vector<std::string> labels;
    for (const auto& r : report.ranked) {
        order.push_back(r.candidate_index);
        labels.push_back(r.path);
    }
    const bool has_attention = report.averaged_attention.size() > 0;
    const std::size_t n = std::min(top_n, order.size());
    if (has_attention) {
        emit("heatmap.csv", export_heatmap(report.averaged_attention, order, labels, n));
        for (std::size_t h = 0; h < report.per_head_attention.size(); ++h)
            emit("heads/head_" + std::to_string(h + 1) + ".csv",
                 export_heatmap(report.per_head_attention[h], order, labels, n));
    } else {
        emit("heatmap.csv", "file\n");
    }

    std::ostringstream decay;
    decay.precision(17);
    decay << "rank,score\n";
    for (const auto& [rank, score] : export_score_decay(report)) decay << rank << ',' << score << '\n';
    emit("decay.csv", decay.str());

    // Both mass definitions: attention PageRank and received (column) attention.
    std::ostringstream cov;
    cov.precision(17);
    cov << "n,pagerank_coverage,column_mass_coverage\n";
    if (has_attention) {
        std::vector<double> pr(report.attention_pagerank.data(),
                               report.attention_pagerank.data() + report.attention_pagerank.size());
        const auto a = attention_coverage(pr);
        const auto b = attention_coverage(column_mass(report.averaged_attention));
        for (std::size_t i = 0; i < a.size(); ++i) cov << a[i].first << ',' << a[i].second << ',' << b[i].second << '\n';
    }
    emit("coverage.csv", cov.str());
    return written;
}

}  // namespace impactrank
