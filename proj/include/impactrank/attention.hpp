#pragma once

// Multi-head self-attention refinement over a candidate set.
//
//   H    = X W_proj                               (N x hidden)
//   P_h  = softmax(H W_q^h (H W_k^h)^T / scale)   (N x N, per head)
//   Z    = [P_1 H W_v^1 | ... | P_k H W_v^k] W_O  (N x hidden)
//   A    = ReLU(Z W_adj) W_out                    (N)
//
// The head-averaged attention matrix is read as a weighted digraph and ranked
// with PageRank; that centrality enters the final score as a separate term.

#include "impactrank/depgraph.hpp"
#include "impactrank/features.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace impactrank {

enum class ScaleMode { sqrt_dk, dk };
enum class CombineMode { additive, multiplicative, attention_only };

std::string_view to_string(ScaleMode mode);
std::string_view to_string(CombineMode mode);
ScaleMode parse_scale_mode(std::string_view text);
CombineMode parse_combine_mode(std::string_view text);

struct AttentionConfig {
    std::size_t input_dim = kFeatureDim;
    std::size_t hidden_dim = 64;
    std::size_t head_count = 4;
    ScaleMode scale_mode = ScaleMode::sqrt_dk;
    CombineMode combine_mode = CombineMode::additive;
    double pagerank_weight = 0.1;

    std::size_t head_dim() const { return hidden_dim / head_count; }
    /// Throws UsageError unless hidden_dim is a positive multiple of head_count.
    void validate() const;
    bool operator==(const AttentionConfig&) const = default;
};

struct AttentionHead {
    Eigen::MatrixXd w_q;  // hidden x head_dim
    Eigen::MatrixXd w_k;
    Eigen::MatrixXd w_v;
};

struct AttentionModel {
    AttentionConfig config;
    Eigen::MatrixXd w_proj;  // input_dim x hidden
    std::vector<AttentionHead> heads;
    Eigen::MatrixXd w_o;     // hidden x hidden
    Eigen::MatrixXd w_adj;   // hidden x hidden
    Eigen::MatrixXd w_out;   // hidden x 1
    FeatureScaler scaler;

    /// All matrices zero, correctly shaped.
    static AttentionModel zeros(const AttentionConfig& config);
    /// Each matrix uniform in +-sqrt(1/fan_in), fan_in = its row count.
    static AttentionModel initialize(const AttentionConfig& config, std::uint64_t seed);

    double logit_scale() const;
    /// Throws DataError if any matrix has the wrong shape or a non-finite entry.
    void validate() const;

    /// Visits every parameter matrix in a fixed order with a stable name
    /// ("w_proj", "head1.w_q", ..., "w_o", "w_adj", "w_out").
    template <typename Self, typename Fn>
    static void for_each_parameter(Self& self, Fn&& fn) {
        fn("w_proj", self.w_proj);
        for (std::size_t h = 0; h < self.heads.size(); ++h) {
            const std::string prefix = "head" + std::to_string(h + 1) + ".";
            fn(prefix + "w_q", self.heads[h].w_q);
            fn(prefix + "w_k", self.heads[h].w_k);
            fn(prefix + "w_v", self.heads[h].w_v);
        }
        fn("w_o", self.w_o);
        fn("w_adj", self.w_adj);
        fn("w_out", self.w_out);
    }

    bool operator==(const AttentionModel& other) const;
};

/// Intermediates kept for the backward pass.
struct ForwardCache {
    Eigen::MatrixXd x;
    Eigen::MatrixXd h;
    std::vector<Eigen::MatrixXd> q, k, v;
    Eigen::MatrixXd concat;  // N x hidden
    Eigen::MatrixXd u;       // Z W_adj before ReLU
    Eigen::MatrixXd r;       // ReLU(u)
};

struct AttentionOutput {
    Eigen::VectorXd adjustments;                // A
    Eigen::MatrixXd averaged_attention;         // N x N, row-stochastic
    std::vector<Eigen::MatrixXd> per_head_attention;
    Eigen::VectorXd attention_pagerank;
    Eigen::MatrixXd z;
    ForwardCache cache;
};

/// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// X is the scaled N x input_dim feature matrix. Throws DataError naming the
/// first row with a non-finite entry.
AttentionOutput forward(const Eigen::MatrixXd& x, const AttentionModel& model,
                        const PageRankOptions& pagerank_options = {});

/// PageRank of the head-averaged attention graph (edge i->j weighted by alpha_ij).
Eigen::VectorXd attention_pagerank(const Eigen::MatrixXd& averaged_attention,
                                   const PageRankOptions& options = {});

double sigmoid(double x);

/// additive:       s_d + A + w * pr
/// multiplicative: s_d * (1 + sigmoid(A))
/// attention_only: A + w * pr
/// Throws std::invalid_argument on length mismatch.
Eigen::VectorXd combine_scores(const Eigen::VectorXd& deterministic, const Eigen::VectorXd& adjustments,
                               const Eigen::VectorXd& pagerank, CombineMode mode,
                               double pagerank_weight);

}  // namespace impactrank
