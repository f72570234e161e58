#pragma once

// Training of the attention layer with a pairwise ranking loss and Adam.

#include "impactrank/attention.hpp"
#include "impactrank/keywords.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace impactrank {

struct LabeledCase {
    ChangeRequest request;
    Eigen::MatrixXd features;           // N x 20, unscaled
    Eigen::VectorXd deterministic;      // N
    std::vector<std::size_t> positives; // indices into the candidate rows
    std::vector<std::string> file_ids;  // N, candidate order
    /// Ground-truth files, including any that fell outside the candidate set.
    std::vector<std::string> truth_ids;
};

enum class LossMode { pairwise, pairwise_logistic, pointwise };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int epochs = 50;
    double margin = 1.0;
    std::uint64_t seed = 0;
    LossMode loss_mode = LossMode::pairwise;
    double train_fraction = 0.70;
    double val_fraction = 0.15;
    double test_fraction = 0.15;

    void validate() const;
};

struct Split {
    std::vector<LabeledCase> train, val, test;
};

/// Chronological split: sizes floor(0.70 n), floor(0.15 n), remainder; cases
/// sharing a timestamp with the last case of a split stay in that split.
/// Throws DataError for fewer than 3 cases.
Split temporal_split(std::vector<LabeledCase> cases, const TrainConfig& config = {});

struct LossResult {
    double loss = 0;
    Eigen::VectorXd grad;  // d loss / d final score
    bool skipped = false;  // no positives or no negatives
};

/// Mean hinge max(0, margin - (s_p - s_n)) over all positive/negative pairs.
LossResult pairwise_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives,
                         double margin);
/// Mean log(1 + exp(-(s_p - s_n))) over pairs.
LossResult pairwise_logistic_loss(const Eigen::VectorXd& scores,
                                  const std::vector<std::size_t>& positives);
/// Mean squared error to the 0/1 relevance label.
LossResult pointwise_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives);

LossResult ranking_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives,
                        const TrainConfig& config);

/// Gradients mirror AttentionModel parameters; the scaler is untouched.
struct ModelGradients {
    Eigen::MatrixXd w_proj;
    std::vector<AttentionHead> heads;
    Eigen::MatrixXd w_o;
    Eigen::MatrixXd w_adj;
    Eigen::MatrixXd w_out;

    static ModelGradients zeros_like(const AttentionModel& model);

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
};

/// Reverse-mode gradients of sum_i upstream_i * A_i for every parameter.
/// Attention PageRank is a constant here. Throws std::logic_error if the cache
/// is empty.
ModelGradients backward(const AttentionModel& model, const AttentionOutput& forward_output,
                        const Eigen::VectorXd& upstream_adjustments);

/// d loss / d A given d loss / d final score under the combine mode.
Eigen::VectorXd adjustment_gradient(const Eigen::VectorXd& score_grad,
                                    const Eigen::VectorXd& deterministic,
                                    const Eigen::VectorXd& adjustments, CombineMode mode);

class AdamOptimizer {
public:
    AdamOptimizer(const AttentionModel& model, const TrainConfig& config);
    void step(AttentionModel& model, const ModelGradients& grads);
    std::int64_t steps() const { return t_; }

private:
    TrainConfig config_;
    ModelGradients m_;
    ModelGradients v_;
    std::int64_t t_ = 0;
};

struct EpochLog {
    int epoch = 0;
    double loss = 0;
    double val_recall50 = 0;
    double val_recall10 = 0;
    double val_loss = 0;
};

struct TrainResult {
    AttentionModel model;  // best validation checkpoint
    std::vector<EpochLog> log;
    int best_epoch = 0;    // 0 = initialization
    bool diverged = false;
    std::int64_t skipped_cases = 0;
};

/// Final scores of a case under `model` (features are scaled with model.scaler).
Eigen::VectorXd score_case(const AttentionModel& model, const LabeledCase& c,
                           AttentionOutput* output = nullptr);

/// Mean fractional Recall@k of the model ranking over the given cases.
double mean_recall(const AttentionModel& model, const std::vector<LabeledCase>& cases,
                   std::size_t k);

/// Fits the scaler on the stacked training rows, then runs `epochs` passes of
/// one Adam step per case in a seeded shuffled order. The checkpoint with the
/// best (val Recall@50, val Recall@10, -val loss) is returned.
TrainResult train(const std::vector<LabeledCase>& train_cases,
                  const std::vector<LabeledCase>& val_cases, const AttentionConfig& model_config,
                  const TrainConfig& config);

/// {"epoch", "loss", "val_recall50", ...} per line.
std::string training_log_ndjson(const std::vector<EpochLog>& log);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: header (magic, version, shape, modes), named row-major
/// little-endian float64 matrices, scaler, end marker.
std::string serialize_model(const AttentionModel& model);
AttentionModel deserialize_model(std::string_view bytes);
void save_model(const AttentionModel& model, const std::filesystem::path& path);
AttentionModel load_model(const std::filesystem::path& path);

}  // namespace impactrank
