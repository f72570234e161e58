#include "impactrank/training.hpp"

#include "impactrank/error.hpp"
#include "impactrank/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace impactrank {

std::string_view to_string(LossMode mode) {
    switch (mode) {
        case LossMode::pairwise: return "pairwise";
        case LossMode::pairwise_logistic: return "pairwise_logistic";
        case LossMode::pointwise: return "pointwise";
    }
    return "pairwise";
}

LossMode parse_loss_mode(std::string_view text) {
    if (text == "pairwise") return LossMode::pairwise;
    if (text == "pairwise_logistic") return LossMode::pairwise_logistic;
    if (text == "pointwise") return LossMode::pointwise;
    throw UsageError("unknown loss_mode: " + std::string(text));
}

void TrainConfig::validate() const {
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw UsageError("split fractions must sum to 1");
    if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0)
        throw UsageError("split fractions must be non-negative");
    if (!(learning_rate > 0)) throw UsageError("learning_rate must be positive");
    if (epochs < 0) throw UsageError("epochs must be non-negative");
}

// ---------------------------------------------------------------------------
// Split

Split temporal_split(std::vector<LabeledCase> cases, const TrainConfig& config) {
    config.validate();
    if (cases.size() < 3) throw DataError("temporal split needs at least 3 cases");
    std::stable_sort(cases.begin(), cases.end(), [](const LabeledCase& a, const LabeledCase& b) {
        return a.request.timestamp < b.request.timestamp;
    });

    const std::size_t n = cases.size();
    const auto floor_of = [n](double f) {
        return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    };
    const std::size_t plain_train = floor_of(config.train_fraction);
    const std::size_t plain_val_end = plain_train + floor_of(config.val_fraction);

    // Cases tied with a split's last timestamp join that split, unless that
    // would empty a later split; then the positional cuts stand.
    auto through_ties = [&](std::size_t cut) {
        while (cut > 0 && cut < n && cases[cut].request.timestamp == cases[cut - 1].request.timestamp) ++cut;
        return cut;
    };
    std::size_t train_end = through_ties(plain_train);
    std::size_t val_end = through_ties(std::max(plain_val_end, train_end));
    const bool val_ok = plain_val_end == plain_train || val_end > train_end;
    const bool test_ok = plain_val_end == n || val_end < n;
    if (!val_ok || !test_ok) {
        train_end = plain_train;
        val_end = plain_val_end;
    }

    Split s;
    for (std::size_t i = 0; i < n; ++i) {
        auto& dest = i < train_end ? s.train : (i < val_end ? s.val : s.test);
        dest.push_back(std::move(cases[i]));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Losses

namespace {

struct Pairs {
    std::vector<std::size_t> pos, neg;
};

Pairs partition(Eigen::Index n, const std::vector<std::size_t>& positives) {
    Pairs p;
    std::vector<bool> is_pos(static_cast<std::size_t>(n), false);
    for (auto i : positives) {
        if (i >= static_cast<std::size_t>(n)) throw std::out_of_range("positive index out of range");
        is_pos[i] = true;
    }
    for (std::size_t i = 0; i < is_pos.size(); ++i) (is_pos[i] ? p.pos : p.neg).push_back(i);
    return p;
}

}  // namespace

LossResult pairwise_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives,
                         double margin) {
    LossResult r;
    r.grad = Eigen::VectorXd::Zero(scores.size());
    const Pairs p = partition(scores.size(), positives);
    if (p.pos.empty() || p.neg.empty()) {
        r.skipped = true;
        return r;
    }
    const double inv_pairs = 1.0 / static_cast<double>(p.pos.size() * p.neg.size());
    for (auto i : p.pos) {
        for (auto j : p.neg) {
            const double slack = margin - (scores[i] - scores[j]);
            if (slack > 0) {
                r.loss += slack * inv_pairs;
                r.grad[i] -= inv_pairs;
                r.grad[j] += inv_pairs;
            }
        }
    }
    return r;
}

LossResult pairwise_logistic_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives) {
    LossResult r;
    r.grad = Eigen::VectorXd::Zero(scores.size());
    const Pairs p = partition(scores.size(), positives);
    if (p.pos.empty() || p.neg.empty()) {
        r.skipped = true;
        return r;
    }
    const double inv_pairs = 1.0 / static_cast<double>(p.pos.size() * p.neg.size());
    for (auto i : p.pos) {
        for (auto j : p.neg) {
            const double d = scores[i] - scores[j];
            // log(1 + e^-d), stable for both signs
            r.loss += inv_pairs * (d > 0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d)));
            const double g = -sigmoid(-d) * inv_pairs;
            r.grad[i] += g;
            r.grad[j] -= g;
        }
    }
    return r;
}

LossResult pointwise_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives) {
    LossResult r;
    r.grad = Eigen::VectorXd::Zero(scores.size());
    const Pairs p = partition(scores.size(), positives);
    if (p.pos.empty() || p.neg.empty()) {
        r.skipped = true;
        return r;
    }
    const double inv_n = 1.0 / static_cast<double>(scores.size());
    Eigen::VectorXd label = Eigen::VectorXd::Zero(scores.size());
    for (auto i : p.pos) label[static_cast<Eigen::Index>(i)] = 1.0;
    const Eigen::VectorXd diff = scores - label;
    r.loss = diff.squaredNorm() * inv_n;
    r.grad = 2.0 * inv_n * diff;
    return r;
}

LossResult ranking_loss(const Eigen::VectorXd& scores, const std::vector<std::size_t>& positives,
                        const TrainConfig& config) {
    switch (config.loss_mode) {
        case LossMode::pairwise: return pairwise_loss(scores, positives, config.margin);
        case LossMode::pairwise_logistic: return pairwise_logistic_loss(scores, positives);
        case LossMode::pointwise: return pointwise_loss(scores, positives);
    }
    throw std::invalid_argument("unknown loss mode");
}

// ---------------------------------------------------------------------------
// Backward

ModelGradients ModelGradients::zeros_like(const AttentionModel& model) {
    ModelGradients g;
    g.w_proj = Eigen::MatrixXd::Zero(model.w_proj.rows(), model.w_proj.cols());
    for (const auto& h : model.heads) {
        g.heads.push_back({Eigen::MatrixXd::Zero(h.w_q.rows(), h.w_q.cols()),
                           Eigen::MatrixXd::Zero(h.w_k.rows(), h.w_k.cols()),
                           Eigen::MatrixXd::Zero(h.w_v.rows(), h.w_v.cols())});
    }
    g.w_o = Eigen::MatrixXd::Zero(model.w_o.rows(), model.w_o.cols());
    g.w_adj = Eigen::MatrixXd::Zero(model.w_adj.rows(), model.w_adj.cols());
    g.w_out = Eigen::MatrixXd::Zero(model.w_out.rows(), model.w_out.cols());
    return g;
}

ModelGradients backward(const AttentionModel& model, const AttentionOutput& fwd,
                        const Eigen::VectorXd& upstream) {
    const ForwardCache& c = fwd.cache;
    if (c.x.size() == 0 || c.q.size() != model.heads.size() || fwd.per_head_attention.size() != model.heads.size())
        throw std::logic_error("backward: missing cached forward state");
    if (upstream.size() != c.x.rows()) throw std::invalid_argument("backward: upstream length mismatch");

    const auto dh = static_cast<Eigen::Index>(model.config.head_dim());
    const double scale = model.logit_scale();
    ModelGradients g;

    g.w_out = c.r.transpose() * upstream;
    const Eigen::MatrixXd d_r = upstream * model.w_out.transpose();
    const Eigen::MatrixXd d_u = d_r.cwiseProduct((c.u.array() > 0.0).cast<double>().matrix());
    g.w_adj = fwd.z.transpose() * d_u;
    const Eigen::MatrixXd d_z = d_u * model.w_adj.transpose();
    g.w_o = c.concat.transpose() * d_z;
    const Eigen::MatrixXd d_concat = d_z * model.w_o.transpose();

    Eigen::MatrixXd d_h = Eigen::MatrixXd::Zero(c.h.rows(), c.h.cols());
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        const Eigen::MatrixXd& p = fwd.per_head_attention[h];
        const Eigen::MatrixXd d_o = d_concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh);
        const Eigen::MatrixXd d_v = p.transpose() * d_o;
        const Eigen::MatrixXd d_p = d_o * c.v[h].transpose();
        // softmax Jacobian, row by row
        const Eigen::VectorXd row_dot = d_p.cwiseProduct(p).rowwise().sum();
        const Eigen::MatrixXd d_s = p.cwiseProduct(d_p - row_dot.replicate(1, p.cols()));
        const Eigen::MatrixXd d_q = d_s * c.k[h] / scale;
        const Eigen::MatrixXd d_k = d_s.transpose() * c.q[h] / scale;

        const AttentionHead& w = model.heads[h];
        g.heads.push_back({c.h.transpose() * d_q, c.h.transpose() * d_k, c.h.transpose() * d_v});
        d_h += d_q * w.w_q.transpose() + d_k * w.w_k.transpose() + d_v * w.w_v.transpose();
    }
    g.w_proj = c.x.transpose() * d_h;
    return g;
}

Eigen::VectorXd adjustment_gradient(const Eigen::VectorXd& score_grad, const Eigen::VectorXd& deterministic,
                                    const Eigen::VectorXd& adjustments, CombineMode mode) {
    if (mode != CombineMode::multiplicative) return score_grad;
    Eigen::VectorXd out(score_grad.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double s = sigmoid(adjustments[i]);
        out[i] = score_grad[i] * deterministic[i] * s * (1.0 - s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam

AdamOptimizer::AdamOptimizer(const AttentionModel& model, const TrainConfig& config)
    : config_(config), m_(ModelGradients::zeros_like(model)), v_(ModelGradients::zeros_like(model)) {}

void AdamOptimizer::step(AttentionModel& model, const ModelGradients& grads) {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));

    std::vector<Eigen::MatrixXd*> params, ms, vs;
    std::vector<const Eigen::MatrixXd*> gs;
    AttentionModel::for_each_parameter(model, [&](const std::string&, Eigen::MatrixXd& w) { params.push_back(&w); });
    ModelGradients::for_each_parameter(m_, [&](const std::string&, Eigen::MatrixXd& w) { ms.push_back(&w); });
    ModelGradients::for_each_parameter(v_, [&](const std::string&, Eigen::MatrixXd& w) { vs.push_back(&w); });
    ModelGradients::for_each_parameter(grads, [&](const std::string&, const Eigen::MatrixXd& w) { gs.push_back(&w); });
    if (gs.size() != params.size()) throw std::invalid_argument("gradient structure does not match model");

    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::MatrixXd& w = *params[i];
        Eigen::MatrixXd& m = *ms[i];
        Eigen::MatrixXd& v = *vs[i];
        const Eigen::MatrixXd& g = *gs[i];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        w.array() -= config_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.eps);
    }
}

// ---------------------------------------------------------------------------
// Training loop

Eigen::VectorXd score_case(const AttentionModel& model, const LabeledCase& c, AttentionOutput* output) {
    AttentionOutput out = forward(apply_scaler(model.scaler, c.features), model);
    Eigen::VectorXd final_scores = combine_scores(c.deterministic, out.adjustments, out.attention_pagerank,
                                                  model.config.combine_mode, model.config.pagerank_weight);
    if (output) *output = std::move(out);
    return final_scores;
}

namespace {

std::vector<std::string> ranked_ids(const LabeledCase& c, const Eigen::VectorXd& scores) {
    std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        if (scores[ia] != scores[ib]) return scores[ia] > scores[ib];
        return c.deterministic[ia] > c.deterministic[ib];
    });
    std::vector<std::string> out;
    for (auto i : order) out.push_back(c.file_ids.empty() ? std::to_string(i) : c.file_ids[i]);
    return out;
}

std::set<std::string> truth_of(const LabeledCase& c) {
    if (!c.truth_ids.empty()) return {c.truth_ids.begin(), c.truth_ids.end()};
    std::set<std::string> t;
    for (auto i : c.positives) t.insert(c.file_ids.empty() ? std::to_string(i) : c.file_ids[i]);
    return t;
}

struct ValMetrics {
    double recall50 = 0, recall10 = 0, loss = 0;

    auto key() const { return std::make_tuple(recall50, recall10, -loss); }
};

ValMetrics validate_model(const AttentionModel& model, const std::vector<LabeledCase>& cases,
                          const TrainConfig& config) {
    ValMetrics m;
    std::size_t counted = 0;
    for (const auto& c : cases) {
        const auto truth = truth_of(c);
        if (truth.empty()) continue;
        const Eigen::VectorXd s = score_case(model, c);
        const auto ranked = ranked_ids(c, s);
        m.recall50 += recall_at_k(ranked, truth, 50).fraction;
        m.recall10 += recall_at_k(ranked, truth, 10).fraction;
        const LossResult l = ranking_loss(s, c.positives, config);
        if (!l.skipped) m.loss += l.loss;
        ++counted;
    }
    if (counted) {
        m.recall50 /= static_cast<double>(counted);
        m.recall10 /= static_cast<double>(counted);
        m.loss /= static_cast<double>(counted);
    }
    return m;
}

}  // namespace

double mean_recall(const AttentionModel& model, const std::vector<LabeledCase>& cases, std::size_t k) {
    double total = 0;
    std::size_t counted = 0;
    for (const auto& c : cases) {
        const auto truth = truth_of(c);
        if (truth.empty()) continue;
        total += recall_at_k(ranked_ids(c, score_case(model, c)), truth, k).fraction;
        ++counted;
    }
    return counted ? total / static_cast<double>(counted) : 0.0;
}

TrainResult train(const std::vector<LabeledCase>& train_cases, const std::vector<LabeledCase>& val_cases,
                  const AttentionConfig& model_config, const TrainConfig& config) {
    config.validate();
    model_config.validate();

    Eigen::Index rows = 0;
    for (const auto& c : train_cases) rows += c.features.rows();
    Eigen::MatrixXd stacked(rows, static_cast<Eigen::Index>(kFeatureDim));
    Eigen::Index at = 0;
    for (const auto& c : train_cases) {
        stacked.middleRows(at, c.features.rows()) = c.features;
        at += c.features.rows();
    }

    TrainResult result;
    AttentionModel model = AttentionModel::initialize(model_config, config.seed);
    model.scaler = fit_scaler(stacked);
    result.model = model;
    ValMetrics best = validate_model(model, val_cases, config);

    AdamOptimizer adam(model, config);
    std::mt19937_64 shuffle_gen(config.seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(train_cases.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_gen() % i]);

        double epoch_loss = 0;
        std::size_t processed = 0;
        for (auto idx : order) {
            const LabeledCase& c = train_cases[idx];
            AttentionOutput out;
            const Eigen::VectorXd scores = score_case(model, c, &out);
            const LossResult loss = ranking_loss(scores, c.positives, config);
            if (loss.skipped) {
                if (epoch == 1) ++result.skipped_cases;
                continue;
            }
            if (!std::isfinite(loss.loss)) {
                result.diverged = true;
                break;
            }
            const Eigen::VectorXd d_a =
                adjustment_gradient(loss.grad, c.deterministic, out.adjustments, model.config.combine_mode);
            adam.step(model, backward(model, out, d_a));
            epoch_loss += loss.loss;
            ++processed;
        }
        if (result.diverged) break;
        try {
            model.validate();
        } catch (const DataError&) {
            result.diverged = true;
            break;
        }

        const ValMetrics val = validate_model(model, val_cases, config);
        result.log.push_back(EpochLog{epoch, processed ? epoch_loss / static_cast<double>(processed) : 0.0,
                                      val.recall50, val.recall10, val.loss});
        const bool better = val_cases.empty() ? true : val.key() > best.key();
        if (better) {
            best = val;
            result.model = model;
            result.best_epoch = epoch;
        }
    }
    return result;
}

std::string training_log_ndjson(const std::vector<EpochLog>& log) {
    std::string out;
    for (const auto& e : log) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["loss"] = e.loss;
        j["val_recall50"] = e.val_recall50;
        j["val_recall10"] = e.val_recall10;
        j["val_loss"] = e.val_loss;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace impactrank
