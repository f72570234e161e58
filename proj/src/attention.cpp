#include "impactrank/attention.hpp"

#include "impactrank/error.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace impactrank {

std::string_view to_string(ScaleMode mode) {
    return mode == ScaleMode::sqrt_dk ? "sqrt_dk" : "dk";
}

std::string_view to_string(CombineMode mode) {
    switch (mode) {
        case CombineMode::additive: return "additive";
        case CombineMode::multiplicative: return "multiplicative";
        case CombineMode::attention_only: return "attention_only";
    }
    return "additive";
}

ScaleMode parse_scale_mode(std::string_view text) {
    if (text == "sqrt_dk") return ScaleMode::sqrt_dk;
    if (text == "dk") return ScaleMode::dk;
    throw UsageError("unknown scale_mode: " + std::string(text));
}

CombineMode parse_combine_mode(std::string_view text) {
    if (text == "additive") return CombineMode::additive;
    if (text == "multiplicative") return CombineMode::multiplicative;
    if (text == "attention_only") return CombineMode::attention_only;
    throw UsageError("unknown combine_mode: " + std::string(text));
}

void AttentionConfig::validate() const {
    if (input_dim == 0 || hidden_dim == 0 || head_count == 0 || hidden_dim % head_count != 0)
        throw UsageError("hidden_dim must be a positive multiple of head_count");
    if (!std::isfinite(pagerank_weight)) throw UsageError("pagerank_weight must be finite");
}

AttentionModel AttentionModel::zeros(const AttentionConfig& config) {
    config.validate();
    const auto in = static_cast<Eigen::Index>(config.input_dim);
    const auto hid = static_cast<Eigen::Index>(config.hidden_dim);
    const auto dh = static_cast<Eigen::Index>(config.head_dim());
    AttentionModel m;
    m.config = config;
    m.w_proj = Eigen::MatrixXd::Zero(in, hid);
    m.heads.resize(config.head_count);
    for (auto& h : m.heads) {
        h.w_q = Eigen::MatrixXd::Zero(hid, dh);
        h.w_k = Eigen::MatrixXd::Zero(hid, dh);
        h.w_v = Eigen::MatrixXd::Zero(hid, dh);
    }
    m.w_o = Eigen::MatrixXd::Zero(hid, hid);
    m.w_adj = Eigen::MatrixXd::Zero(hid, hid);
    m.w_out = Eigen::MatrixXd::Zero(hid, 1);
    m.scaler = FeatureScaler::identity();
    return m;
}

AttentionModel AttentionModel::initialize(const AttentionConfig& config, std::uint64_t seed) {
    AttentionModel m = zeros(config);
    std::mt19937_64 gen(seed);
    // 53-bit mantissa draw; independent of the standard library's distributions.
    auto unit = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    for_each_parameter(m, [&](const std::string&, Eigen::MatrixXd& w) {
        const double bound = std::sqrt(1.0 / static_cast<double>(w.rows()));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * unit() - 1.0) * bound;
    });
    return m;
}

double AttentionModel::logit_scale() const {
    if (config.scale_mode == ScaleMode::sqrt_dk) return std::sqrt(static_cast<double>(config.head_dim()));
    return static_cast<double>(config.hidden_dim);
}

void AttentionModel::validate() const {
    config.validate();
    const auto in = static_cast<Eigen::Index>(config.input_dim);
    const auto hid = static_cast<Eigen::Index>(config.hidden_dim);
    const auto dh = static_cast<Eigen::Index>(config.head_dim());
    auto check = [](const std::string& name, const Eigen::MatrixXd& w, Eigen::Index r, Eigen::Index c) {
        if (w.rows() != r || w.cols() != c)
            throw DataError("parameter " + name + " has shape " + std::to_string(w.rows()) + "x" +
                            std::to_string(w.cols()) + ", expected " + std::to_string(r) + "x" +
                            std::to_string(c));
        if (!w.allFinite()) throw DataError("parameter " + name + " has non-finite entries");
    };
    if (heads.size() != config.head_count) throw DataError("head count does not match configuration");
    check("w_proj", w_proj, in, hid);
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const std::string p = "head" + std::to_string(h + 1) + ".";
        check(p + "w_q", heads[h].w_q, hid, dh);
        check(p + "w_k", heads[h].w_k, hid, dh);
        check(p + "w_v", heads[h].w_v, hid, dh);
    }
    check("w_o", w_o, hid, hid);
    check("w_adj", w_adj, hid, hid);
    check("w_out", w_out, hid, 1);
}

bool AttentionModel::operator==(const AttentionModel& other) const {
    if (!(config == other.config) || !(scaler == other.scaler) || heads.size() != other.heads.size())
        return false;
    auto same = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
    };
    for (std::size_t h = 0; h < heads.size(); ++h) {
        if (!same(heads[h].w_q, other.heads[h].w_q) || !same(heads[h].w_k, other.heads[h].w_k) ||
            !same(heads[h].w_v, other.heads[h].w_v))
            return false;
    }
    return same(w_proj, other.w_proj) && same(w_o, other.w_o) && same(w_adj, other.w_adj) &&
           same(w_out, other.w_out);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double max = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - max).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

AttentionOutput forward(const Eigen::MatrixXd& x, const AttentionModel& model,
                        const PageRankOptions& pagerank_options) {
    const auto n = x.rows();
    if (n < 1) throw DataError("forward: empty candidate set");
    if (static_cast<std::size_t>(x.cols()) != model.config.input_dim)
        throw DataError("forward: expected " + std::to_string(model.config.input_dim) + " feature columns");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!x.row(i).allFinite()) throw DataError("forward: non-finite features in row " + std::to_string(i));

    const std::size_t heads = model.heads.size();
    const auto dh = static_cast<Eigen::Index>(model.config.head_dim());
    const double scale = model.logit_scale();

    AttentionOutput out;
    ForwardCache& c = out.cache;
    c.x = x;
    c.h = x * model.w_proj;
    c.concat.resize(n, static_cast<Eigen::Index>(model.config.hidden_dim));
    out.averaged_attention = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t h = 0; h < heads; ++h) {
        const AttentionHead& w = model.heads[h];
        c.q.push_back(c.h * w.w_q);
        c.k.push_back(c.h * w.w_k);
        c.v.push_back(c.h * w.w_v);
        Eigen::MatrixXd p = softmax_rows(c.q.back() * c.k.back().transpose() / scale);
        c.concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh) = p * c.v.back();
        out.averaged_attention += p;
        out.per_head_attention.push_back(std::move(p));
    }
    out.averaged_attention /= static_cast<double>(heads);

    out.z = c.concat * model.w_o;
    c.u = out.z * model.w_adj;
    c.r = c.u.cwiseMax(0.0);
    out.adjustments = c.r * model.w_out;
    out.attention_pagerank = attention_pagerank(out.averaged_attention, pagerank_options);
    return out;
}

Eigen::VectorXd attention_pagerank(const Eigen::MatrixXd& averaged_attention, const PageRankOptions& options) {
    const auto result = pagerank(WeightedDigraph::from_matrix(averaged_attention), options);
    return Eigen::Map<const Eigen::VectorXd>(result.scores.data(), static_cast<Eigen::Index>(result.scores.size()));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::VectorXd combine_scores(const Eigen::VectorXd& deterministic, const Eigen::VectorXd& adjustments,
                               const Eigen::VectorXd& pagerank, CombineMode mode, double pagerank_weight) {
    const auto n = deterministic.size();
    if (adjustments.size() != n || pagerank.size() != n)
        throw std::invalid_argument("combine_scores: length mismatch");
    switch (mode) {
        case CombineMode::additive:
            return deterministic + adjustments + pagerank_weight * pagerank;
        case CombineMode::multiplicative: {
            Eigen::VectorXd out(n);
            for (Eigen::Index i = 0; i < n; ++i) out[i] = deterministic[i] * (1.0 + sigmoid(adjustments[i]));
            return out;
        }
        case CombineMode::attention_only:
            return adjustments + pagerank_weight * pagerank;
    }
    throw std::invalid_argument("combine_scores: unknown mode");
}

}  // namespace impactrank
