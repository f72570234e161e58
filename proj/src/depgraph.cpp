#include "impactrank/depgraph.hpp"

#include "impactrank/error.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace impactrank {

WeightedDigraph::WeightedDigraph(std::size_t node_count)
    : out_(node_count), out_weight_(node_count, 0.0) {}

void WeightedDigraph::add_edge(std::size_t source, std::size_t target, double weight) {
    if (source >= size() || target >= size()) throw std::out_of_range("edge endpoint out of range");
    if (!(weight > 0) || !std::isfinite(weight)) throw std::invalid_argument("edge weight must be positive");
    for (auto& arc : out_[source]) {
        if (arc.target == target) {
            arc.weight += weight;
            out_weight_[source] += weight;
            return;
        }
    }
    out_[source].push_back(Arc{target, weight});
    out_weight_[source] += weight;
}

WeightedDigraph WeightedDigraph::from_matrix(const Eigen::MatrixXd& weights) {
    if (weights.rows() != weights.cols()) throw std::invalid_argument("adjacency matrix must be square");
    WeightedDigraph g(static_cast<std::size_t>(weights.rows()));
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
        for (Eigen::Index j = 0; j < weights.cols(); ++j)
            if (weights(i, j) > 0) g.add_edge(i, j, weights(i, j));
    return g;
}

PageRankResult pagerank(const WeightedDigraph& graph, const PageRankOptions& options) {
    const std::size_t n = graph.size();
    if (n == 0) throw DataError("pagerank: empty graph");
    if (!(options.damping > 0 && options.damping < 1)) throw std::invalid_argument("damping must be in (0,1)");
    if (!(options.tol > 0)) throw std::invalid_argument("tol must be positive");

    const double d = options.damping;
    const double uniform = 1.0 / static_cast<double>(n);
    std::vector<double> rank(n, uniform), next(n);

    PageRankResult result;
    for (int iter = 0; iter < options.max_iter; ++iter) {
        double dangling_mass = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (graph.dangling(i)) dangling_mass += rank[i];

        const double base = (1.0 - d) * uniform + d * dangling_mass * uniform;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t i = 0; i < n; ++i) {
            if (graph.dangling(i)) continue;
            const double share = d * rank[i] / graph.out_weight(i);
            for (const auto& arc : graph.out(i)) next[arc.target] += share * arc.weight;
        }

        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) delta += std::abs(next[i] - rank[i]);
        rank.swap(next);
        result.iterations = iter + 1;
        // d/(1-d) * delta bounds the remaining L1 error; it also implies delta < tol.
        if (delta * d / (1.0 - d) < options.tol) {
            result.converged = true;
            break;
        }
    }

    const double total = std::accumulate(rank.begin(), rank.end(), 0.0);
    for (auto& r : rank) r /= total;
    result.scores = std::move(rank);
    return result;
}

std::vector<DegreeFeatures> degree_features(const WeightedDigraph& graph) {
    std::vector<DegreeFeatures> out(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) {
        for (const auto& arc : graph.out(i)) {
            out[i].out_degree += 1;
            out[i].fan_out += arc.weight;
            out[arc.target].in_degree += 1;
            out[arc.target].fan_in += arc.weight;
        }
    }
    return out;
}

DepGraph DepGraph::build(const Repository& repo) {
    DepGraph g{WeightedDigraph(repo.size()), {}};
    for (const auto& e : repo.edges) {
        // Intra-file calls carry no cross-file dependency.
        if (e.caller == e.callee) continue;
        g.graph.add_edge(e.caller, e.callee, static_cast<double>(e.weight));
    }
    g.degrees = degree_features(g.graph);
    return g;
}

std::string dump_edge_list(const Repository& repo, const DepGraph& graph) {
    std::ostringstream out;
    for (std::size_t i = 0; i < graph.graph.size(); ++i)
        for (const auto& arc : graph.graph.out(i))
            out << repo.files[i].path << ' ' << repo.files[arc.target].path << ' ' << arc.weight << '\n';
    return out.str();
}

}  // namespace impactrank
