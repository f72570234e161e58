#pragma once

#include "impactrank/repository.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace impactrank {

/// Weighted directed graph in adjacency-list form. Parallel edges are merged.
class WeightedDigraph {
public:
    struct Arc {
        std::size_t target;
        double weight;
    };

    explicit WeightedDigraph(std::size_t node_count = 0);

    /// Adds `weight` to the arc source->target. Weights must be positive.
    void add_edge(std::size_t source, std::size_t target, double weight);

    /// Every entry (i, j) > 0 becomes an arc i->j with that weight.
    static WeightedDigraph from_matrix(const Eigen::MatrixXd& weights);

    std::size_t size() const { return out_.size(); }
    const std::vector<Arc>& out(std::size_t node) const { return out_[node]; }
    double out_weight(std::size_t node) const { return out_weight_[node]; }
    bool dangling(std::size_t node) const { return out_[node].empty(); }

private:
    std::vector<std::vector<Arc>> out_;
    std::vector<double> out_weight_;
};

struct PageRankOptions {
    double damping = 0.85;
    double tol = 1e-8;
    int max_iter = 100;
};

struct PageRankResult {
    std::vector<double> scores;
    int iterations = 0;
    bool converged = false;
};

/// Power iteration with uniform teleport and dangling mass redistributed uniformly.
/// Stops once the L1 distance to the fixed point, bounded by d/(1-d) times the
/// last L1 change, drops below tol. Scores sum to 1.
PageRankResult pagerank(const WeightedDigraph& graph, const PageRankOptions& options = {});

struct DegreeFeatures {
    double in_degree = 0;   // distinct predecessor files
    double out_degree = 0;  // distinct successor files
    double fan_in = 0;      // incoming call sites
    double fan_out = 0;     // outgoing call sites
};

/// File-level dependency graph; node i is Repository::files[i].
struct DepGraph {
    WeightedDigraph graph;
    std::vector<DegreeFeatures> degrees;

    static DepGraph build(const Repository& repo);
};

std::vector<DegreeFeatures> degree_features(const WeightedDigraph& graph);

/// Edge-list text dump ("caller_path callee_path weight" per line).
std::string dump_edge_list(const Repository& repo, const DepGraph& graph);

}  // namespace impactrank
