#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedlap/stacked_params.hpp"

namespace fedlap {

struct Edge {
    int k;
    int l;
    double weight;
};

/// Weighted client relationship graph with its Laplacian L = D - A and
/// spectral norm rho = ||L||. Immutable after construction; safe to share
/// across threads.
class ClientGraph {
public:
    ClientGraph() = default;

    int n_clients() const { return n_; }
    const Eigen::MatrixXd& adjacency() const { return adjacency_; }
    const Eigen::VectorXd& degrees() const { return degrees_; }
    const Eigen::MatrixXd& laplacian() const { return laplacian_; }
    double rho() const { return rho_; }
    bool connected() const { return connected_; }

    /// Neighbors of client k as (neighbor id, a_kl), sorted by id.
    const std::vector<std::pair<int, double>>& neighbors(int k) const { return neighbors_[k]; }

    std::vector<Edge> edges() const;

    friend ClientGraph build_graph(int n_clients, const std::vector<Edge>& edges);

private:
    int n_ = 0;
    Eigen::MatrixXd adjacency_;
    Eigen::VectorXd degrees_;
    Eigen::MatrixXd laplacian_;
    double rho_ = 0.0;
    bool connected_ = false;
    std::vector<std::vector<std::pair<int, double>>> neighbors_;
};

/// Builds the graph from an undirected edge list. Each edge is symmetrized,
/// i.e. (k,l,w) sets both a_kl and a_lk. Edges with weight exactly 0 are
/// dropped (a_kl = 0 means "no relationship").
/// Throws DuplicateEdge, SelfLoop, NegativeWeight, IndexOutOfRange.
ClientGraph build_graph(int n_clients, const std::vector<Edge>& edges);

/// R(W) = W^T (L (x) I_d) W = 1/2 sum_k sum_{l in N_k} a_kl ||w_k - w_l||^2,
/// computed pairwise over edges. Throws DimensionMismatch.
double laplacian_quadratic(const ClientGraph& graph, const StackedParams& w);

/// Per-block Laplacian action: row k of the result is
/// deg_k * w_k - sum_l a_kl w_l, computed from the neighbor lists.
Eigen::MatrixXd laplacian_apply(const ClientGraph& graph, const Eigen::MatrixXd& w);

// ---- weight-assignment scenarios ----------------------------------------

struct WeightScenario {
    enum class Kind { Random, Equal, Weighted, Similar };
    Kind kind = Kind::Equal;

    // Random: |N(0,1)| clipped to 1, per edge, drawn from `seed`.
    std::uint64_t seed = 0;

    // Equal: every existing edge gets weight c.
    double c = 0.5;

    // Weighted: 0 between two small clients, c_mixed small<->large, c_full otherwise.
    std::vector<int> small_set;
    double c_small = 0.0;
    double c_mixed = 0.5;
    double c_full = 1.0;

    // Similar: weight by shared-label count (0 -> 0, 1 -> 0.5, >=2 -> 1).
    std::vector<std::vector<int>> label_sets;

    static WeightScenario random(std::uint64_t seed);
    static WeightScenario equal(double c);
    static WeightScenario weighted(std::vector<int> small_set, double c_small = 0.0,
                                   double c_mixed = 0.5, double c_full = 1.0);
    static WeightScenario similar(std::vector<std::vector<int>> label_sets);
};

/// Reassigns the weights of the existing edges according to the scenario and
/// rebuilds the graph (zero-weight edges drop out). Throws MissingLabelSets.
ClientGraph assign_weights(const ClientGraph& graph, const WeightScenario& scenario);

// ---- convenience topologies ----------------------------------------------

/// Complete graph on n vertices with uniform weight (consensus limit setup).
ClientGraph complete_graph(int n, double weight = 1.0);

/// Star graph with a virtual server vertex 0: n_clients + 1 vertices, edges
/// (0,k) with weight, k = 1..n_clients. Vertex 0 is an ordinary client whose
/// loss is zero (pair it with a zero-curvature quadratic model).
ClientGraph star_graph(int n_clients, double weight = 1.0);

// ---- file format -----------------------------------------------------------

/// JSON graph file: {"n": N, "edges": [[k, l, w], ...]}.
/// The loader validates the same preconditions as build_graph.
ClientGraph load_graph_json(const std::string& path);
void save_graph_json(const ClientGraph& graph, const std::string& path);

}  // namespace fedlap
