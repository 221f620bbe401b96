#include "fedlap/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

namespace {

bool is_connected(int n, const std::vector<std::vector<std::pair<int, double>>>& adj) {
    if (n == 0) return false;
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (auto [u, w] : adj[v]) {
            if (!seen[u]) {
                seen[u] = 1;
                ++count;
                stack.push_back(u);
            }
        }
    }
    return count == n;
}

}  // namespace

ClientGraph build_graph(int n_clients, const std::vector<Edge>& edges) {
    if (n_clients <= 0) throw IndexOutOfRange("build_graph: n_clients must be positive");

    ClientGraph g;
    g.n_ = n_clients;
    g.adjacency_ = Eigen::MatrixXd::Zero(n_clients, n_clients);

    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges) {
        if (e.k < 0 || e.k >= n_clients || e.l < 0 || e.l >= n_clients)
            throw IndexOutOfRange("build_graph: edge (" + std::to_string(e.k) + "," +
                                  std::to_string(e.l) + ") out of range for N=" +
                                  std::to_string(n_clients));
        if (e.k == e.l)
            throw SelfLoop("build_graph: self loop at vertex " + std::to_string(e.k));
        if (e.weight < 0.0)
            throw NegativeWeight("build_graph: negative weight on edge (" +
                                 std::to_string(e.k) + "," + std::to_string(e.l) + ")");
        auto key = std::minmax(e.k, e.l);
        if (!seen.insert(key).second)
            throw DuplicateEdge("build_graph: duplicate edge (" + std::to_string(e.k) + "," +
                                std::to_string(e.l) + ")");
        g.adjacency_(e.k, e.l) = e.weight;
        g.adjacency_(e.l, e.k) = e.weight;
    }

    g.degrees_ = g.adjacency_.rowwise().sum();
    g.laplacian_ = Eigen::MatrixXd(g.degrees_.asDiagonal()) - g.adjacency_;

    g.neighbors_.assign(n_clients, {});
    for (int k = 0; k < n_clients; ++k)
        for (int l = 0; l < n_clients; ++l)
            if (g.adjacency_(k, l) != 0.0) g.neighbors_[k].emplace_back(l, g.adjacency_(k, l));

    if (g.degrees_.isZero(0.0)) {
        g.rho_ = 0.0;
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.laplacian_, Eigen::EigenvaluesOnly);
        g.rho_ = std::max(0.0, es.eigenvalues().maxCoeff());
    }
    g.connected_ = is_connected(n_clients, g.neighbors_);
    return g;
}

std::vector<Edge> ClientGraph::edges() const {
    std::vector<Edge> out;
    for (int k = 0; k < n_; ++k)
        for (auto [l, w] : neighbors_[k])
            if (l > k) out.push_back({k, l, w});
    return out;
}

double laplacian_quadratic(const ClientGraph& graph, const StackedParams& w) {
    if (w.n_clients() != graph.n_clients())
        throw DimensionMismatch("laplacian_quadratic: W has " + std::to_string(w.n_clients()) +
                                " blocks, graph has " + std::to_string(graph.n_clients()));
    double total = 0.0;
    for (int k = 0; k < graph.n_clients(); ++k) {
        for (auto [l, a] : graph.neighbors(k)) {
            if (l <= k) continue;  // each unordered pair once; equals the 1/2 double sum
            total += a * (w.blocks.row(k) - w.blocks.row(l)).squaredNorm();
        }
    }
    return total;
}

Eigen::MatrixXd laplacian_apply(const ClientGraph& graph, const Eigen::MatrixXd& w) {
    if (w.rows() != graph.n_clients())
        throw DimensionMismatch("laplacian_apply: row count mismatch");
    Eigen::MatrixXd out(w.rows(), w.cols());
    for (int k = 0; k < graph.n_clients(); ++k) {
        Eigen::RowVectorXd acc = graph.degrees()(k) * w.row(k);
        for (auto [l, a] : graph.neighbors(k)) acc.noalias() -= a * w.row(l);
        out.row(k) = acc;
    }
    return out;
}

WeightScenario WeightScenario::random(std::uint64_t seed) {
    WeightScenario s;
    s.kind = Kind::Random;
    s.seed = seed;
    return s;
}

WeightScenario WeightScenario::equal(double c) {
    WeightScenario s;
    s.kind = Kind::Equal;
    s.c = c;
    return s;
}

WeightScenario WeightScenario::weighted(std::vector<int> small_set, double c_small,
                                        double c_mixed, double c_full) {
    WeightScenario s;
    s.kind = Kind::Weighted;
    s.small_set = std::move(small_set);
    s.c_small = c_small;
    s.c_mixed = c_mixed;
    s.c_full = c_full;
    return s;
}

WeightScenario WeightScenario::similar(std::vector<std::vector<int>> label_sets) {
    WeightScenario s;
    s.kind = Kind::Similar;
    s.label_sets = std::move(label_sets);
    return s;
}

ClientGraph assign_weights(const ClientGraph& graph, const WeightScenario& scenario) {
    std::vector<Edge> edges = graph.edges();

    switch (scenario.kind) {
        case WeightScenario::Kind::Random: {
            auto rng = make_rng(scenario.seed, Stream::Weights);
            std::normal_distribution<double> normal(0.0, 1.0);
            // |N(0,1)| clipped to 1 keeps the draw random and the weight in [0,1].
            for (Edge& e : edges) e.weight = std::min(std::abs(normal(rng)), 1.0);
            break;
        }
        case WeightScenario::Kind::Equal: {
            for (Edge& e : edges) e.weight = scenario.c;
            break;
        }
        case WeightScenario::Kind::Weighted: {
            std::set<int> small(scenario.small_set.begin(), scenario.small_set.end());
            for (Edge& e : edges) {
                int in_small = static_cast<int>(small.count(e.k)) + static_cast<int>(small.count(e.l));
                e.weight = in_small == 2 ? scenario.c_small
                         : in_small == 1 ? scenario.c_mixed
                                         : scenario.c_full;
            }
            break;
        }
        case WeightScenario::Kind::Similar: {
            if (scenario.label_sets.size() != static_cast<size_t>(graph.n_clients()))
                throw MissingLabelSets("assign_weights: Similar scenario needs one label set per client");
            std::vector<std::set<int>> sets;
            sets.reserve(scenario.label_sets.size());
            for (const auto& ls : scenario.label_sets) sets.emplace_back(ls.begin(), ls.end());
            for (Edge& e : edges) {
                int shared = 0;
                for (int lab : sets[e.k]) shared += static_cast<int>(sets[e.l].count(lab));
                e.weight = shared == 0 ? 0.0 : shared == 1 ? 0.5 : 1.0;
            }
            break;
        }
    }

    std::vector<Edge> kept;
    for (const Edge& e : edges)
        if (e.weight != 0.0) kept.push_back(e);
    return build_graph(graph.n_clients(), kept);
}

ClientGraph complete_graph(int n, double weight) {
    std::vector<Edge> edges;
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) edges.push_back({k, l, weight});
    return build_graph(n, edges);
}

ClientGraph star_graph(int n_clients, double weight) {
    std::vector<Edge> edges;
    for (int k = 1; k <= n_clients; ++k) edges.push_back({0, k, weight});
    return build_graph(n_clients + 1, edges);
}

ClientGraph load_graph_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_graph_json: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("load_graph_json: " + path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("n") || !j.contains("edges"))
        throw SchemaError("load_graph_json: expected object with keys \"n\" and \"edges\"");
    if (!j["n"].is_number_integer())
        throw SchemaError("load_graph_json: \"n\" must be an integer");
    if (!j["edges"].is_array())
        throw SchemaError("load_graph_json: \"edges\" must be an array");

    std::vector<Edge> edges;
    for (const auto& row : j["edges"]) {
        if (!row.is_array() || row.size() != 3)
            throw SchemaError("load_graph_json: each edge must be [k, l, w]");
        edges.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<double>()});
    }
    return build_graph(j["n"].get<int>(), edges);
}

void save_graph_json(const ClientGraph& graph, const std::string& path) {
    nlohmann::json j;
    j["n"] = graph.n_clients();
    auto edges = nlohmann::json::array();
    for (const Edge& e : graph.edges()) edges.push_back({e.k, e.l, e.weight});
    j["edges"] = edges;
    std::ofstream out(path);
    if (!out) throw ParseError("save_graph_json: cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace fedlap
