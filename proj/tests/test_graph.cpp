#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fedlap/graph.hpp"
#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"
#include "test_util.hpp"

using namespace fedlap;

namespace {

ClientGraph random_connected_graph(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Edge> edges;
    for (int k = 1; k < n; ++k) {
        std::uniform_int_distribution<int> pick(0, k - 1);
        edges.push_back({pick(rng), k, 0.1 + unit(rng)});  // spanning tree
    }
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) {
            bool exists = false;
            for (auto& e : edges) exists |= (e.k == std::min(k, l) && e.l == std::max(k, l)) ||
                                            (e.l == std::min(k, l) && e.k == std::max(k, l));
            if (!exists && unit(rng) < 0.3) edges.push_back({k, l, unit(rng)});
        }
    return build_graph(n, edges);
}

}  // namespace

TEST_CASE("two-node graph: Laplacian and spectral norm") {
    ClientGraph g = build_graph(2, {{0, 1, 1.0}});
    CHECK(g.laplacian()(0, 0) == doctest::Approx(1.0));
    CHECK(g.laplacian()(0, 1) == doctest::Approx(-1.0));
    CHECK(g.laplacian()(1, 0) == doctest::Approx(-1.0));
    CHECK(g.laplacian()(1, 1) == doctest::Approx(1.0));
    CHECK(g.rho() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(g.connected());
}

TEST_CASE("empty graph: zero Laplacian, rho 0") {
    ClientGraph g = build_graph(3, {});
    CHECK(g.laplacian().isZero(0.0));
    CHECK(g.rho() == 0.0);
    CHECK_FALSE(g.connected());
}

TEST_CASE("path-3 eigenvalues {0,1,3} against the Jacobi oracle") {
    ClientGraph g = build_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    auto eig = test_util::jacobi_eigenvalues(g.laplacian());
    CHECK(eig[0] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(eig[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(eig[2] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(g.rho() == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("build_graph validation errors") {
    CHECK_THROWS_AS(build_graph(3, {{0, 1, 1.0}, {1, 0, 2.0}}), DuplicateEdge);
    CHECK_THROWS_AS(build_graph(3, {{1, 1, 1.0}}), SelfLoop);
    CHECK_THROWS_AS(build_graph(3, {{0, 1, -0.5}}), NegativeWeight);
    CHECK_THROWS_AS(build_graph(3, {{0, 3, 1.0}}), IndexOutOfRange);
    CHECK_THROWS_AS(build_graph(3, {{-1, 0, 1.0}}), IndexOutOfRange);
}

TEST_CASE("Laplacian structure: row sums and positive semidefiniteness") {
    auto rng = make_rng(3, Stream::Probes);
    for (int n : {5, 17, 50}) {
        ClientGraph g = random_connected_graph(n, rng);
        Eigen::VectorXd row_sums = g.laplacian().rowwise().sum();
        CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-12);
        auto eig = test_util::jacobi_eigenvalues(g.laplacian());
        CHECK(eig.front() >= -1e-10);
        CHECK(g.rho() == doctest::Approx(eig.back()).epsilon(1e-8));
    }
}

TEST_CASE("laplacian_quadratic examples") {
    ClientGraph g = build_graph(2, {{0, 1, 1.0}});
    StackedParams w(2, 1);
    w.blocks << 1.0, 3.0;
    CHECK(laplacian_quadratic(g, w) == doctest::Approx(4.0).epsilon(1e-14));

    StackedParams same(2, 3);
    same.blocks.row(0) << 1.0, -2.0, 0.5;
    same.blocks.row(1) << 1.0, -2.0, 0.5;
    CHECK(laplacian_quadratic(g, same) == 0.0);

    ClientGraph empty = build_graph(4, {});
    StackedParams any(4, 2);
    any.blocks.setRandom();
    CHECK(laplacian_quadratic(empty, any) == 0.0);

    StackedParams wrong(3, 1);
    CHECK_THROWS_AS(laplacian_quadratic(g, wrong), DimensionMismatch);
}

TEST_CASE("pairwise form equals the block-quadratic form on random inputs") {
    auto rng = make_rng(4, Stream::Probes);
    ClientGraph g = random_connected_graph(12, rng);
    for (int trial = 0; trial < 100; ++trial) {
        StackedParams w(12, 4);
        w.blocks = test_util::random_matrix(12, 4, rng);
        const double pairwise = laplacian_quadratic(g, w);
        // sum_k <w_k, (L W)_k> via the blockwise Laplacian action
        const double blockwise = (w.blocks.array() * laplacian_apply(g, w.blocks).array()).sum();
        CHECK(pairwise == doctest::Approx(blockwise).epsilon(1e-10));
    }
}

TEST_CASE("connected graph: zero quadratic form implies consensus") {
    auto rng = make_rng(5, Stream::Probes);
    ClientGraph g = random_connected_graph(8, rng);
    StackedParams w(8, 3);
    Eigen::RowVectorXd shared = test_util::random_matrix(1, 3, rng);
    for (int k = 0; k < 8; ++k) w.blocks.row(k) = shared;
    CHECK(laplacian_quadratic(g, w) <= 1e-12);
    double max_gap = 0.0;
    for (int k = 0; k < 8; ++k)
        for (int l = 0; l < 8; ++l)
            max_gap = std::max(max_gap, (w.blocks.row(k) - w.blocks.row(l)).norm());
    CHECK(max_gap <= 1e-8);
}

TEST_CASE("assign_weights: Equal") {
    ClientGraph g = assign_weights(complete_graph(3), WeightScenario::equal(0.5));
    for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l)
            CHECK(g.adjacency()(k, l) == (k == l ? 0.0 : 0.5));
}

TEST_CASE("assign_weights: Similar by shared labels") {
    ClientGraph g = assign_weights(
        complete_graph(3), WeightScenario::similar({{1, 2}, {1, 2}, {3, 4}}));
    CHECK(g.adjacency()(0, 1) == 1.0);
    CHECK(g.adjacency()(0, 2) == 0.0);
    CHECK(g.adjacency()(1, 2) == 0.0);
    CHECK_THROWS_AS(assign_weights(complete_graph(3), WeightScenario::similar({{1}})),
                    MissingLabelSets);
}

TEST_CASE("assign_weights: Weighted by data size") {
    ClientGraph g = assign_weights(complete_graph(3), WeightScenario::weighted({0, 1}));
    CHECK(g.adjacency()(0, 1) == 0.0);
    CHECK(g.adjacency()(0, 2) == 0.5);
    CHECK(g.adjacency()(1, 2) == 0.5);
}

TEST_CASE("assign_weights: Random stays symmetric, in [0,1], deterministic") {
    ClientGraph base = complete_graph(6);
    ClientGraph a = assign_weights(base, WeightScenario::random(123));
    ClientGraph b = assign_weights(base, WeightScenario::random(123));
    CHECK((a.adjacency() - a.adjacency().transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.adjacency().minCoeff() >= 0.0);
    CHECK(a.adjacency().maxCoeff() <= 1.0);
    CHECK((a.adjacency() - b.adjacency()).cwiseAbs().maxCoeff() == 0.0);
    ClientGraph c = assign_weights(base, WeightScenario::random(124));
    CHECK((a.adjacency() - c.adjacency()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("topology constructors") {
    ClientGraph star = star_graph(3);
    CHECK(star.n_clients() == 4);
    for (int k = 1; k <= 3; ++k) {
        CHECK(star.adjacency()(0, k) == 1.0);
        for (int l = 1; l <= 3; ++l)
            if (k != l) CHECK(star.adjacency()(k, l) == 0.0);
    }
    ClientGraph complete2 = complete_graph(2);
    CHECK(complete2.adjacency()(0, 1) == 1.0);
    CHECK(complete2.rho() == doctest::Approx(2.0));
}

TEST_CASE("graph JSON round trip and validation") {
    const std::string path = std::filesystem::temp_directory_path() / "fedlap_graph_test.json";
    ClientGraph g = build_graph(4, {{0, 1, 0.5}, {2, 3, 1.5}, {0, 3, 1.0}});
    save_graph_json(g, path);
    ClientGraph loaded = load_graph_json(path);
    CHECK((loaded.adjacency() - g.adjacency()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.rho() == doctest::Approx(g.rho()).epsilon(1e-14));

    {
        std::ofstream bad(path);
        bad << "{\"n\": 2, \"edges\": [[0, 0, 1.0]]}";
    }
    CHECK_THROWS_AS(load_graph_json(path), SelfLoop);
    {
        std::ofstream bad(path);
        bad << "{\"edges\": []}";
    }
    CHECK_THROWS_AS(load_graph_json(path), SchemaError);
    CHECK_THROWS_AS(load_graph_json("/nonexistent/graph.json"), ParseError);
    std::filesystem::remove(path);
}
