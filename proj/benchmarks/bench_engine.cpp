#include <benchmark/benchmark.h>

#include "fedlap/analysis.hpp"
#include "fedlap/engine.hpp"
#include "fedlap/rng.hpp"

using namespace fedlap;

namespace {

FederatedDataset make_data(int n_clients, int n_features, int n_classes) {
    SyntheticSpec spec;
    spec.n_clients = n_clients;
    spec.n_features = n_features;
    spec.n_classes = n_classes;
    spec.labels_per_client = 2;
    spec.samples_mean = 100;
    spec.samples_std = 20;
    spec.seed = 1;
    return generate_synthetic(spec);
}

void BM_LocalUpdateMlr(benchmark::State& state) {
    FederatedDataset data = make_data(1, 16, 10);
    MlrModel model(16, 10, 0.01);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(model.param_dim());
    auto rng = make_rng(2, Stream::Probes);
    for (auto _ : state) {
        auto res = local_update(model, w, 5, 0.05, 20, data.clients[0].train(), rng);
        benchmark::DoNotOptimize(res.w);
    }
}
BENCHMARK(BM_LocalUpdateMlr);

void BM_ServerRegularize(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    ClientGraph graph = complete_graph(n, 0.5);
    StackedParams w(n, 64);
    w.blocks.setRandom();
    std::vector<bool> mask(n, true);
    for (auto _ : state) {
        StackedParams out = server_regularize(w, mask, graph, 0.01, 0.25);
        benchmark::DoNotOptimize(out.blocks);
    }
}
BENCHMARK(BM_ServerRegularize)->Arg(20)->Arg(100);

void BM_MatrixFormStep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    ClientGraph graph = complete_graph(n, 0.5);
    StackedParams w(n, 64);
    w.blocks.setRandom();
    std::vector<bool> mask(n, true);
    for (auto _ : state) {
        StackedParams out = matrix_form_step(w, w, mask, graph, 0.01, 0.25);
        benchmark::DoNotOptimize(out.blocks);
    }
}
BENCHMARK(BM_MatrixFormStep)->Arg(20)->Arg(100);

void BM_BuildGraphRho(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    std::vector<Edge> edges;
    for (int k = 0; k < n; ++k)
        for (int l = k + 1; l < n; ++l) edges.push_back({k, l, 0.5});
    for (auto _ : state) {
        ClientGraph g = build_graph(n, edges);
        benchmark::DoNotOptimize(g.rho());
    }
}
BENCHMARK(BM_BuildGraphRho)->Arg(50)->Arg(200);

void BM_FedURound(benchmark::State& state) {
    const int n = 20;
    FederatedDataset data = make_data(n, 8, 6);
    FedInstance instance;
    instance.graph = complete_graph(n, 0.5);
    auto model = std::make_shared<MlrModel>(8, 6, 0.01);
    instance.models.assign(n, model);
    instance.data = &data;

    TrainConfig config;
    config.local_lr = 0.03;
    config.local_steps = 5;
    config.rounds = 10;
    config.eta = 0.01;
    config.sample_size = n;
    config.batch_size = 16;
    config.eval_every = 10;
    for (auto _ : state) {
        RunHistory h = run_fedu(instance, config);
        benchmark::DoNotOptimize(h.final_params.blocks);
    }
}
BENCHMARK(BM_FedURound);

void BM_SolveQuadraticOptimum(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    ClientGraph graph = complete_graph(n, 0.5);
    Eigen::MatrixXd centers = Eigen::MatrixXd::Random(n, 8);
    Eigen::VectorXd curv = Eigen::VectorXd::Ones(n);
    for (auto _ : state) {
        StackedParams w = solve_quadratic_optimum(graph, centers, curv, 1.0);
        benchmark::DoNotOptimize(w.blocks);
    }
}
BENCHMARK(BM_SolveQuadraticOptimum)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
