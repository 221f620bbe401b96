#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedlap/data.hpp"
#include "fedlap/engine.hpp"
#include "fedlap/graph.hpp"

namespace fedlap {

/// Experiment configuration parsed from a JSON file. Unknown keys are
/// errors: a silent typo in eta or mu invalidates an experiment.
struct RunSpec {
    // dataset
    enum class DatasetKind { Synthetic, Csv, None };
    DatasetKind dataset_kind = DatasetKind::None;
    SyntheticSpec synthetic;
    std::string csv_path;
    bool has_cutoff = false;
    double cutoff_fraction_of_clients = 0.5;
    double cutoff_keep_fraction = 0.1;
    std::optional<std::uint64_t> cutoff_seed;  // defaults to train seed

    // graph
    enum class GraphKind { File, Complete, Star, Path, Edges };
    GraphKind graph_kind = GraphKind::Complete;
    std::string graph_file;
    int graph_n = 0;  // 0: infer from dataset / models
    double graph_weight = 1.0;
    std::vector<Edge> graph_edges;
    std::optional<WeightScenario> weight_scenario;

    // model
    enum class ModelKind { Quadratic, Mlr, Mlp };
    ModelKind model_kind = ModelKind::Mlr;
    double quad_curvature = 1.0;
    std::vector<std::vector<double>> quad_centers;  // one row per client; empty: zeros
    double mlr_l2_alpha = 0.01;
    int mlp_hidden = 20;

    TrainConfig train;
    std::string output_dir = "out";

    static RunSpec from_file(const std::string& path);
    static RunSpec from_json_text(const std::string& text, const std::string& origin = "<inline>");
};

/// Materialized experiment: everything a run needs, with stable storage for
/// the dataset the instance points into.
struct Experiment {
    FedInstance instance;
    std::unique_ptr<FederatedDataset> dataset;  // null for data-free models
    std::vector<int> cut_clients;               // from the cutoff step, when applied
    TrainConfig train;
    std::string output_dir;
};

/// Builds graph, data, and models from the spec. Honors FEDLAP_SEED.
Experiment build_experiment(const RunSpec& spec);

/// Parsed FEDLAP_SEED, when the variable is set. Throws InvalidConfig on a
/// malformed value.
std::optional<std::uint64_t> seed_override_from_env();

}  // namespace fedlap
