#include "fedlap/runspec.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "fedlap/errors.hpp"

namespace fedlap {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw InvalidConfig("config: unknown key \"" + it.key() + "\" in " + where);
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key))
        throw InvalidConfig("config: missing key \"" + key + "\" in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidConfig("config: bad value for \"" + key + "\" in " + where);
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidConfig("config: bad value for \"" + key + "\" in " + where);
    }
}

void parse_dataset(const json& j, RunSpec& spec) {
    reject_unknown_keys(j, {"type", "n_clients", "n_features", "n_classes", "labels_per_client",
                            "samples_mean", "samples_std", "seed", "class_sep", "client_shift",
                            "train_fraction", "path", "cutoff"},
                        "dataset");
    const std::string type = require<std::string>(j, "type", "dataset");
    if (type == "synthetic") {
        spec.dataset_kind = RunSpec::DatasetKind::Synthetic;
        auto& s = spec.synthetic;
        s.n_clients = require<int>(j, "n_clients", "dataset");
        s.n_features = require<int>(j, "n_features", "dataset");
        s.n_classes = require<int>(j, "n_classes", "dataset");
        s.labels_per_client = require<int>(j, "labels_per_client", "dataset");
        s.samples_mean = require<double>(j, "samples_mean", "dataset");
        s.samples_std = get_or<double>(j, "samples_std", 0.0, "dataset");
        s.seed = get_or<std::uint64_t>(j, "seed", 0, "dataset");
        s.class_sep = get_or<double>(j, "class_sep", s.class_sep, "dataset");
        s.client_shift = get_or<double>(j, "client_shift", s.client_shift, "dataset");
        s.train_fraction = get_or<double>(j, "train_fraction", s.train_fraction, "dataset");
    } else if (type == "csv") {
        spec.dataset_kind = RunSpec::DatasetKind::Csv;
        spec.csv_path = require<std::string>(j, "path", "dataset");
    } else if (type == "none") {
        spec.dataset_kind = RunSpec::DatasetKind::None;
    } else {
        throw InvalidConfig("config: dataset.type must be synthetic, csv, or none");
    }
    if (j.contains("cutoff")) {
        const json& c = j.at("cutoff");
        reject_unknown_keys(c, {"fraction_of_clients", "keep_fraction", "seed"}, "dataset.cutoff");
        spec.has_cutoff = true;
        spec.cutoff_fraction_of_clients =
            get_or<double>(c, "fraction_of_clients", 0.5, "dataset.cutoff");
        spec.cutoff_keep_fraction = get_or<double>(c, "keep_fraction", 0.1, "dataset.cutoff");
        if (c.contains("seed"))
            spec.cutoff_seed = require<std::uint64_t>(c, "seed", "dataset.cutoff");
    }
}

void parse_graph(const json& j, RunSpec& spec) {
    reject_unknown_keys(j, {"type", "file", "n", "weight", "edges", "scenario"}, "graph");
    const std::string type = get_or<std::string>(j, "type", "complete", "graph");
    if (type == "file") {
        spec.graph_kind = RunSpec::GraphKind::File;
        spec.graph_file = require<std::string>(j, "file", "graph");
    } else if (type == "complete") {
        spec.graph_kind = RunSpec::GraphKind::Complete;
    } else if (type == "star") {
        spec.graph_kind = RunSpec::GraphKind::Star;
    } else if (type == "path") {
        spec.graph_kind = RunSpec::GraphKind::Path;
    } else if (type == "edges") {
        spec.graph_kind = RunSpec::GraphKind::Edges;
        if (!j.contains("edges") || !j.at("edges").is_array())
            throw InvalidConfig("config: graph.edges must be an array of [k, l, w]");
        for (const auto& row : j.at("edges")) {
            if (!row.is_array() || row.size() != 3)
                throw InvalidConfig("config: graph.edges entries must be [k, l, w]");
            spec.graph_edges.push_back(
                {row[0].get<int>(), row[1].get<int>(), row[2].get<double>()});
        }
    } else {
        throw InvalidConfig("config: graph.type must be file, complete, star, path, or edges");
    }
    spec.graph_n = get_or<int>(j, "n", 0, "graph");
    spec.graph_weight = get_or<double>(j, "weight", 1.0, "graph");

    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        reject_unknown_keys(s, {"kind", "seed", "c", "small_set", "c_small", "c_mixed", "c_full"},
                            "graph.scenario");
        const std::string kind = require<std::string>(s, "kind", "graph.scenario");
        if (kind == "random") {
            spec.weight_scenario =
                WeightScenario::random(get_or<std::uint64_t>(s, "seed", 0, "graph.scenario"));
        } else if (kind == "equal") {
            spec.weight_scenario =
                WeightScenario::equal(get_or<double>(s, "c", 0.5, "graph.scenario"));
        } else if (kind == "weighted") {
            spec.weight_scenario = WeightScenario::weighted(
                require<std::vector<int>>(s, "small_set", "graph.scenario"),
                get_or<double>(s, "c_small", 0.0, "graph.scenario"),
                get_or<double>(s, "c_mixed", 0.5, "graph.scenario"),
                get_or<double>(s, "c_full", 1.0, "graph.scenario"));
        } else if (kind == "similar") {
            // label sets come from the dataset at build time
            WeightScenario w;
            w.kind = WeightScenario::Kind::Similar;
            spec.weight_scenario = w;
        } else {
            throw InvalidConfig("config: scenario.kind must be random, equal, weighted, or similar");
        }
    }
}

void parse_model(const json& j, RunSpec& spec) {
    reject_unknown_keys(j, {"type", "curvature", "centers", "l2_alpha", "hidden"}, "model");
    const std::string type = require<std::string>(j, "type", "model");
    if (type == "quadratic") {
        spec.model_kind = RunSpec::ModelKind::Quadratic;
        spec.quad_curvature = get_or<double>(j, "curvature", 1.0, "model");
        if (j.contains("centers"))
            spec.quad_centers = require<std::vector<std::vector<double>>>(j, "centers", "model");
    } else if (type == "mlr") {
        spec.model_kind = RunSpec::ModelKind::Mlr;
        spec.mlr_l2_alpha = get_or<double>(j, "l2_alpha", 0.01, "model");
    } else if (type == "mlp") {
        spec.model_kind = RunSpec::ModelKind::Mlp;
        spec.mlp_hidden = get_or<int>(j, "hidden", 20, "model");
    } else {
        throw InvalidConfig("config: model.type must be quadratic, mlr, or mlp");
    }
}

void parse_train(const json& j, RunSpec& spec) {
    reject_unknown_keys(j, {"local_lr", "local_steps", "rounds", "eta", "sample_size",
                            "batch_size", "seed", "mode", "avg_alpha", "sampled_neighbors_only",
                            "threads", "retain_snapshots", "eval_every"},
                        "train");
    TrainConfig& t = spec.train;
    t.local_lr = require<double>(j, "local_lr", "train");
    t.local_steps = require<int>(j, "local_steps", "train");
    t.rounds = require<int>(j, "rounds", "train");
    t.eta = require<double>(j, "eta", "train");
    t.sample_size = get_or<int>(j, "sample_size", 0, "train");  // 0: all clients
    t.batch_size = require<int>(j, "batch_size", "train");
    t.seed = get_or<std::uint64_t>(j, "seed", 0, "train");
    const std::string mode = get_or<std::string>(j, "mode", "centralized", "train");
    if (mode == "centralized") {
        t.mode = Mode::Centralized;
    } else if (mode == "decentralized") {
        t.mode = Mode::Decentralized;
    } else {
        throw InvalidConfig("config: train.mode must be centralized or decentralized");
    }
    if (j.contains("avg_alpha")) t.avg_alpha = require<double>(j, "avg_alpha", "train");
    t.sampled_neighbors_only =
        get_or<bool>(j, "sampled_neighbors_only", false, "train");
    t.threads = get_or<int>(j, "threads", 1, "train");
    t.retain_snapshots = get_or<bool>(j, "retain_snapshots", false, "train");
    if (j.contains("eval_every")) {
        t.eval_every = require<int>(j, "eval_every", "train");
        if (t.eval_every < 1) throw InvalidConfig("config: train.eval_every must be >= 1");
    } else {
        t.eval_every = 0;  // auto: 1 for T <= 500, else 5
    }

    if (t.local_lr <= 0.0) throw InvalidConfig("config: train.local_lr must be > 0");
    if (t.local_steps < 1) throw InvalidConfig("config: train.local_steps must be >= 1");
    if (t.rounds < 0) throw InvalidConfig("config: train.rounds must be >= 0");
    if (t.eta < 0.0) throw InvalidConfig("config: train.eta must be >= 0");
    if (t.batch_size < 1) throw InvalidConfig("config: train.batch_size must be >= 1");
    if (t.threads < 1) throw InvalidConfig("config: train.threads must be >= 1");
}

RunSpec parse_spec(const json& j, const std::string& origin) {
    if (!j.is_object()) throw InvalidConfig("config " + origin + ": top level must be an object");
    reject_unknown_keys(j, {"dataset", "graph", "model", "train", "output_dir"}, origin);

    RunSpec spec;
    if (j.contains("dataset")) parse_dataset(j.at("dataset"), spec);
    if (j.contains("graph")) parse_graph(j.at("graph"), spec);
    if (!j.contains("model")) throw InvalidConfig("config " + origin + ": missing \"model\"");
    parse_model(j.at("model"), spec);
    if (!j.contains("train")) throw InvalidConfig("config " + origin + ": missing \"train\"");
    parse_train(j.at("train"), spec);
    spec.output_dir = get_or<std::string>(j, "output_dir", "out", origin);
    return spec;
}

}  // namespace

RunSpec RunSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InvalidConfig("config " + path + ": " + e.what());
    }
    return parse_spec(j, path);
}

RunSpec RunSpec::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidConfig("config " + origin + ": " + e.what());
    }
    return parse_spec(j, origin);
}

std::optional<std::uint64_t> seed_override_from_env() {
    const char* env_seed = std::getenv("FEDLAP_SEED");
    if (!env_seed) return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env_seed, &end, 10);
    if (end == env_seed || *end != '\0')
        throw InvalidConfig("FEDLAP_SEED must be an unsigned integer, got \"" +
                            std::string(env_seed) + "\"");
    return v;
}

Experiment build_experiment(const RunSpec& spec_in) {
    RunSpec spec = spec_in;
    if (auto seed = seed_override_from_env()) spec.train.seed = *seed;

    Experiment exp;
    exp.train = spec.train;
    exp.output_dir = spec.output_dir;

    // data
    switch (spec.dataset_kind) {
        case RunSpec::DatasetKind::Synthetic: {
            exp.dataset = std::make_unique<FederatedDataset>(generate_synthetic(spec.synthetic));
            break;
        }
        case RunSpec::DatasetKind::Csv: {
            exp.dataset = std::make_unique<FederatedDataset>(load_csv(spec.csv_path));
            break;
        }
        case RunSpec::DatasetKind::None:
            break;
    }
    if (spec.has_cutoff) {
        if (!exp.dataset) throw InvalidConfig("config: cutoff requires a dataset");
        CutoffResult cut = apply_cutoff(*exp.dataset, spec.cutoff_fraction_of_clients,
                                        spec.cutoff_keep_fraction,
                                        spec.cutoff_seed.value_or(spec.train.seed));
        *exp.dataset = std::move(cut.dataset);
        exp.cut_clients = std::move(cut.cut_clients);
    }

    // graph (n is taken from the file for file graphs, otherwise from the
    // config or inferred from the dataset / quadratic centers)
    ClientGraph graph;
    if (spec.graph_kind == RunSpec::GraphKind::File) {
        graph = load_graph_json(spec.graph_file);
    } else {
        int n = spec.graph_n;
        if (n == 0) {
            if (exp.dataset) {
                n = exp.dataset->n_clients();
            } else if (!spec.quad_centers.empty()) {
                n = static_cast<int>(spec.quad_centers.size());
            } else {
                throw InvalidConfig("config: graph.n must be given when it cannot be inferred");
            }
        }
        switch (spec.graph_kind) {
            case RunSpec::GraphKind::Complete:
                graph = complete_graph(n, spec.graph_weight);
                break;
            case RunSpec::GraphKind::Star:
                graph = star_graph(n - 1, spec.graph_weight);
                break;
            case RunSpec::GraphKind::Path: {
                std::vector<Edge> edges;
                for (int k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1, spec.graph_weight});
                graph = build_graph(n, edges);
                break;
            }
            case RunSpec::GraphKind::Edges:
                graph = build_graph(n, spec.graph_edges);
                break;
            case RunSpec::GraphKind::File:
                break;  // handled above
        }
    }
    if (spec.weight_scenario) {
        WeightScenario scenario = *spec.weight_scenario;
        if (scenario.kind == WeightScenario::Kind::Similar) {
            if (!exp.dataset)
                throw MissingLabelSets("config: similar scenario needs dataset label sets");
            scenario.label_sets = exp.dataset->label_sets();
        }
        graph = assign_weights(graph, scenario);
    }

    if (exp.dataset && graph.n_clients() != exp.dataset->n_clients())
        throw InvalidConfig("config: graph has " + std::to_string(graph.n_clients()) +
                            " vertices but dataset has " +
                            std::to_string(exp.dataset->n_clients()) + " clients");

    // models
    std::vector<std::shared_ptr<LossModel>> models;
    switch (spec.model_kind) {
        case RunSpec::ModelKind::Quadratic: {
            int dim = 1;
            if (!spec.quad_centers.empty()) {
                if (static_cast<int>(spec.quad_centers.size()) != graph.n_clients())
                    throw InvalidConfig("config: model.centers must have one row per client");
                dim = static_cast<int>(spec.quad_centers.front().size());
            }
            for (int k = 0; k < graph.n_clients(); ++k) {
                Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
                if (!spec.quad_centers.empty()) {
                    if (static_cast<int>(spec.quad_centers[k].size()) != dim)
                        throw InvalidConfig("config: model.centers rows must share one length");
                    for (int j = 0; j < dim; ++j) c(j) = spec.quad_centers[k][j];
                }
                models.push_back(std::make_shared<QuadraticModel>(c, spec.quad_curvature));
            }
            break;
        }
        case RunSpec::ModelKind::Mlr: {
            if (!exp.dataset) throw InvalidConfig("config: mlr model needs a dataset");
            auto shared = std::make_shared<MlrModel>(exp.dataset->n_features,
                                                     exp.dataset->n_classes, spec.mlr_l2_alpha);
            models.assign(graph.n_clients(), shared);
            break;
        }
        case RunSpec::ModelKind::Mlp: {
            if (!exp.dataset) throw InvalidConfig("config: mlp model needs a dataset");
            auto shared = std::make_shared<MlpModel>(exp.dataset->n_features, spec.mlp_hidden,
                                                     exp.dataset->n_classes);
            models.assign(graph.n_clients(), shared);
            break;
        }
    }

    exp.instance.graph = std::move(graph);
    exp.instance.models = std::move(models);
    exp.instance.data = exp.dataset.get();

    if (exp.train.sample_size == 0) exp.train.sample_size = exp.instance.n_clients();
    if (exp.train.eval_every == 0) exp.train.eval_every = exp.train.rounds <= 500 ? 1 : 5;
    exp.instance.check();
    return exp;
}

}  // namespace fedlap
