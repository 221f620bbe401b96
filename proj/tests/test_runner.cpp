#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedlap/errors.hpp"
#include "fedlap/runner.hpp"
#include "fedlap/runspec.hpp"
#include "fedlap/verify.hpp"

using namespace fedlap;
namespace fs = std::filesystem;

namespace {

std::string small_mlr_config(const std::string& out_dir, int rounds = 6,
                             const std::string& extra_train = "") {
    std::ostringstream ss;
    ss << R"({
      "dataset": {"type": "synthetic", "n_clients": 4, "n_features": 3, "n_classes": 3,
                  "labels_per_client": 2, "samples_mean": 12, "samples_std": 2, "seed": 5},
      "graph": {"type": "complete", "weight": 0.5},
      "model": {"type": "mlr", "l2_alpha": 0.01},
      "train": {"local_lr": 0.05, "local_steps": 2, "rounds": )"
       << rounds << R"(, "eta": 0.01, "batch_size": 4, "seed": 9)" << extra_train << R"(},
      "output_dir": ")" << out_dir << R"("
    })";
    return ss.str();
}

std::string write_config(const std::string& text, const std::string& name) {
    const std::string path = (fs::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << text;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("runspec: strict parsing") {
    CHECK_THROWS_WITH_AS(
        RunSpec::from_json_text(R"({"model": {"type": "mlr"}, "train": {"local_lr": 0.1,
            "local_steps": 1, "rounds": 1, "eta": 0.0, "batch_size": 1, "tpyo": 3}})"),
        doctest::Contains("tpyo"), InvalidConfig);
    CHECK_THROWS_WITH_AS(
        RunSpec::from_json_text(R"({"train": {"local_lr": 0.1, "local_steps": 1,
            "rounds": 1, "eta": 0.0, "batch_size": 1}})"),
        doctest::Contains("model"), InvalidConfig);
    CHECK_THROWS_AS(RunSpec::from_json_text(R"({"model": {"type": "svm"}, "train": {}})"),
                    InvalidConfig);
    CHECK_THROWS_AS(RunSpec::from_file("/nonexistent/config.json"), InvalidConfig);

    RunSpec ok = RunSpec::from_json_text(small_mlr_config("/tmp/x"));
    CHECK(ok.train.rounds == 6);
    CHECK(ok.train.mode == Mode::Centralized);
    CHECK(ok.synthetic.n_clients == 4);
}

TEST_CASE("build_experiment wires graph, data, and models together") {
    RunSpec spec = RunSpec::from_json_text(small_mlr_config("/tmp/x"));
    Experiment exp = build_experiment(spec);
    CHECK(exp.instance.n_clients() == 4);
    CHECK(exp.instance.graph.adjacency()(0, 1) == 0.5);
    CHECK(exp.train.sample_size == 4);  // defaulted to all clients
    CHECK(exp.dataset != nullptr);

    // quadratic spec: no dataset needed, centers define the dimension
    RunSpec quad = RunSpec::from_json_text(R"({
      "graph": {"type": "edges", "n": 2, "edges": [[0, 1, 1.0]]},
      "model": {"type": "quadratic", "centers": [[0.0], [4.0]]},
      "train": {"local_lr": 0.1, "local_steps": 1, "rounds": 3, "eta": 0.5, "batch_size": 1}
    })");
    Experiment qexp = build_experiment(quad);
    CHECK(qexp.instance.param_dim() == 1);
    CHECK(qexp.dataset == nullptr);
    CHECK_FALSE(qexp.instance.models[0]->uses_data());

    // file graphs carry their own vertex count
    const std::string graph_path =
        (fs::temp_directory_path() / "fedlap_cfg_graph.json").string();
    save_graph_json(build_graph(3, {{0, 1, 1.0}, {1, 2, 2.0}}), graph_path);
    RunSpec filed = RunSpec::from_json_text(R"({
      "graph": {"type": "file", "file": ")" + graph_path + R"("},
      "model": {"type": "quadratic"},
      "train": {"local_lr": 0.1, "local_steps": 1, "rounds": 1, "eta": 0.1, "batch_size": 1}
    })");
    Experiment fexp = build_experiment(filed);
    CHECK(fexp.instance.n_clients() == 3);
    fs::remove(graph_path);
}

TEST_CASE("FEDLAP_SEED overrides the configured seed") {
    RunSpec spec = RunSpec::from_json_text(small_mlr_config("/tmp/x"));
    setenv("FEDLAP_SEED", "4242", 1);
    Experiment exp = build_experiment(spec);
    unsetenv("FEDLAP_SEED");
    CHECK(exp.train.seed == 4242);
    setenv("FEDLAP_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(build_experiment(spec), InvalidConfig);
    unsetenv("FEDLAP_SEED");
}

TEST_CASE("cmd_run writes history.csv and a matching summary") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_run_test").string();
    fs::remove_all(dir);
    const std::string cfg = write_config(small_mlr_config(dir, 6), "fedlap_cfg_run.json");
    CHECK(cmd_run(cfg) == kExitOk);

    const std::string csv = slurp(dir + "/history.csv");
    int lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 8);  // header + T+1 rows

    // summary's final objective must match the last CSV row byte for byte
    const std::string summary = slurp(dir + "/summary.json");
    const size_t last_row = csv.rfind('\n', csv.size() - 2);
    std::string row = csv.substr(last_row + 1);
    const size_t c0 = row.find(','), c1 = row.find(',', c0 + 1);
    const std::string objective_text = row.substr(c0 + 1, c1 - c0 - 1);
    CHECK(summary.find("\"final_objective\": " + objective_text) != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cmd_run exit codes: config error and divergence") {
    CHECK(cmd_run("/nonexistent/config.json") == kExitConfigError);

    const std::string missing_graph = write_config(R"({
      "graph": {"type": "file", "file": "/nonexistent/graph.json"},
      "model": {"type": "quadratic", "centers": [[0.0], [4.0]]},
      "train": {"local_lr": 0.1, "local_steps": 1, "rounds": 1, "eta": 0.1, "batch_size": 1}
    })", "fedlap_cfg_missing_graph.json");
    CHECK(cmd_run(missing_graph) == kExitConfigError);

    const std::string diverging = write_config(R"({
      "graph": {"type": "edges", "n": 2, "edges": [[0, 1, 1.0]]},
      "model": {"type": "quadratic", "centers": [[0.0], [4.0]], "curvature": 1e200},
      "train": {"local_lr": 1e200, "local_steps": 2, "rounds": 5, "eta": 0.0, "batch_size": 1}
    })", "fedlap_cfg_diverge.json");
    CHECK(cmd_run(diverging) == kExitDiverged);
}

TEST_CASE("avg_alpha with retained snapshots reports the weighted-average objective") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_run_avg").string();
    fs::remove_all(dir);
    const std::string cfg = write_config(
        small_mlr_config(dir, 5, R"(, "avg_alpha": 0.05, "retain_snapshots": true)"),
        "fedlap_cfg_avg.json");
    CHECK(cmd_run(cfg) == kExitOk);
    CHECK(slurp(dir + "/summary.json").find("weighted_average_objective") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cmd_run with T = 0 emits a single-row history") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_run_t0").string();
    fs::remove_all(dir);
    const std::string cfg = write_config(small_mlr_config(dir, 0), "fedlap_cfg_t0.json");
    CHECK(cmd_run(cfg) == kExitOk);
    const std::string csv = slurp(dir + "/history.csv");
    int lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 2);
    fs::remove_all(dir);
}

TEST_CASE("cmd_run is byte-deterministic, also across thread counts") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_run_det").string();
    fs::remove_all(dir);
    const std::string cfg = write_config(small_mlr_config(dir, 8), "fedlap_cfg_det.json");
    CHECK(cmd_run(cfg) == kExitOk);
    const std::string first = slurp(dir + "/history.csv");
    CHECK(cmd_run(cfg) == kExitOk);
    CHECK(slurp(dir + "/history.csv") == first);

    const std::string cfg4 = write_config(
        small_mlr_config(dir, 8, R"(, "threads": 4)"), "fedlap_cfg_det4.json");
    CHECK(cmd_run(cfg4) == kExitOk);
    CHECK(slurp(dir + "/history.csv") == first);
    fs::remove_all(dir);
}

TEST_CASE("eta sweep produces local, eta grid, and global rows") {
    RunSpec spec = RunSpec::from_json_text(small_mlr_config("/tmp/fedlap_sweep_unit", 4));
    std::vector<SweepRow> rows = run_eta_sweep(spec, {1e-3, 1e-2}, 1);
    REQUIRE(rows.size() == 4);
    CHECK(rows.front().setting == "local");
    CHECK(rows.back().setting == "global");
    CHECK(rows[1].eta == 1e-3);
    CHECK(rows[2].eta == 1e-2);
    for (const auto& row : rows) {
        CHECK(row.acc_mean >= 0.0);
        CHECK(row.acc_mean <= 1.0);
    }

    // degenerate sweep at eta = 0 equals the Local baseline
    std::vector<SweepRow> zero = run_eta_sweep(spec, {0.0}, 1);
    REQUIRE(zero.size() == 3);
    CHECK(zero[0].acc_mean == zero[1].acc_mean);
}

TEST_CASE("cmd_sweep_eta writes one row per setting") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_sweep_cmd").string();
    fs::remove_all(dir);
    const std::string cfg = write_config(small_mlr_config(dir, 4), "fedlap_cfg_sweep.json");
    CHECK(cmd_sweep_eta(cfg, {1e-3, 1e-2, 1e-1, 1.0}, 2) == kExitOk);
    const std::string csv = slurp(dir + "/sweep.csv");
    int lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 7);  // header + 4 etas + local + global
    CHECK(csv.find("local") != std::string::npos);
    CHECK(csv.find("global") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cmd_sweep_eta is byte-deterministic") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_sweep_det").string();
    fs::remove_all(dir);
    const std::string cfg = write_config(small_mlr_config(dir, 3), "fedlap_cfg_sweepdet.json");
    CHECK(cmd_sweep_eta(cfg, {1e-2}, 2) == kExitOk);
    const std::string first = slurp(dir + "/sweep.csv");
    CHECK(cmd_sweep_eta(cfg, {1e-2}, 2) == kExitOk);
    CHECK(slurp(dir + "/sweep.csv") == first);
    fs::remove_all(dir);
}

TEST_CASE("gen-data output loads back") {
    const std::string dir = (fs::temp_directory_path() / "fedlap_gen_test").string();
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = write_config(small_mlr_config(dir), "fedlap_cfg_gen.json");
    const std::string out = dir + "/data.csv";
    CHECK(cmd_gen_data(cfg, out) == kExitOk);
    FederatedDataset ds = load_csv(out);
    CHECK(ds.n_clients() == 4);
    CHECK(ds.n_features == 3);
    fs::remove_all(dir);
}

TEST_CASE("verify_all passes on a fresh build") {
    const auto results = verify_all();
    for (const auto& r : results) {
        INFO(r.name, ": ", r.detail);
        CHECK(r.passed);
    }
    CHECK(all_passed(results));
}

TEST_CASE("verify_all catches an injected sign flip in the server update") {
    VerifyOptions options;
    options.regularize_sign = -1.0;
    const auto results = verify_all(options);
    bool matrix_failed = false;
    for (const auto& r : results)
        if (r.name == "matrix-form-equivalence") matrix_failed = !r.passed;
    CHECK(matrix_failed);
    CHECK_FALSE(all_passed(results));
}

TEST_CASE("verify_all below the float rounding floor reports a failure") {
    VerifyOptions options;
    options.tol = 1e-17;  // below double rounding of the two summation orders
    const auto results = verify_all(options);
    bool matrix_failed = false;
    for (const auto& r : results)
        if (r.name == "matrix-form-equivalence") matrix_failed = !r.passed;
    CHECK(matrix_failed);
}
