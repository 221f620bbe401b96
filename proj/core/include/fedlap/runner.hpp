#pragma once

#include <string>
#include <vector>

#include "fedlap/runspec.hpp"

namespace fedlap {

// exit codes shared by the CLI
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDiverged = 3;

/// Executes one FedU/dFedU run from a config file: writes
/// <output_dir>/history.csv and <output_dir>/summary.json.
int cmd_run(const std::string& config_path);

/// Runs the spec once per eta plus a Local baseline (eta = 0) and a Global
/// baseline (one model, pooled data, plain SGD with the same mu, B and T*R
/// total steps); writes <output_dir>/sweep.csv. With repeats > 1 the run is
/// repeated under seeds seed+0..seed+repeats-1 and mean/std are reported.
int cmd_sweep_eta(const std::string& config_path, const std::vector<double>& etas, int repeats = 1);

/// Generates the spec's synthetic dataset and writes the CSV bundle.
int cmd_gen_data(const std::string& config_path, const std::string& out_path);

// internals reused by tests
struct SweepRow {
    std::string setting;  // "local", "global", or "eta"
    double eta = 0.0;
    int repeats = 1;
    double acc_mean = 0.0, acc_std = 0.0;
    double cut_acc_mean = 0.0, cut_acc_std = 0.0;
    double uncut_acc_mean = 0.0, uncut_acc_std = 0.0;
};

std::vector<SweepRow> run_eta_sweep(const RunSpec& spec, const std::vector<double>& etas,
                                    int repeats);
void write_history_csv(const RunHistory& history, const std::string& path);
void write_summary_json(const RunHistory& history, const Experiment& exp,
                        const std::string& path);

/// Test accuracy of a run's final parameters, averaged over `subset`
/// (all clients when empty). NaN-free only for classification models.
double mean_test_accuracy(const FedInstance& instance, const StackedParams& params,
                          const std::vector<int>& subset = {});

/// The Global baseline: one model trained on the union of all clients'
/// training data with plain mini-batch SGD, then evaluated per client.
StackedParams train_global_baseline(const FedInstance& instance, const TrainConfig& config);

}  // namespace fedlap
