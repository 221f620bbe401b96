#include "fedlap/runner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedlap/analysis.hpp"
#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

RunHistory dispatch(const Experiment& exp) {
    return exp.train.mode == Mode::Decentralized ? run_dfedu(exp.instance, exp.train)
                                                 : run_fedu(exp.instance, exp.train);
}

}  // namespace

void write_history_csv(const RunHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidConfig("cannot open " + path + " for writing");
    out << "round,objective,mean_train_loss,mean_test_acc,drift,disagreement\n";
    for (const auto& row : history.rows) {
        out << row.round << ',' << fmt17(row.objective) << ',' << fmt17(row.mean_train_loss)
            << ',' << fmt17(row.mean_test_acc) << ',' << fmt17(row.drift) << ','
            << fmt17(row.disagreement) << "\n";
    }
}

void write_summary_json(const RunHistory& history, const Experiment& exp,
                        const std::string& path) {
    nlohmann::json j;
    const auto& last = history.rows.back();
    // the final objective must match the last CSV row byte for byte
    j["final_objective"] = nlohmann::json::parse(fmt17(last.objective));
    j["final_mean_train_loss"] = nlohmann::json::parse(fmt17(last.mean_train_loss));
    j["final_mean_test_acc"] =
        std::isnan(last.mean_test_acc) ? nlohmann::json() : nlohmann::json(last.mean_test_acc);
    j["rounds"] = exp.train.rounds;
    j["eta"] = exp.train.eta;
    j["local_lr"] = exp.train.local_lr;
    j["local_steps"] = exp.train.local_steps;
    j["sample_size"] = exp.train.sample_size;
    j["batch_size"] = exp.train.batch_size;
    j["seed"] = exp.train.seed;
    j["mode"] = exp.train.mode == Mode::Decentralized ? "decentralized" : "centralized";
    j["rho"] = history.rho;
    j["graph_connected"] = exp.instance.graph.connected();
    j["stepsize_ok"] = history.stepsize_ok;
    j["wall_time_seconds"] = last.wall_time;
    if (!exp.cut_clients.empty()) j["cut_clients"] = exp.cut_clients;
    // theta-weighted output iterate, when the run retained its snapshots
    if (exp.train.avg_alpha && !history.snapshots.empty()) {
        StackedParams averaged = weighted_average(
            history.snapshots, exp.train.local_lr, exp.train.local_steps,
            exp.train.sample_size, exp.instance.n_clients(), *exp.train.avg_alpha);
        j["weighted_average_objective"] =
            objective(exp.instance, averaged, exp.train.eta);
    }
    std::ofstream out(path);
    if (!out) throw InvalidConfig("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

double mean_test_accuracy(const FedInstance& instance, const StackedParams& params,
                          const std::vector<int>& subset) {
    std::vector<int> ids = subset;
    if (ids.empty()) {
        ids.resize(instance.n_clients());
        for (int k = 0; k < instance.n_clients(); ++k) ids[k] = k;
    }
    double total = 0.0;
    int count = 0;
    for (int k : ids) {
        const double a = instance.models[k]->accuracy(params.blocks.row(k).transpose(),
                                                      instance.test_slice(k));
        if (!std::isnan(a)) {
            total += a;
            ++count;
        }
    }
    return count > 0 ? total / count : std::numeric_limits<double>::quiet_NaN();
}

StackedParams train_global_baseline(const FedInstance& instance, const TrainConfig& config) {
    if (!instance.data) throw InvalidConfig("global baseline needs a dataset");
    const auto& ds = *instance.data;

    // pool all training rows
    int total = 0;
    for (const auto& c : ds.clients) total += c.n_train();
    Eigen::MatrixXd x(total, ds.n_features);
    Eigen::VectorXi y(total);
    int at = 0;
    for (const auto& c : ds.clients) {
        x.middleRows(at, c.n_train()) = c.x_train;
        y.segment(at, c.n_train()) = c.y_train;
        at += c.n_train();
    }
    DataSlice pooled{&x, &y, nullptr};

    const LossModel& model = *instance.models.front();
    auto rng = make_rng(config.seed, Stream::Init, 0xD1A1);
    Eigen::VectorXd w = model.init_params(rng);
    const long total_steps = static_cast<long>(config.rounds) * config.local_steps;
    const int batch = std::min(config.batch_size, pooled.size());
    for (long s = 0; s < total_steps; ++s) {
        w -= config.local_lr * model.stoch_grad(w, pooled, batch, rng);
        if (!w.allFinite())
            throw NonFiniteParameter("global baseline diverged at step " + std::to_string(s));
    }
    StackedParams out(instance.n_clients(), model.param_dim());
    for (int k = 0; k < instance.n_clients(); ++k) out.blocks.row(k) = w.transpose();
    return out;
}

int cmd_run(const std::string& config_path) {
    Experiment exp;
    try {
        exp = build_experiment(RunSpec::from_file(config_path));
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    RunHistory history;
    try {
        history = dispatch(exp);
    } catch (const NonFiniteParameter& e) {
        std::cerr << "run diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    for (const auto& warning : history.warnings) std::cerr << "warning: " << warning << "\n";

    try {
        std::filesystem::create_directories(exp.output_dir);
        write_history_csv(history, exp.output_dir + "/history.csv");
        write_summary_json(history, exp, exp.output_dir + "/summary.json");
        ConvergenceMetrics metrics = analyze_convergence(history);
        std::ofstream out(exp.output_dir + "/metrics.json");
        out << to_json(metrics) << "\n";
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    std::cout << "wrote " << exp.output_dir << "/history.csv (" << history.rows.size()
              << " rows)\n";
    return kExitOk;
}

std::vector<SweepRow> run_eta_sweep(const RunSpec& spec, const std::vector<double>& etas,
                                    int repeats) {
    if (etas.empty()) throw InvalidConfig("sweep: need at least one eta");
    if (repeats < 1) throw InvalidConfig("sweep: repeats must be >= 1");

    struct Acc {
        std::vector<double> all, cut, uncut;
    };
    auto settle = [](SweepRow& row, const Acc& acc) {
        auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
            if (xs.empty()) {
                mean = sd = std::numeric_limits<double>::quiet_NaN();
                return;
            }
            mean = 0.0;
            for (double v : xs) mean += v;
            mean /= xs.size();
            double var = 0.0;
            for (double v : xs) var += (v - mean) * (v - mean);
            sd = std::sqrt(var / xs.size());
        };
        mean_std(acc.all, row.acc_mean, row.acc_std);
        mean_std(acc.cut, row.cut_acc_mean, row.cut_acc_std);
        mean_std(acc.uncut, row.uncut_acc_mean, row.uncut_acc_std);
    };

    std::vector<double> settings;  // >= 0: eta value; -1: local; -2: global
    settings.push_back(-1.0);
    for (double eta : etas) settings.push_back(eta);
    settings.push_back(-2.0);

    std::vector<SweepRow> rows;
    for (double setting : settings) {
        Acc acc;
        SweepRow row;
        row.repeats = repeats;
        row.setting = setting == -1.0 ? "local" : setting == -2.0 ? "global" : "eta";
        row.eta = setting >= 0.0 ? setting : 0.0;

        for (int rep = 0; rep < repeats; ++rep) {
            RunSpec variant = spec;
            variant.train.seed = spec.train.seed + static_cast<std::uint64_t>(rep);
            if (setting >= 0.0) variant.train.eta = setting;
            if (setting == -1.0) variant.train.eta = 0.0;
            Experiment exp = build_experiment(variant);

            StackedParams final_params;
            if (setting == -2.0) {
                final_params = train_global_baseline(exp.instance, exp.train);
            } else {
                final_params = dispatch(exp).final_params;
            }

            acc.all.push_back(mean_test_accuracy(exp.instance, final_params));
            if (!exp.cut_clients.empty()) {
                std::vector<bool> is_cut(exp.instance.n_clients(), false);
                for (int k : exp.cut_clients) is_cut[k] = true;
                std::vector<int> uncut;
                for (int k = 0; k < exp.instance.n_clients(); ++k)
                    if (!is_cut[k]) uncut.push_back(k);
                acc.cut.push_back(mean_test_accuracy(exp.instance, final_params,
                                                     exp.cut_clients));
                if (!uncut.empty())
                    acc.uncut.push_back(mean_test_accuracy(exp.instance, final_params, uncut));
            }
        }
        settle(row, acc);
        rows.push_back(row);
    }
    return rows;
}

int cmd_sweep_eta(const std::string& config_path, const std::vector<double>& etas, int repeats) {
    RunSpec spec;
    try {
        spec = RunSpec::from_file(config_path);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    std::vector<SweepRow> rows;
    try {
        rows = run_eta_sweep(spec, etas, repeats);
    } catch (const NonFiniteParameter& e) {
        std::cerr << "run diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    std::filesystem::create_directories(spec.output_dir);
    const std::string path = spec.output_dir + "/sweep.csv";
    std::ofstream out(path);
    out << "setting,eta,repeats,test_acc_mean,test_acc_std,cut_acc_mean,cut_acc_std,"
           "uncut_acc_mean,uncut_acc_std\n";
    for (const auto& row : rows) {
        out << row.setting << ',' << fmt17(row.eta) << ',' << row.repeats << ','
            << fmt17(row.acc_mean) << ',' << fmt17(row.acc_std) << ',' << fmt17(row.cut_acc_mean)
            << ',' << fmt17(row.cut_acc_std) << ',' << fmt17(row.uncut_acc_mean) << ','
            << fmt17(row.uncut_acc_std) << "\n";
    }
    std::cout << "wrote " << path << " (" << rows.size() << " settings)\n";
    return kExitOk;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path) {
    RunSpec spec;
    try {
        spec = RunSpec::from_file(config_path);
        if (spec.dataset_kind != RunSpec::DatasetKind::Synthetic)
            throw InvalidConfig("gen-data: config must declare a synthetic dataset");
        if (auto seed = seed_override_from_env()) spec.synthetic.seed = *seed;
        FederatedDataset ds = generate_synthetic(spec.synthetic);
        std::string path = out_path;
        if (path.empty()) {
            std::filesystem::create_directories(spec.output_dir);
            path = spec.output_dir + "/dataset.csv";
        }
        save_csv(ds, path);
        std::cout << "wrote " << path << " (" << ds.n_clients() << " clients, mean "
                  << ds.mean_samples_per_client() << " samples)\n";
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return kExitOk;
}

}  // namespace fedlap
