#include "fedlap/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

void FedInstance::check() const {
    if (static_cast<int>(models.size()) != graph.n_clients())
        throw DimensionMismatch("FedInstance: " + std::to_string(models.size()) +
                                " models for " + std::to_string(graph.n_clients()) + " clients");
    if (models.empty()) throw InvalidConfig("FedInstance: no clients");
    const int d = models.front()->param_dim();
    for (const auto& m : models)
        if (m->param_dim() != d)
            throw DimensionMismatch("FedInstance: models disagree on param_dim");
    bool needs_data = false;
    for (const auto& m : models) needs_data = needs_data || m->uses_data();
    if (needs_data) {
        if (!data) throw InvalidConfig("FedInstance: models need data but none was given");
        if (data->n_clients() != graph.n_clients())
            throw DimensionMismatch("FedInstance: dataset has " +
                                    std::to_string(data->n_clients()) + " clients, graph has " +
                                    std::to_string(graph.n_clients()));
    }
}

std::vector<int> sample_clients(int n_clients, int sample_size, std::mt19937_64& rng) {
    if (sample_size < 1 || sample_size > n_clients)
        throw InvalidSampleSize("sample_clients: S=" + std::to_string(sample_size) + " with N=" +
                                std::to_string(n_clients));
    std::vector<int> idx(n_clients);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < sample_size; ++i) {
        std::uniform_int_distribution<int> pick(i, n_clients - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(sample_size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

LocalUpdateResult local_update(const LossModel& model, const Eigen::VectorXd& w_start, int steps,
                               double mu, int batch_size, const DataSlice& data,
                               std::mt19937_64& rng) {
    if (steps < 1) throw InvalidConfig("local_update: R must be >= 1");
    if (mu < 0.0) throw InvalidConfig("local_update: mu must be >= 0");

    // a client with fewer samples than the global batch size trains full-batch
    const int batch = model.uses_data() ? std::min(batch_size, data.size()) : batch_size;

    LocalUpdateResult result;
    result.w = w_start;
    for (int r = 0; r < steps; ++r) {
        result.drift_sq_sum += (result.w - w_start).squaredNorm();  // r=0 term is 0
        result.w -= mu * model.stoch_grad(result.w, data, batch, rng);
        if (!result.w.allFinite())
            throw NonFiniteParameter("local step " + std::to_string(r) +
                                     ": parameter became non-finite");
    }
    return result;
}

StackedParams server_regularize(const StackedParams& w_r, const std::vector<bool>& sampled,
                                const ClientGraph& graph, double eta, double mu_tilde,
                                bool sampled_neighbors_only) {
    const int n = graph.n_clients();
    if (w_r.n_clients() != n)
        throw DimensionMismatch("server_regularize: W_R has " + std::to_string(w_r.n_clients()) +
                                " blocks, graph has " + std::to_string(n));
    if (static_cast<int>(sampled.size()) != n)
        throw DimensionMismatch("server_regularize: sampled mask size mismatch");

    StackedParams out = w_r;
    const double step = mu_tilde * eta;
    if (step == 0.0) return out;
    Eigen::RowVectorXd acc(w_r.dim());
    for (int k = 0; k < n; ++k) {
        if (!sampled[k]) continue;  // non-sampled keep the (stale) row of W_R
        acc.setZero();
        for (auto [l, a] : graph.neighbors(k)) {
            if (sampled_neighbors_only && !sampled[l]) continue;
            acc += a * (w_r.blocks.row(k) - w_r.blocks.row(l));
        }
        out.blocks.row(k) = w_r.blocks.row(k) - step * acc;
    }
    return out;
}

StackedParams matrix_form_step(const StackedParams& w_t, const StackedParams& w_r,
                               const std::vector<bool>& sampled, const ClientGraph& graph,
                               double eta, double mu_tilde) {
    const int n = graph.n_clients();
    if (w_t.n_clients() != n || w_r.n_clients() != n || w_t.dim() != w_r.dim())
        throw DimensionMismatch("matrix_form_step: shape mismatch");
    if (static_cast<int>(sampled.size()) != n)
        throw DimensionMismatch("matrix_form_step: sampled mask size mismatch");

    // (I - mu~ eta S~ L(x)I) W_R via the dense Laplacian, blockwise per column
    Eigen::MatrixXd lap = graph.laplacian() * w_r.blocks;
    for (int k = 0; k < n; ++k)
        if (!sampled[k]) lap.row(k).setZero();  // S~ action
    StackedParams out(Eigen::MatrixXd(w_r.blocks - mu_tilde * eta * lap));
    for (int k = 0; k < n; ++k)
        if (!sampled[k]) out.blocks.row(k) = w_t.blocks.row(k);  // restore stale models
    return out;
}

double server_update_norm(const ClientGraph& graph, double eta, double mu_tilde, int dim,
                          int iters) {
    const int n = graph.n_clients();
    auto rng = make_rng(0x5eed, Stream::Probes);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd v(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) v(i, j) = normal(rng);
    v /= v.norm();

    // power iteration on C^2 (C symmetric), so +/- extreme eigenvalues of C
    // cannot cancel at the mu~ eta rho = 2 boundary
    const double step = mu_tilde * eta;
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::MatrixXd cv = v - step * laplacian_apply(graph, v);
        Eigen::MatrixXd ccv = cv - step * laplacian_apply(graph, cv);
        lambda = ccv.norm();
        if (lambda == 0.0) return 0.0;
        v = ccv / lambda;
    }
    return std::sqrt(lambda);
}

namespace {

double edge_disagreement(const ClientGraph& graph, const StackedParams& w) {
    double worst = 0.0;
    for (int k = 0; k < graph.n_clients(); ++k)
        for (auto [l, a] : graph.neighbors(k))
            if (l > k) worst = std::max(worst, (w.blocks.row(k) - w.blocks.row(l)).norm());
    return worst;
}

RunHistory run_rounds(const FedInstance& instance, const TrainConfig& config) {
    instance.check();
    const int n = instance.n_clients();
    const int d = instance.param_dim();
    const bool decentralized = config.mode == Mode::Decentralized;
    const int sample_size = decentralized ? n : config.sample_size;
    if (!decentralized && (config.sample_size < 1 || config.sample_size > n))
        throw InvalidSampleSize("run: sample_size out of range");
    if (config.rounds < 0) throw InvalidConfig("run: rounds must be >= 0");
    if (config.local_lr < 0.0) throw InvalidConfig("run: local_lr must be >= 0");
    if (config.reference && (config.reference->n_clients() != n || config.reference->dim() != d))
        throw DimensionMismatch("run: reference shape mismatch");

    RunHistory history;
    history.rho = instance.graph.rho();
    history.stepsize_ok = config.mu_tilde() * config.eta * history.rho <= 2.0 + 1e-12;
    if (!history.stepsize_ok)
        history.warnings.push_back("step-size condition mu~ eta rho <= 2 violated: " +
                                   std::to_string(config.mu_tilde() * config.eta * history.rho));

    // shared initialization
    StackedParams w(n, d);
    {
        auto rng = make_rng(config.seed, Stream::Init);
        Eigen::VectorXd w0 = instance.models.front()->init_params(rng);
        for (int k = 0; k < n; ++k) w.blocks.row(k) = w0.transpose();
    }

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&t_start] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    auto evaluate = [&](int round, const StackedParams& cur, double drift) {
        RoundRecord rec;
        rec.round = round;
        rec.client_train_loss.resize(n);
        rec.client_test_acc.resize(n);
        double f_total = 0.0, acc_total = 0.0;
        int acc_count = 0;
        for (int k = 0; k < n; ++k) {
            rec.client_train_loss(k) = instance.models[k]->loss(cur.blocks.row(k).transpose(),
                                                                instance.train_slice(k));
            f_total += rec.client_train_loss(k);
            const double a = instance.models[k]->accuracy(cur.blocks.row(k).transpose(),
                                                          instance.test_slice(k));
            rec.client_test_acc(k) = a;
            if (!std::isnan(a)) {
                acc_total += a;
                ++acc_count;
            }
        }
        rec.objective = f_total + 0.5 * config.eta * laplacian_quadratic(instance.graph, cur);
        rec.mean_train_loss = f_total / n;
        rec.mean_test_acc = acc_count > 0 ? acc_total / acc_count
                                          : std::numeric_limits<double>::quiet_NaN();
        rec.drift = drift;
        rec.disagreement = edge_disagreement(instance.graph, cur);
        rec.dist_to_ref = config.reference
                              ? cur.distance_to(*config.reference)
                              : std::numeric_limits<double>::quiet_NaN();
        rec.wall_time = elapsed();
        history.rows.push_back(rec);
    };

    auto track = [&](const StackedParams& cur) {
        if (config.retain_snapshots) history.snapshots.push_back(cur);
        if (config.reference) history.dist_to_ref.push_back(cur.distance_to(*config.reference));
    };

    const int eval_every = std::max(1, config.eval_every);
    track(w);
    evaluate(0, w, 0.0);

    for (int t = 0; t < config.rounds; ++t) {
        std::vector<int> selected;
        if (decentralized) {
            selected.resize(n);
            std::iota(selected.begin(), selected.end(), 0);
        } else {
            auto rng = make_rng(config.seed, Stream::ClientSampling, static_cast<std::uint64_t>(t));
            selected = sample_clients(n, sample_size, rng);
        }
        std::vector<bool> mask(n, false);
        for (int k : selected) mask[k] = true;

        // local updates: independent per client, deterministic per
        // (seed, client, round) stream, so thread count cannot change results
        StackedParams w_r = w;
        std::vector<double> drift_sq(n, 0.0);
        auto work = [&](int idx_begin, int idx_end) {
            for (int i = idx_begin; i < idx_end; ++i) {
                const int k = selected[i];
                auto rng = make_rng(config.seed, Stream::LocalBatches,
                                    static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(t));
                try {
                    LocalUpdateResult res =
                        local_update(*instance.models[k], w.blocks.row(k).transpose(),
                                     config.local_steps, config.local_lr, config.batch_size,
                                     instance.train_slice(k), rng);
                    w_r.blocks.row(k) = res.w.transpose();
                    drift_sq[k] = res.drift_sq_sum;
                } catch (const NonFiniteParameter& e) {
                    throw NonFiniteParameter("client " + std::to_string(k) + ", " + e.what());
                }
            }
        };
        const int n_workers = std::clamp(config.threads, 1, static_cast<int>(selected.size()));
        try {
            if (n_workers <= 1) {
                work(0, static_cast<int>(selected.size()));
            } else {
                std::vector<std::thread> pool;
                std::vector<std::exception_ptr> errors(n_workers);
                const int chunk = (static_cast<int>(selected.size()) + n_workers - 1) / n_workers;
                for (int wi = 0; wi < n_workers; ++wi) {
                    pool.emplace_back([&, wi] {
                        try {
                            work(wi * chunk, std::min<int>((wi + 1) * chunk,
                                                           static_cast<int>(selected.size())));
                        } catch (...) {
                            errors[wi] = std::current_exception();
                        }
                    });
                }
                for (auto& th : pool) th.join();
                for (auto& err : errors)
                    if (err) std::rethrow_exception(err);
            }
        } catch (const NonFiniteParameter& e) {
            throw NonFiniteParameter("round " + std::to_string(t) + ": " + e.what() +
                                     " (last objective " +
                                     std::to_string(history.rows.back().objective) + ")");
        }

        StackedParams w_next = server_regularize(w_r, mask, instance.graph, config.eta,
                                                 config.mu_tilde(),
                                                 config.sampled_neighbors_only);
        if (!w_next.all_finite())
            throw NonFiniteParameter("round " + std::to_string(t) +
                                     ": regularization produced non-finite parameters"
                                     " (last objective " +
                                     std::to_string(history.rows.back().objective) + ")");
        w = std::move(w_next);

        const double drift =
            std::accumulate(drift_sq.begin(), drift_sq.end(), 0.0) / (n * config.local_steps);
        history.sampled_sets.push_back(selected);
        track(w);
        const bool reached = config.reference && config.stop_when_ref_below &&
                             history.dist_to_ref.back() <= *config.stop_when_ref_below;
        if ((t + 1) % eval_every == 0 || t + 1 == config.rounds || reached)
            evaluate(t + 1, w, drift);
        if (reached) break;
    }

    history.final_params = std::move(w);
    return history;
}

}  // namespace

RunHistory run_fedu(const FedInstance& instance, const TrainConfig& config) {
    if (config.mode != Mode::Centralized)
        throw InvalidConfig("run_fedu: config.mode must be Centralized");
    return run_rounds(instance, config);
}

RunHistory run_dfedu(const FedInstance& instance, const TrainConfig& config) {
    if (config.mode != Mode::Decentralized)
        throw InvalidConfig("run_dfedu: config.mode must be Decentralized");
    return run_rounds(instance, config);
}

StackedParams weighted_average(const std::vector<StackedParams>& snapshots, double mu, int steps,
                               int sample_size, int n_clients, double alpha) {
    if (snapshots.empty()) throw InvalidConfig("weighted_average: no snapshots");
    const double rate = mu * steps * sample_size * alpha / (4.0 * n_clients);
    const double base = 1.0 - rate;
    if (base <= 0.0)
        throw InvalidAlpha("weighted_average: weight base 1 - mu R S alpha/(4N) = " +
                           std::to_string(base) + " <= 0");

    // theta^(t) = base^-(t+1) over t = 0..T-1; use weights relative to the
    // largest (t = T-1): theta^(t)/theta^(T-1) = base^(T-1-t)
    const int count = std::max(1, static_cast<int>(snapshots.size()) - 1);
    StackedParams avg(snapshots[0].n_clients(), snapshots[0].dim());
    double total = 0.0;
    for (int t = 0; t < count; ++t) {
        const double weight = std::pow(base, count - 1 - t);
        avg.blocks += weight * snapshots[t].blocks;
        total += weight;
    }
    avg.blocks /= total;
    return avg;
}

double objective(const FedInstance& instance, const StackedParams& w, double eta) {
    double f_total = 0.0;
    for (int k = 0; k < instance.n_clients(); ++k)
        f_total +=
            instance.models[k]->loss(w.blocks.row(k).transpose(), instance.train_slice(k));
    return f_total + 0.5 * eta * laplacian_quadratic(instance.graph, w);
}

ClientGraph fedavg_consensus_graph(int n_clients) { return complete_graph(n_clients, 1.0); }

ClientGraph personalization_star_graph(int n_clients) { return star_graph(n_clients, 1.0); }

std::shared_ptr<LossModel> zero_loss_model(int dim) {
    return std::make_shared<QuadraticModel>(Eigen::VectorXd::Zero(dim), 0.0);
}

}  // namespace fedlap
