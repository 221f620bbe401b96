#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "fedlap/data.hpp"
#include "fedlap/graph.hpp"
#include "fedlap/models.hpp"
#include "fedlap/stacked_params.hpp"

namespace fedlap {

enum class Mode { Centralized, Decentralized };

struct TrainConfig {
    double local_lr = 0.01;        // mu
    int local_steps = 1;           // R
    int rounds = 1;                // T
    double eta = 0.0;
    int sample_size = 1;           // S (Centralized only; Decentralized uses all)
    int batch_size = 1;            // B
    std::uint64_t seed = 0;
    Mode mode = Mode::Centralized;
    std::optional<double> avg_alpha;  // alpha for the weighted-iterate output

    // Algorithm-variant switch: false (default) sums the regularizer over all
    // neighbors using stale models for non-sampled ones; true restricts the
    // sum to sampled neighbors (the main-text prose variant).
    bool sampled_neighbors_only = false;

    int threads = 1;
    bool retain_snapshots = false;  // keep W^(t) per round (weighted_average needs it)
    int eval_every = 1;             // objective/accuracy cadence; last round always evaluated

    // When set, ||W^(t) - reference|| is recorded every round (cheap; used by
    // convergence studies without retaining snapshots).
    std::optional<StackedParams> reference;
    // Stop as soon as the distance to the reference falls to this value.
    std::optional<double> stop_when_ref_below;

    double mu_tilde() const { return local_lr * local_steps; }
};

struct RoundRecord {
    int round = 0;
    double objective = 0.0;         // J(W) = F(W) + (eta/2) W^T L W
    double mean_train_loss = 0.0;   // mean_k F_k(w_k)
    double mean_test_acc = 0.0;     // NaN for models without accuracy
    double drift = 0.0;             // E^(t) of the round that produced this iterate
    double disagreement = 0.0;      // max over edges ||w_k - w_l||
    double dist_to_ref = 0.0;       // NaN when no reference configured
    double wall_time = 0.0;         // seconds since run start
    Eigen::VectorXd client_train_loss;  // F_k(w_k) per client
    Eigen::VectorXd client_test_acc;    // per-client accuracy (NaN for data-free models)
};

struct RunHistory {
    std::vector<RoundRecord> rows;                // evaluated rounds; T+1 rows at cadence 1
    std::vector<std::vector<int>> sampled_sets;   // one entry per round 1..T
    std::vector<StackedParams> snapshots;         // rounds 0..T when retained
    std::vector<double> dist_to_ref;              // per round 0..T when reference set
    StackedParams final_params;
    double rho = 0.0;
    bool stepsize_ok = true;  // mu_tilde * eta * rho <= 2 on the loaded graph
    std::vector<std::string> warnings;
};

/// A federation: the relationship graph, one loss model per client, and the
/// clients' data (nullptr for data-free models).
struct FedInstance {
    ClientGraph graph;
    std::vector<std::shared_ptr<LossModel>> models;
    const FederatedDataset* data = nullptr;

    int n_clients() const { return graph.n_clients(); }
    int param_dim() const { return models.empty() ? 0 : models.front()->param_dim(); }
    DataSlice train_slice(int k) const {
        return data ? data->clients[k].train() : DataSlice::none();
    }
    DataSlice test_slice(int k) const {
        return data ? data->clients[k].test() : DataSlice::none();
    }
    void check() const;  // throws DimensionMismatch / InvalidConfig
};

/// Uniform S-subset of {0..N-1} without replacement, sorted.
/// Throws InvalidSampleSize.
std::vector<int> sample_clients(int n_clients, int sample_size, std::mt19937_64& rng);

struct LocalUpdateResult {
    Eigen::VectorXd w;        // w_{k,R}
    double drift_sq_sum = 0;  // sum_{r=0}^{R-1} ||w_{k,r} - w_start||^2
};

/// R mini-batch SGD steps from w_start: w <- w - mu grad~F(w) per step.
/// Throws NonFiniteParameter (with the offending step) on divergence.
LocalUpdateResult local_update(const LossModel& model, const Eigen::VectorXd& w_start, int steps,
                               double mu, int batch_size, const DataSlice& data,
                               std::mt19937_64& rng);

/// Server regularization (one round's second stage):
///   w_k^(t+1) = w_{k,R} - mu~ eta sum_{l in N_k} a_kl (w_{k,R} - w_{l,R})
/// for sampled k; non-sampled rows pass through unchanged. W_R must already
/// carry the stale round-start model in its non-sampled rows.
StackedParams server_regularize(const StackedParams& w_r, const std::vector<bool>& sampled,
                                const ClientGraph& graph, double eta, double mu_tilde,
                                bool sampled_neighbors_only = false);

/// Independent oracle for server_regularize: applies the sampling matrix and
/// the blockwise Laplacian action explicitly via the dense Laplacian
/// (W' = (I - mu~ eta S~ L(x)I) W_R), then restores stale rows.
StackedParams matrix_form_step(const StackedParams& w_t, const StackedParams& w_r,
                               const std::vector<bool>& sampled, const ClientGraph& graph,
                               double eta, double mu_tilde);

/// Power-iteration estimate of ||C|| for C = I - mu~ eta L(x)I (full
/// participation), applied blockwise. ||C|| = 1 iff mu~ eta rho <= 2.
double server_update_norm(const ClientGraph& graph, double eta, double mu_tilde, int dim,
                          int iters = 200);

/// FedU (Algorithm: sample -> R local SGD steps on sampled clients ->
/// Laplacian regularization at the server). Deterministic given config.seed;
/// per-client RNG streams are keyed (seed, client, round) so the result does
/// not depend on thread count.
RunHistory run_fedu(const FedInstance& instance, const TrainConfig& config);

/// dFedU: no sampling, every client updates and exchanges with neighbors.
/// Bitwise-identical trajectory to run_fedu with S = N under the same seed.
RunHistory run_dfedu(const FedInstance& instance, const TrainConfig& config);

/// Theta-weighted average of the round iterates W^(0..T-1):
///   theta^(t) = (1 - mu R S alpha / (4N))^-(t+1), W~ = sum theta W / sum theta.
/// Weights are computed relative to the largest one so large T cannot
/// overflow. Throws InvalidAlpha when the weight base is <= 0.
StackedParams weighted_average(const std::vector<StackedParams>& snapshots, double mu, int steps,
                               int sample_size, int n_clients, double alpha);

/// J(W) = sum_k F_k(w_k) + (eta/2) W^T (L(x)I) W over full training data.
double objective(const FedInstance& instance, const StackedParams& w, double eta);

/// Consensus-limit helpers: the complete unit graph (eta -> inf FedAvg
/// reduction) and the star graph whose virtual server vertex 0 carries a
/// zero-loss model (personalized-FL configuration).
ClientGraph fedavg_consensus_graph(int n_clients);
ClientGraph personalization_star_graph(int n_clients);
std::shared_ptr<LossModel> zero_loss_model(int dim);

}  // namespace fedlap
