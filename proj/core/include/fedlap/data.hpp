#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedlap/models.hpp"

namespace fedlap {

struct ClientDataset {
    Eigen::MatrixXd x_train;  // rows = samples
    Eigen::VectorXi y_train;
    Eigen::MatrixXd x_test;
    Eigen::VectorXi y_test;
    std::vector<int> label_set;  // sorted

    int n_train() const { return static_cast<int>(x_train.rows()); }
    int n_test() const { return static_cast<int>(x_test.rows()); }
    DataSlice train() const { return {&x_train, &y_train, nullptr}; }
    DataSlice test() const { return {&x_test, &y_test, nullptr}; }
};

/// Per-client labeled sample sets. Immutable after construction; invariants:
/// every client has >= 1 training and >= 1 test sample, labels lie inside the
/// client's label_set, and feature rows have width n_features.
struct FederatedDataset {
    std::vector<ClientDataset> clients;
    int n_features = 0;
    int n_classes = 0;

    int n_clients() const { return static_cast<int>(clients.size()); }
    void validate() const;  // throws InvalidConfig on a broken invariant

    std::vector<std::vector<int>> label_sets() const;
    double mean_samples_per_client() const;
    double std_samples_per_client() const;
};

struct SyntheticSpec {
    int n_clients = 0;
    int n_features = 0;
    int n_classes = 0;
    int labels_per_client = 0;
    double samples_mean = 0.0;  // >= 4
    double samples_std = 0.0;
    std::uint64_t seed = 0;

    // feature model: x ~ N(m_c + delta_k, I) with m_c ~ N(0, class_sep^2 I)
    // per class and delta_k ~ N(0, client_shift^2 I) per client
    double class_sep = 2.0;
    double client_shift = 1.0;
    double train_fraction = 0.75;
};

/// Non-i.i.d. synthetic generator: each client gets a random label subset of
/// size labels_per_client, a lognormal sample count (moment-matched to
/// samples_mean/std, clamped >= 4), and class-conditional Gaussian features
/// with a per-client mean shift. Deterministic given the seed; each label of
/// a client's set appears at least once in its training split.
FederatedDataset generate_synthetic(const SyntheticSpec& spec);

/// Re-splits each client's pooled samples into train/test at the given
/// fraction (both sides kept non-empty). Throws TooFewSamples.
FederatedDataset split(const FederatedDataset& dataset, double train_fraction,
                       std::uint64_t seed);

struct CutoffResult {
    FederatedDataset dataset;
    std::vector<int> cut_clients;  // sorted
};

/// Cut-off regime: ceil(fraction_of_clients * N) random clients retain only
/// keep_fraction of their training samples (never fewer than 1); test sets
/// are untouched. Returns which clients were cut.
CutoffResult apply_cutoff(const FederatedDataset& dataset, double fraction_of_clients,
                          double keep_fraction, std::uint64_t seed);

/// CSV bundle, one file per dataset. Columns: client_id, split, label,
/// f0..f{d-1}; header row required; split is "train" or "test". Features are
/// written with 17 significant digits so the round trip is lossless.
void save_csv(const FederatedDataset& dataset, const std::string& path);
FederatedDataset load_csv(const std::string& path);

}  // namespace fedlap
