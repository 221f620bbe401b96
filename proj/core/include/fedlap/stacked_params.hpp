#pragma once

#include <Eigen/Dense>

#include "fedlap/errors.hpp"

namespace fedlap {

/// Collective parameter vector W = [w_1, ..., w_N]: one row per client,
/// d columns. The Kronecker structure L (x) I_d is never materialized;
/// every operator acts on rows (client blocks).
struct StackedParams {
    Eigen::MatrixXd blocks;  // N x d

    StackedParams() = default;
    StackedParams(int n_clients, int dim) : blocks(Eigen::MatrixXd::Zero(n_clients, dim)) {}
    explicit StackedParams(Eigen::MatrixXd m) : blocks(std::move(m)) {}

    int n_clients() const { return static_cast<int>(blocks.rows()); }
    int dim() const { return static_cast<int>(blocks.cols()); }

    Eigen::MatrixXd::RowXpr block(int k) { return blocks.row(k); }
    Eigen::MatrixXd::ConstRowXpr block(int k) const { return blocks.row(k); }

    bool all_finite() const { return blocks.allFinite(); }

    double distance_to(const StackedParams& other) const {
        if (other.blocks.rows() != blocks.rows() || other.blocks.cols() != blocks.cols())
            throw DimensionMismatch("StackedParams::distance_to: shape mismatch");
        return (blocks - other.blocks).norm();
    }
};

}  // namespace fedlap
