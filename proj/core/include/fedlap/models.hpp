#pragma once

#include <memory>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fedlap/errors.hpp"

namespace fedlap {

/// Read-only view over (a subset of) one client's labeled samples.
/// `subset`, when set, selects row indices into `x`/`y`.
struct DataSlice {
    const Eigen::MatrixXd* x = nullptr;   // rows = samples
    const Eigen::VectorXi* y = nullptr;
    const std::vector<int>* subset = nullptr;

    static DataSlice none() { return {}; }

    int size() const {
        if (subset) return static_cast<int>(subset->size());
        return x ? static_cast<int>(x->rows()) : 0;
    }
    bool empty() const { return size() == 0; }
    int index(int i) const { return subset ? (*subset)[i] : i; }
    Eigen::MatrixXd::ConstRowXpr row(int i) const { return x->row(index(i)); }
    int label(int i) const { return (*y)(index(i)); }
};

/// Per-client objective F_k: full loss, exact gradient, and an unbiased
/// mini-batch stochastic gradient. Implementations are immutable; loss and
/// grad are pure functions, safe to call concurrently. The RNG for
/// stoch_grad is caller-supplied.
class LossModel {
public:
    virtual ~LossModel() = default;

    virtual int param_dim() const = 0;
    virtual bool uses_data() const { return true; }

    virtual double loss(const Eigen::VectorXd& w, const DataSlice& data) const = 0;
    virtual Eigen::VectorXd grad(const Eigen::VectorXd& w, const DataSlice& data) const = 0;

    /// Gradient over a uniformly-without-replacement batch of size B,
    /// re-drawn per call. B == |data| bypasses sampling and equals grad
    /// bit for bit. Throws BatchTooLarge.
    Eigen::VectorXd stoch_grad(const Eigen::VectorXd& w, const DataSlice& data, int batch_size,
                               std::mt19937_64& rng) const;

    /// Fraction of samples whose argmax prediction matches the label;
    /// NaN for models without a classification readout.
    virtual double accuracy(const Eigen::VectorXd& /*w*/, const DataSlice& /*data*/) const;

    /// Initial parameter vector for a training run.
    virtual Eigen::VectorXd init_params(std::mt19937_64& rng) const;

    /// A true global smoothness upper bound on ||grad Hessian||, when one is
    /// known analytically for this model/data (quadratic: the curvature;
    /// MLR: 0.5 max ||x~||^2 + alpha). MLP has none.
    virtual std::optional<double> analytic_smoothness(const DataSlice& data) const = 0;

protected:
    void check_dim(const Eigen::VectorXd& w) const;
    void check_data(const DataSlice& data) const;
};

/// F(w) = (curvature/2) ||w - center||^2. Data-free; the exact-gradient
/// oracle for convergence checks (beta = alpha = curvature).
class QuadraticModel final : public LossModel {
public:
    QuadraticModel(Eigen::VectorXd center, double curvature = 1.0);

    int param_dim() const override { return static_cast<int>(center_.size()); }
    bool uses_data() const override { return false; }
    double loss(const Eigen::VectorXd& w, const DataSlice& data) const override;
    Eigen::VectorXd grad(const Eigen::VectorXd& w, const DataSlice& data) const override;
    std::optional<double> analytic_smoothness(const DataSlice&) const override { return curvature_; }

    const Eigen::VectorXd& center() const { return center_; }
    double curvature() const { return curvature_; }

private:
    Eigen::VectorXd center_;
    double curvature_;
};

/// Multinomial logistic regression with an L2 term:
///   -(1/D) sum_j log softmax_{y_j}(W x~_j) + (alpha/2) ||W||^2,
/// where x~ is the feature vector with a constant-1 bias column appended and
/// W is n_classes x (n_features+1), stored row-major flattened.
/// alpha > 0 makes the loss alpha-strongly convex.
class MlrModel final : public LossModel {
public:
    MlrModel(int n_features, int n_classes, double l2_alpha);

    int param_dim() const override { return n_classes_ * (n_features_ + 1); }
    double loss(const Eigen::VectorXd& w, const DataSlice& data) const override;
    Eigen::VectorXd grad(const Eigen::VectorXd& w, const DataSlice& data) const override;
    double accuracy(const Eigen::VectorXd& w, const DataSlice& data) const override;
    Eigen::VectorXd init_params(std::mt19937_64& rng) const override;  // zeros
    std::optional<double> analytic_smoothness(const DataSlice& data) const override;

    int n_features() const { return n_features_; }
    int n_classes() const { return n_classes_; }
    double l2_alpha() const { return l2_alpha_; }

    /// Class probabilities for each sample (rows sum to 1).
    Eigen::MatrixXd predict_proba(const Eigen::VectorXd& w, const DataSlice& data) const;

private:
    int n_features_;
    int n_classes_;
    double l2_alpha_;
};

/// One-hidden-layer MLP: ReLU hidden activation, softmax + cross-entropy
/// output, loss averaged over samples. Parameters are [W1, b1, W2, b2]
/// flattened. ReLU subgradient at 0 is taken as 0.
class MlpModel final : public LossModel {
public:
    MlpModel(int n_features, int n_hidden, int n_classes);

    int param_dim() const override;
    double loss(const Eigen::VectorXd& w, const DataSlice& data) const override;
    Eigen::VectorXd grad(const Eigen::VectorXd& w, const DataSlice& data) const override;
    double accuracy(const Eigen::VectorXd& w, const DataSlice& data) const override;
    Eigen::VectorXd init_params(std::mt19937_64& rng) const override;  // Glorot uniform, zero biases
    std::optional<double> analytic_smoothness(const DataSlice&) const override { return std::nullopt; }

    Eigen::MatrixXd predict_proba(const Eigen::VectorXd& w, const DataSlice& data) const;

    int n_features() const { return in_; }
    int n_hidden() const { return hidden_; }
    int n_classes() const { return out_; }

private:
    int in_, hidden_, out_;
};

/// Probed lower bound on the smoothness constant: max over random probe
/// pairs of ||grad(w) - grad(w')|| / ||w - w'||, with probe scales swept
/// log-uniformly in [1e-2, 1e1]. Exact for constant-Hessian models.
double estimate_smoothness(const LossModel& model, const DataSlice& data, int n_probes,
                           std::uint64_t seed = 0);

/// Central finite differences of model.loss at w; the independent oracle for
/// gradient checks (touches only the loss path).
Eigen::VectorXd finite_difference_gradient(const LossModel& model, const Eigen::VectorXd& w,
                                           const DataSlice& data, double h = 1e-6);

}  // namespace fedlap
