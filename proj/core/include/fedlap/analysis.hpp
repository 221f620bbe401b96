#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fedlap/engine.hpp"

namespace fedlap {

/// Closed-form optimum of the quadratic federation: solves
/// (diag(curvatures) + eta L) W* = diag(curvatures) C blockwise per dimension
/// (dense LDLT plus one iterative-refinement pass), so that the gradient of
/// J vanishes at W*. Throws SingularSystem when the system is singular
/// (possible only with a zero-curvature component at eta = 0).
StackedParams solve_quadratic_optimum(const ClientGraph& graph, const Eigen::MatrixXd& centers,
                                      const Eigen::VectorXd& curvatures, double eta);

/// ||grad J(W)|| for a quadratic federation; the solver's residual metric.
double quadratic_residual(const ClientGraph& graph, const Eigen::MatrixXd& centers,
                          const Eigen::VectorXd& curvatures, double eta,
                          const StackedParams& w);

struct BoundedGradientReport {
    double eta = 0.0;
    double rho = 0.0;
    double beta_estimate = 0.0;
    double sigma2_squared = 0.0;  // ||grad F(0)||^2 eta rho / (eta rho - 2 beta)
    int n_trials = 0;
    // worst observed margin of sum_k ||grad F_k||^2 <= sigma2^2 + sum_k ||grad_k J||^2
    // over the random probes; <= 0 (up to fp noise) when beta is a valid
    // global smoothness constant
    double max_violation = 0.0;
};

std::string to_json(const BoundedGradientReport& report);

/// Evaluates the bounded-gradient inequality at n_trials random W with probe
/// norms swept over 1e-2..1e2. Requires eta rho > 2 beta, where beta is the
/// largest analytic smoothness bound over the clients; throws
/// PreconditionViolated otherwise (and InvalidConfig when some client has no
/// analytic bound).
BoundedGradientReport check_bounded_gradient(const FedInstance& instance, double eta, int n_trials,
                            std::mt19937_64& rng);

/// Empirical total stochastic-gradient variance sum_k E||grad~F_k - grad F_k||^2
/// at a random W, batch size B, n_draws Monte-Carlo draws per client.
double estimate_variance(const FedInstance& instance, int batch_size, int n_draws,
                         std::mt19937_64& rng);

struct ConvergenceMetrics {
    double final_value = 0.0;   // last point of the fitted series
    double final_gap = 0.0;     // last minus best value of the series
    double decay_rate = 1.0;    // per-round geometric factor fitted on the tail
    long rounds_to_tol = -1;    // first round at or below tol (-1: never)
    double tol = 0.0;
    bool used_distance = false;  // true when fitted on ||W^(t) - W*||
};

std::string to_json(const ConvergenceMetrics& metrics);

/// Trend extraction from a run: fits log(series) over the last half of the
/// rounds (values below 1e-12 excluded). The series is ||W^(t) - W*|| when a
/// reference was tracked or snapshots plus w_star are available, otherwise
/// the objective gap J(W^(t)) - min_t J.
ConvergenceMetrics analyze_convergence(const RunHistory& history,
                                       const StackedParams* w_star = nullptr,
                                       double tol = 1e-4);

}  // namespace fedlap
