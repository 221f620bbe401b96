#include "fedlap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

StackedParams solve_quadratic_optimum(const ClientGraph& graph, const Eigen::MatrixXd& centers,
                                      const Eigen::VectorXd& curvatures, double eta) {
    const int n = graph.n_clients();
    if (centers.rows() != n || curvatures.size() != n)
        throw DimensionMismatch("solve_quadratic_optimum: centers/curvatures shape mismatch");
    if (eta < 0.0) throw InvalidConfig("solve_quadratic_optimum: eta must be >= 0");

    Eigen::MatrixXd system = eta * graph.laplacian();
    system += Eigen::MatrixXd(curvatures.asDiagonal());
    Eigen::MatrixXd rhs = curvatures.asDiagonal() * centers;

    Eigen::LDLT<Eigen::MatrixXd> ldlt(system);
    if (ldlt.info() != Eigen::Success)
        throw SingularSystem("solve_quadratic_optimum: factorization failed");
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    if (pivots.minCoeff() <= 1e-12 * pivots.maxCoeff())
        throw SingularSystem(
            "solve_quadratic_optimum: singular system (zero curvature on a component with "
            "eta = 0?)");
    Eigen::MatrixXd x = ldlt.solve(rhs);
    // one refinement pass; keeps the residual ~1e-12 even at eta ~ 1e6
    x += ldlt.solve(rhs - system * x);

    StackedParams w(std::move(x));
    const double matrix_scale = 1.0 + eta * graph.rho() + curvatures.maxCoeff();
    const double threshold = 1e-9 * matrix_scale * std::max(1.0, w.blocks.norm());
    if (!w.all_finite() ||
        quadratic_residual(graph, centers, curvatures, eta, w) > threshold)
        throw SingularSystem(
            "solve_quadratic_optimum: singular system (zero curvature on a component with "
            "eta = 0?)");
    return w;
}

double quadratic_residual(const ClientGraph& graph, const Eigen::MatrixXd& centers,
                          const Eigen::VectorXd& curvatures, double eta,
                          const StackedParams& w) {
    Eigen::MatrixXd grad = curvatures.asDiagonal() * (w.blocks - centers);
    grad += eta * laplacian_apply(graph, w.blocks);
    return grad.norm();
}

std::string to_json(const BoundedGradientReport& report) {
    std::ostringstream out;
    out.precision(17);
    out << "{\"eta\": " << report.eta << ", \"rho\": " << report.rho
        << ", \"beta_estimate\": " << report.beta_estimate
        << ", \"sigma2_squared\": " << report.sigma2_squared
        << ", \"n_trials\": " << report.n_trials
        << ", \"max_violation\": " << report.max_violation << "}";
    return out.str();
}

BoundedGradientReport check_bounded_gradient(const FedInstance& instance, double eta, int n_trials,
                            std::mt19937_64& rng) {
    instance.check();
    const int n = instance.n_clients();
    const int d = instance.param_dim();

    double beta = 0.0;
    for (int k = 0; k < n; ++k) {
        auto b = instance.models[k]->analytic_smoothness(instance.train_slice(k));
        if (!b) throw InvalidConfig("check_bounded_gradient: client " + std::to_string(k) +
                                    " has no analytic smoothness bound");
        beta = std::max(beta, *b);
    }

    const double rho = instance.graph.rho();
    if (eta * rho <= 2.0 * beta)
        throw PreconditionViolated("check_bounded_gradient: eta rho = " + std::to_string(eta * rho) +
                                   " <= 2 beta = " + std::to_string(2.0 * beta));

    auto grad_f = [&](const StackedParams& w) {
        Eigen::MatrixXd g(n, d);
        for (int k = 0; k < n; ++k)
            g.row(k) = instance.models[k]
                           ->grad(w.blocks.row(k).transpose(), instance.train_slice(k))
                           .transpose();
        return g;
    };

    BoundedGradientReport report;
    report.eta = eta;
    report.rho = rho;
    report.beta_estimate = beta;
    report.n_trials = n_trials;

    const double psi_sq = grad_f(StackedParams(n, d)).squaredNorm();  // ||grad F(0)||^2
    report.sigma2_squared = psi_sq * eta * rho / (eta * rho - 2.0 * beta);

    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < n_trials; ++trial) {
        const double scale =
            std::pow(10.0, -2.0 + 4.0 * trial / std::max(1, n_trials - 1));
        StackedParams w(n, d);
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < d; ++j) w.blocks(k, j) = normal(rng);
        const double norm = w.blocks.norm();
        if (norm > 0) w.blocks *= scale / norm;

        Eigen::MatrixXd gf = grad_f(w);
        Eigen::MatrixXd gj = gf + eta * laplacian_apply(instance.graph, w.blocks);
        const double lhs = gf.squaredNorm();
        const double rhs = report.sigma2_squared + gj.squaredNorm();
        worst = std::max(worst, lhs - rhs);
    }
    report.max_violation = worst;
    return report;
}

double estimate_variance(const FedInstance& instance, int batch_size, int n_draws,
                         std::mt19937_64& rng) {
    instance.check();
    if (n_draws < 100) throw InvalidConfig("estimate_variance: n_draws must be >= 100");

    const int n = instance.n_clients();
    const int d = instance.param_dim();
    StackedParams w(n, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < d; ++j) w.blocks(k, j) = normal(rng);

    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        const DataSlice data = instance.train_slice(k);
        const Eigen::VectorXd wk = w.blocks.row(k).transpose();
        const Eigen::VectorXd full = instance.models[k]->grad(wk, data);
        const int b = instance.models[k]->uses_data()
                          ? std::min(batch_size, data.size())
                          : batch_size;
        double acc = 0.0;
        for (int i = 0; i < n_draws; ++i)
            acc += (instance.models[k]->stoch_grad(wk, data, b, rng) - full).squaredNorm();
        total += acc / n_draws;
    }
    return total;
}

std::string to_json(const ConvergenceMetrics& metrics) {
    std::ostringstream out;
    out.precision(17);
    out << "{\"final_value\": " << metrics.final_value << ", \"final_gap\": " << metrics.final_gap
        << ", \"decay_rate\": " << metrics.decay_rate
        << ", \"rounds_to_tol\": " << metrics.rounds_to_tol << ", \"tol\": " << metrics.tol
        << ", \"used_distance\": " << (metrics.used_distance ? "true" : "false") << "}";
    return out.str();
}

ConvergenceMetrics analyze_convergence(const RunHistory& history, const StackedParams* w_star,
                                       double tol) {
    if (history.rows.empty()) throw InvalidConfig("analyze_convergence: empty history");

    ConvergenceMetrics metrics;
    metrics.tol = tol;

    // series indexed by round
    std::vector<std::pair<int, double>> series;
    if (!history.dist_to_ref.empty()) {
        metrics.used_distance = true;
        for (size_t t = 0; t < history.dist_to_ref.size(); ++t)
            series.emplace_back(static_cast<int>(t), history.dist_to_ref[t]);
    } else if (w_star && !history.snapshots.empty()) {
        metrics.used_distance = true;
        for (size_t t = 0; t < history.snapshots.size(); ++t)
            series.emplace_back(static_cast<int>(t), history.snapshots[t].distance_to(*w_star));
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& row : history.rows) best = std::min(best, row.objective);
        for (const auto& row : history.rows) series.emplace_back(row.round, row.objective - best);
    }

    metrics.final_value = series.back().second;
    double best = std::numeric_limits<double>::infinity();
    for (auto& [t, v] : series) best = std::min(best, v);
    metrics.final_gap = series.back().second - best;

    for (auto& [t, v] : series) {
        if (v <= tol) {
            metrics.rounds_to_tol = t;
            break;
        }
    }

    // least squares on log(v) over the last half, floored at 1e-12
    std::vector<std::pair<double, double>> pts;
    const size_t start = series.size() / 2;
    for (size_t i = start; i < series.size(); ++i)
        if (series[i].second > 1e-12)
            pts.emplace_back(static_cast<double>(series[i].first), std::log(series[i].second));
    if (pts.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto& [x, y] : pts) {
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double m = pts.size();
        const double denom = m * sxx - sx * sx;
        if (denom > 0) metrics.decay_rate = std::exp((m * sxy - sx * sy) / denom);
    }
    return metrics;
}

}  // namespace fedlap
