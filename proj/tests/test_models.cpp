#include <doctest.h>

#include <cmath>

#include "fedlap/models.hpp"
#include "fedlap/rng.hpp"
#include "test_util.hpp"

using namespace fedlap;

namespace {

struct Classification {
    Eigen::MatrixXd x;
    Eigen::VectorXi y;
    DataSlice slice() const { return {&x, &y, nullptr}; }
};

Classification make_classification(int n, int d, int classes, std::mt19937_64& rng) {
    Classification data;
    data.x = test_util::random_matrix(n, d, rng);
    data.y.resize(n);
    std::uniform_int_distribution<int> pick(0, classes - 1);
    for (int i = 0; i < n; ++i) data.y(i) = pick(rng);
    return data;
}

}  // namespace

TEST_CASE("quadratic model basics") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    QuadraticModel at_zero(zero);
    CHECK(at_zero.loss(zero, DataSlice::none()) == 0.0);

    Eigen::VectorXd c(1);
    c << 4.0;
    QuadraticModel q(c);
    Eigen::VectorXd w(1);
    w << 1.0;
    CHECK(q.grad(w, DataSlice::none())(0) == doctest::Approx(-3.0));

    auto rng = make_rng(1, Stream::Probes);
    CHECK((q.stoch_grad(w, DataSlice::none(), 5, rng) - q.grad(w, DataSlice::none())).norm() ==
          0.0);
    CHECK(std::isnan(q.accuracy(w, DataSlice::none())));
}

TEST_CASE("estimate_smoothness is exact for constant Hessians") {
    Eigen::VectorXd c(2);
    c << 1.0, -1.0;
    CHECK(estimate_smoothness(QuadraticModel(c, 1.0), DataSlice::none(), 10) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(estimate_smoothness(QuadraticModel(c, 2.5), DataSlice::none(), 10) ==
          doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("MLR at w = 0 on balanced two-class data gives ln 2") {
    auto rng = make_rng(2, Stream::Probes);
    Classification data = make_classification(10, 3, 2, rng);
    for (int i = 0; i < 10; ++i) data.y(i) = i % 2;
    MlrModel mlr(3, 2, 0.0);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mlr.param_dim());
    CHECK(mlr.loss(w, data.slice()) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("MLP with zero weights gives ln C") {
    auto rng = make_rng(3, Stream::Probes);
    Classification data = make_classification(6, 4, 3, rng);
    MlpModel mlp(4, 5, 3);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mlp.param_dim());
    CHECK(mlp.loss(w, data.slice()) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences") {
    auto rng = make_rng(4, Stream::Probes);
    std::normal_distribution<double> normal(0.0, 1.0);

    double worst_mlr = 0.0, worst_quad = 0.0, worst_mlp = 0.0;
    for (int probe = 0; probe < 20; ++probe) {
        Classification data = make_classification(15, 5, 3, rng);

        MlrModel mlr(5, 3, 0.1);
        Eigen::VectorXd w(mlr.param_dim());
        for (int i = 0; i < w.size(); ++i) w(i) = 0.7 * normal(rng);
        Eigen::VectorXd fd = finite_difference_gradient(mlr, w, data.slice());
        worst_mlr = std::max(worst_mlr,
                             (mlr.grad(w, data.slice()) - fd).norm() / fd.norm());

        Eigen::VectorXd c(4);
        for (int i = 0; i < 4; ++i) c(i) = normal(rng);
        QuadraticModel quad(c, 1.3);
        Eigen::VectorXd wq(4);
        for (int i = 0; i < 4; ++i) wq(i) = normal(rng);
        Eigen::VectorXd fdq = finite_difference_gradient(quad, wq, DataSlice::none());
        worst_quad = std::max(worst_quad,
                              (quad.grad(wq, DataSlice::none()) - fdq).norm() / fdq.norm());

        MlpModel mlp(5, 7, 3);
        Eigen::VectorXd wm(mlp.param_dim());
        for (int i = 0; i < wm.size(); ++i) wm(i) = 0.7 * normal(rng);
        Eigen::VectorXd fdm = finite_difference_gradient(mlp, wm, data.slice());
        worst_mlp = std::max(worst_mlp,
                             (mlp.grad(wm, data.slice()) - fdm).norm() / fdm.norm());
    }
    CHECK(worst_mlr < 1e-5);
    CHECK(worst_quad < 1e-5);
    CHECK(worst_mlp < 1e-4);
}

TEST_CASE("softmax outputs are normalized") {
    auto rng = make_rng(5, Stream::Probes);
    Classification data = make_classification(20, 4, 5, rng);
    std::normal_distribution<double> normal(0.0, 2.0);

    MlrModel mlr(4, 5, 0.01);
    Eigen::VectorXd w(mlr.param_dim());
    for (int i = 0; i < w.size(); ++i) w(i) = normal(rng);
    Eigen::VectorXd sums = mlr.predict_proba(w, data.slice()).rowwise().sum();
    CHECK((sums.array() - 1.0).abs().maxCoeff() <= 1e-10);

    MlpModel mlp(4, 6, 5);
    Eigen::VectorXd wm(mlp.param_dim());
    for (int i = 0; i < wm.size(); ++i) wm(i) = normal(rng);
    Eigen::VectorXd msums = mlp.predict_proba(wm, data.slice()).rowwise().sum();
    CHECK((msums.array() - 1.0).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("MLR with alpha > 0 satisfies the strong-convexity inequality") {
    auto rng = make_rng(6, Stream::Probes);
    Classification data = make_classification(25, 4, 3, rng);
    const double alpha = 0.2;
    MlrModel mlr(4, 3, alpha);
    std::normal_distribution<double> normal(0.0, 1.5);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd w(mlr.param_dim()), w2(mlr.param_dim());
        for (int i = 0; i < w.size(); ++i) {
            w(i) = normal(rng);
            w2(i) = normal(rng);
        }
        const double lhs = mlr.loss(w, data.slice());
        const double rhs = mlr.loss(w2, data.slice()) +
                           mlr.grad(w2, data.slice()).dot(w - w2) +
                           0.5 * alpha * (w - w2).squaredNorm();
        CHECK(lhs >= rhs - 1e-9);
    }
}

TEST_CASE("stoch_grad: full batch bypasses sampling bit for bit") {
    auto rng = make_rng(7, Stream::Probes);
    Classification data = make_classification(12, 3, 2, rng);
    MlrModel mlr(3, 2, 0.05);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(mlr.param_dim()) * 0.3;
    Eigen::VectorXd full = mlr.grad(w, data.slice());
    Eigen::VectorXd stoch = mlr.stoch_grad(w, data.slice(), 12, rng);
    CHECK((full - stoch).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(mlr.stoch_grad(w, data.slice(), 13, rng), BatchTooLarge);
    CHECK_THROWS_AS(mlr.stoch_grad(w, data.slice(), 0, rng), BatchTooLarge);
}

TEST_CASE("stoch_grad is an unbiased estimator (Monte Carlo, fixed seed)") {
    auto rng = make_rng(8, Stream::Probes);
    Classification data = make_classification(40, 3, 3, rng);
    MlrModel mlr(3, 3, 0.02);
    Eigen::VectorXd w(mlr.param_dim());
    std::normal_distribution<double> normal(0.0, 0.8);
    for (int i = 0; i < w.size(); ++i) w(i) = normal(rng);

    const Eigen::VectorXd full = mlr.grad(w, data.slice());
    const int n_draws = 10000;
    Eigen::MatrixXd draws(n_draws, mlr.param_dim());
    for (int i = 0; i < n_draws; ++i)
        draws.row(i) = mlr.stoch_grad(w, data.slice(), 8, rng).transpose();

    Eigen::VectorXd mean = draws.colwise().mean().transpose();
    Eigen::VectorXd sd(mlr.param_dim());
    for (int j = 0; j < mlr.param_dim(); ++j)
        sd(j) = std::sqrt((draws.col(j).array() - mean(j)).square().sum() / (n_draws - 1));

    // per-coordinate 3-sigma on the Monte-Carlo mean, 5-sigma for the overall check
    int outside_3sigma = 0;
    for (int j = 0; j < mlr.param_dim(); ++j) {
        const double band = sd(j) / std::sqrt(static_cast<double>(n_draws));
        if (std::abs(mean(j) - full(j)) > 3.0 * band) ++outside_3sigma;
        CHECK(std::abs(mean(j) - full(j)) <= 5.0 * band + 1e-15);
    }
    CHECK(outside_3sigma <= 2);  // ~0.3% expected rate over 12 coordinates
}

TEST_CASE("MLR probed smoothness stays within the logistic Hessian bound") {
    auto rng = make_rng(9, Stream::Probes);
    Classification data = make_classification(30, 4, 3, rng);
    const double alpha = 0.05;
    MlrModel mlr(4, 3, alpha);
    double max_feature_sq = 0.0;
    for (int i = 0; i < 30; ++i)
        max_feature_sq = std::max(max_feature_sq, data.x.row(i).squaredNorm() + 1.0);
    const double probed = estimate_smoothness(mlr, data.slice(), 30);
    CHECK(probed > 0.0);
    CHECK(probed <= 0.25 * max_feature_sq + alpha);
    CHECK(*mlr.analytic_smoothness(data.slice()) == doctest::Approx(0.5 * max_feature_sq + alpha));
}

TEST_CASE("model error contracts") {
    MlrModel mlr(3, 2, 0.0);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mlr.param_dim());
    CHECK_THROWS_AS(mlr.loss(w, DataSlice::none()), EmptyData);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(5);
    auto rng = make_rng(10, Stream::Probes);
    Classification data = make_classification(4, 3, 2, rng);
    CHECK_THROWS_AS(mlr.loss(bad, data.slice()), DimensionMismatch);
    CHECK_THROWS_AS(mlr.grad(bad, data.slice()), DimensionMismatch);
}

TEST_CASE("MLP Glorot initialization bounds") {
    MlpModel mlp(10, 8, 4);
    auto rng = make_rng(11, Stream::Probes);
    Eigen::VectorXd w = mlp.init_params(rng);
    const double s1 = std::sqrt(6.0 / (8 + 10));
    for (int i = 0; i < 8 * 10; ++i) CHECK(std::abs(w(i)) <= s1);
    for (int i = 8 * 10; i < 8 * 10 + 8; ++i) CHECK(w(i) == 0.0);  // hidden biases
    CHECK(w.cwiseAbs().maxCoeff() > 0.0);
}
