#include "fedlap/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedlap/rng.hpp"

namespace fedlap {

void LossModel::check_dim(const Eigen::VectorXd& w) const {
    if (w.size() != param_dim())
        throw DimensionMismatch("parameter vector has dim " + std::to_string(w.size()) +
                                ", model expects " + std::to_string(param_dim()));
}

void LossModel::check_data(const DataSlice& data) const {
    if (uses_data() && data.empty()) throw EmptyData("model requires a non-empty data slice");
}

Eigen::VectorXd LossModel::stoch_grad(const Eigen::VectorXd& w, const DataSlice& data,
                                      int batch_size, std::mt19937_64& rng) const {
    if (!uses_data()) return grad(w, data);
    check_data(data);
    const int n = data.size();
    if (batch_size < 1 || batch_size > n)
        throw BatchTooLarge("batch size " + std::to_string(batch_size) + " for " +
                            std::to_string(n) + " samples");
    if (batch_size == n) return grad(w, data);

    // partial Fisher-Yates over the slice's local indices
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> batch(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
        batch[i] = data.index(idx[i]);
    }
    DataSlice sub{data.x, data.y, &batch};
    return grad(w, sub);
}

double LossModel::accuracy(const Eigen::VectorXd&, const DataSlice&) const {
    return std::numeric_limits<double>::quiet_NaN();
}

Eigen::VectorXd LossModel::init_params(std::mt19937_64&) const {
    return Eigen::VectorXd::Zero(param_dim());
}

// ---- QuadraticModel --------------------------------------------------------

QuadraticModel::QuadraticModel(Eigen::VectorXd center, double curvature)
    : center_(std::move(center)), curvature_(curvature) {
    if (curvature_ < 0.0) throw InvalidConfig("QuadraticModel: curvature must be >= 0");
}

double QuadraticModel::loss(const Eigen::VectorXd& w, const DataSlice&) const {
    check_dim(w);
    return 0.5 * curvature_ * (w - center_).squaredNorm();
}

Eigen::VectorXd QuadraticModel::grad(const Eigen::VectorXd& w, const DataSlice&) const {
    check_dim(w);
    return curvature_ * (w - center_);
}

// ---- MlrModel ----------------------------------------------------------------

MlrModel::MlrModel(int n_features, int n_classes, double l2_alpha)
    : n_features_(n_features), n_classes_(n_classes), l2_alpha_(l2_alpha) {
    if (n_features < 1 || n_classes < 2) throw InvalidConfig("MlrModel: need >=1 feature, >=2 classes");
    if (l2_alpha < 0.0) throw InvalidConfig("MlrModel: l2_alpha must be >= 0");
}

namespace {

// logits z_c = <x~, w_c> for one sample; w viewed as C x (F+1) row-major
inline Eigen::VectorXd mlr_logits(const Eigen::VectorXd& w, int C, int Fp1,
                                  Eigen::MatrixXd::ConstRowXpr x) {
    Eigen::VectorXd z(C);
    for (int c = 0; c < C; ++c) {
        const double* wc = w.data() + static_cast<std::ptrdiff_t>(c) * Fp1;
        double acc = wc[Fp1 - 1];  // bias feature = constant 1
        for (int f = 0; f < Fp1 - 1; ++f) acc += wc[f] * x(f);
        z(c) = acc;
    }
    return z;
}

inline void softmax_inplace(Eigen::VectorXd& z) {
    const double m = z.maxCoeff();
    z = (z.array() - m).exp();
    z /= z.sum();
}

}  // namespace

double MlrModel::loss(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    const int C = n_classes_, Fp1 = n_features_ + 1, n = data.size();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z = mlr_logits(w, C, Fp1, data.row(i));
        const double m = z.maxCoeff();
        const double lse = m + std::log((z.array() - m).exp().sum());
        total += lse - z(data.label(i));
    }
    return total / n + 0.5 * l2_alpha_ * w.squaredNorm();
}

Eigen::VectorXd MlrModel::grad(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    const int C = n_classes_, Fp1 = n_features_ + 1, n = data.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(param_dim());
    for (int i = 0; i < n; ++i) {
        auto x = data.row(i);
        Eigen::VectorXd p = mlr_logits(w, C, Fp1, x);
        softmax_inplace(p);
        p(data.label(i)) -= 1.0;
        for (int c = 0; c < C; ++c) {
            double* gc = g.data() + static_cast<std::ptrdiff_t>(c) * Fp1;
            const double pc = p(c);
            for (int f = 0; f < Fp1 - 1; ++f) gc[f] += pc * x(f);
            gc[Fp1 - 1] += pc;
        }
    }
    g /= n;
    g += l2_alpha_ * w;
    return g;
}

Eigen::MatrixXd MlrModel::predict_proba(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    Eigen::MatrixXd out(data.size(), n_classes_);
    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd p = mlr_logits(w, n_classes_, n_features_ + 1, data.row(i));
        softmax_inplace(p);
        out.row(i) = p.transpose();
    }
    return out;
}

double MlrModel::accuracy(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    int hits = 0;
    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd z = mlr_logits(w, n_classes_, n_features_ + 1, data.row(i));
        Eigen::Index argmax;
        z.maxCoeff(&argmax);
        hits += (static_cast<int>(argmax) == data.label(i));
    }
    return static_cast<double>(hits) / data.size();
}

Eigen::VectorXd MlrModel::init_params(std::mt19937_64&) const {
    return Eigen::VectorXd::Zero(param_dim());  // exact for the convex problem
}

std::optional<double> MlrModel::analytic_smoothness(const DataSlice& data) const {
    check_data(data);
    // ||diag(p) - p p^T|| <= 1/2, so the Hessian norm is bounded by
    // 0.5 max_j ||x~_j||^2 + alpha.
    double max_sq = 0.0;
    for (int i = 0; i < data.size(); ++i)
        max_sq = std::max(max_sq, data.row(i).squaredNorm() + 1.0);
    return 0.5 * max_sq + l2_alpha_;
}

// ---- MlpModel ----------------------------------------------------------------

MlpModel::MlpModel(int n_features, int n_hidden, int n_classes)
    : in_(n_features), hidden_(n_hidden), out_(n_classes) {
    if (in_ < 1 || hidden_ < 1 || out_ < 2) throw InvalidConfig("MlpModel: bad layer sizes");
}

int MlpModel::param_dim() const { return hidden_ * in_ + hidden_ + out_ * hidden_ + out_; }

namespace {

struct MlpViews {
    Eigen::Map<const Eigen::MatrixXd> w1;  // hidden x in
    Eigen::Map<const Eigen::VectorXd> b1;
    Eigen::Map<const Eigen::MatrixXd> w2;  // out x hidden
    Eigen::Map<const Eigen::VectorXd> b2;
};

MlpViews mlp_views(const Eigen::VectorXd& w, int in, int hidden, int out) {
    const double* p = w.data();
    return MlpViews{
        {p, hidden, in},
        {p + hidden * in, hidden},
        {p + hidden * in + hidden, out, hidden},
        {p + hidden * in + hidden + out * hidden, out},
    };
}

}  // namespace

double MlpModel::loss(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    auto v = mlp_views(w, in_, hidden_, out_);
    double total = 0.0;
    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd h = (v.w1 * data.row(i).transpose() + v.b1).cwiseMax(0.0);
        Eigen::VectorXd z = v.w2 * h + v.b2;
        const double m = z.maxCoeff();
        total += m + std::log((z.array() - m).exp().sum()) - z(data.label(i));
    }
    return total / data.size();
}

Eigen::VectorXd MlpModel::grad(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    auto v = mlp_views(w, in_, hidden_, out_);
    Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(hidden_, in_);
    Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(hidden_);
    Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(out_, hidden_);
    Eigen::VectorXd gb2 = Eigen::VectorXd::Zero(out_);

    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd x = data.row(i).transpose();
        Eigen::VectorXd pre = v.w1 * x + v.b1;
        Eigen::VectorXd h = pre.cwiseMax(0.0);
        Eigen::VectorXd p = v.w2 * h + v.b2;
        softmax_inplace(p);
        p(data.label(i)) -= 1.0;  // dL/dz

        g2.noalias() += p * h.transpose();
        gb2 += p;
        Eigen::VectorXd dh = v.w2.transpose() * p;
        for (int j = 0; j < hidden_; ++j)
            if (pre(j) <= 0.0) dh(j) = 0.0;  // ReLU'(0) = 0
        g1.noalias() += dh * x.transpose();
        gb1 += dh;
    }

    Eigen::VectorXd g(param_dim());
    const double inv = 1.0 / data.size();
    int off = 0;
    Eigen::Map<Eigen::MatrixXd>(g.data() + off, hidden_, in_) = g1 * inv;
    off += hidden_ * in_;
    Eigen::Map<Eigen::VectorXd>(g.data() + off, hidden_) = gb1 * inv;
    off += hidden_;
    Eigen::Map<Eigen::MatrixXd>(g.data() + off, out_, hidden_) = g2 * inv;
    off += out_ * hidden_;
    Eigen::Map<Eigen::VectorXd>(g.data() + off, out_) = gb2 * inv;
    return g;
}

Eigen::MatrixXd MlpModel::predict_proba(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    auto v = mlp_views(w, in_, hidden_, out_);
    Eigen::MatrixXd out(data.size(), out_);
    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd h = (v.w1 * data.row(i).transpose() + v.b1).cwiseMax(0.0);
        Eigen::VectorXd p = v.w2 * h + v.b2;
        softmax_inplace(p);
        out.row(i) = p.transpose();
    }
    return out;
}

double MlpModel::accuracy(const Eigen::VectorXd& w, const DataSlice& data) const {
    check_dim(w);
    check_data(data);
    auto v = mlp_views(w, in_, hidden_, out_);
    int hits = 0;
    for (int i = 0; i < data.size(); ++i) {
        Eigen::VectorXd h = (v.w1 * data.row(i).transpose() + v.b1).cwiseMax(0.0);
        Eigen::VectorXd z = v.w2 * h + v.b2;
        Eigen::Index argmax;
        z.maxCoeff(&argmax);
        hits += (static_cast<int>(argmax) == data.label(i));
    }
    return static_cast<double>(hits) / data.size();
}

Eigen::VectorXd MlpModel::init_params(std::mt19937_64& rng) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(param_dim());
    auto glorot = [&rng](double* dst, int rows, int cols) {
        const double s = std::sqrt(6.0 / (rows + cols));
        std::uniform_real_distribution<double> u(-s, s);
        for (int i = 0; i < rows * cols; ++i) dst[i] = u(rng);
    };
    glorot(w.data(), hidden_, in_);
    glorot(w.data() + hidden_ * in_ + hidden_, out_, hidden_);
    return w;  // biases stay zero
}

// ---- probes -------------------------------------------------------------------

double estimate_smoothness(const LossModel& model, const DataSlice& data, int n_probes,
                           std::uint64_t seed) {
    if (n_probes < 1) throw InvalidConfig("estimate_smoothness: n_probes must be >= 1");
    auto rng = make_rng(seed, Stream::Probes);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = model.param_dim();
    double best = 0.0;
    for (int i = 0; i < n_probes; ++i) {
        const double scale = std::pow(10.0, -2.0 + 3.0 * i / std::max(1, n_probes - 1));
        Eigen::VectorXd w(d), dw(d);
        for (int j = 0; j < d; ++j) w(j) = scale * normal(rng);
        for (int j = 0; j < d; ++j) dw(j) = normal(rng);
        dw *= (1e-3 * scale) / std::max(dw.norm(), 1e-300);
        Eigen::VectorXd w2 = w + dw;
        const double slope =
            (model.grad(w2, data) - model.grad(w, data)).norm() / dw.norm();
        best = std::max(best, slope);
    }
    return best;
}

Eigen::VectorXd finite_difference_gradient(const LossModel& model, const Eigen::VectorXd& w,
                                           const DataSlice& data, double h) {
    Eigen::VectorXd g(w.size());
    Eigen::VectorXd probe = w;
    for (int i = 0; i < w.size(); ++i) {
        const double orig = probe(i);
        probe(i) = orig + h;
        const double up = model.loss(probe, data);
        probe(i) = orig - h;
        const double down = model.loss(probe, data);
        probe(i) = orig;
        g(i) = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace fedlap
