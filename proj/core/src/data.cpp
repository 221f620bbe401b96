#include "fedlap/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "fedlap/errors.hpp"
#include "fedlap/rng.hpp"

namespace fedlap {

void FederatedDataset::validate() const {
    if (clients.empty()) throw InvalidConfig("dataset has no clients");
    for (int k = 0; k < n_clients(); ++k) {
        const auto& c = clients[k];
        if (c.n_train() < 1 || c.n_test() < 1)
            throw InvalidConfig("client " + std::to_string(k) + " has an empty split");
        if (c.x_train.cols() != n_features || c.x_test.cols() != n_features)
            throw InvalidConfig("client " + std::to_string(k) + " feature width mismatch");
        std::set<int> allowed(c.label_set.begin(), c.label_set.end());
        auto check = [&](const Eigen::VectorXi& y) {
            for (int i = 0; i < y.size(); ++i) {
                if (y(i) < 0 || y(i) >= n_classes || !allowed.count(y(i)))
                    throw InvalidConfig("client " + std::to_string(k) +
                                        " has label outside its label set");
            }
        };
        check(c.y_train);
        check(c.y_test);
    }
}

std::vector<std::vector<int>> FederatedDataset::label_sets() const {
    std::vector<std::vector<int>> out;
    out.reserve(clients.size());
    for (const auto& c : clients) out.push_back(c.label_set);
    return out;
}

double FederatedDataset::mean_samples_per_client() const {
    double total = 0.0;
    for (const auto& c : clients) total += c.n_train() + c.n_test();
    return total / n_clients();
}

double FederatedDataset::std_samples_per_client() const {
    const double mean = mean_samples_per_client();
    double acc = 0.0;
    for (const auto& c : clients) {
        const double v = c.n_train() + c.n_test() - mean;
        acc += v * v;
    }
    return std::sqrt(acc / n_clients());
}

namespace {

std::vector<int> random_subset(int n, int size, std::mt19937_64& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < size; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

int draw_lognormal_count(double mean, double stddev, std::mt19937_64& rng) {
    if (stddev <= 0.0) return std::max(4, static_cast<int>(std::lround(mean)));
    // moment-matched lognormal: skewed counts like the real partitions
    const double var_ratio = (stddev * stddev) / (mean * mean);
    const double sigma2 = std::log(1.0 + var_ratio);
    const double mu = std::log(mean) - 0.5 * sigma2;
    std::normal_distribution<double> normal(mu, std::sqrt(sigma2));
    return std::max(4, static_cast<int>(std::lround(std::exp(normal(rng)))));
}

}  // namespace

FederatedDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n_clients < 1 || spec.n_features < 1 || spec.n_classes < 2)
        throw InvalidConfig("generate_synthetic: bad sizes");
    if (spec.labels_per_client < 1 || spec.labels_per_client > spec.n_classes)
        throw InvalidConfig("generate_synthetic: labels_per_client must be in [1, n_classes]");
    if (spec.samples_mean < 4.0)
        throw InvalidConfig("generate_synthetic: samples_mean must be >= 4");
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw InvalidConfig("generate_synthetic: train_fraction must be in (0,1)");

    FederatedDataset ds;
    ds.n_features = spec.n_features;
    ds.n_classes = spec.n_classes;

    // global class means
    Eigen::MatrixXd class_means(spec.n_classes, spec.n_features);
    {
        auto rng = make_rng(spec.seed, Stream::DataGen, 0xC1A55);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int c = 0; c < spec.n_classes; ++c)
            for (int f = 0; f < spec.n_features; ++f)
                class_means(c, f) = spec.class_sep * normal(rng);
    }

    ds.clients.resize(spec.n_clients);
    for (int k = 0; k < spec.n_clients; ++k) {
        auto rng = make_rng(spec.seed, Stream::DataGen, 1, static_cast<std::uint64_t>(k));
        std::normal_distribution<double> normal(0.0, 1.0);

        std::vector<int> labels = random_subset(spec.n_classes, spec.labels_per_client, rng);

        Eigen::VectorXd shift(spec.n_features);
        for (int f = 0; f < spec.n_features; ++f) shift(f) = spec.client_shift * normal(rng);

        const int n_total = draw_lognormal_count(spec.samples_mean, spec.samples_std, rng);
        int n_test = std::clamp(static_cast<int>(std::lround((1.0 - spec.train_fraction) * n_total)),
                                1, n_total - 1);
        int n_train = n_total - n_test;
        // every declared label appears at least once in the training split
        n_train = std::max(n_train, spec.labels_per_client);
        n_test = n_total - n_train;
        if (n_test < 1) {
            n_test = 1;
            n_train = n_total - 1;
        }

        auto& c = ds.clients[k];
        c.label_set = labels;
        c.x_train.resize(n_train, spec.n_features);
        c.y_train.resize(n_train);
        c.x_test.resize(n_test, spec.n_features);
        c.y_test.resize(n_test);

        std::uniform_int_distribution<int> pick_label(0, spec.labels_per_client - 1);
        auto fill = [&](Eigen::MatrixXd& x, Eigen::VectorXi& y, int i, int label) {
            y(i) = label;
            for (int f = 0; f < spec.n_features; ++f)
                x(i, f) = class_means(label, f) + shift(f) + normal(rng);
        };
        for (int i = 0; i < n_train; ++i) {
            const int label = i < spec.labels_per_client ? labels[i] : labels[pick_label(rng)];
            fill(c.x_train, c.y_train, i, label);
        }
        for (int i = 0; i < n_test; ++i) fill(c.x_test, c.y_test, i, labels[pick_label(rng)]);
    }
    ds.validate();
    return ds;
}

FederatedDataset split(const FederatedDataset& dataset, double train_fraction,
                       std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw InvalidConfig("split: train_fraction must be in (0,1)");

    FederatedDataset out;
    out.n_features = dataset.n_features;
    out.n_classes = dataset.n_classes;
    out.clients.resize(dataset.n_clients());

    for (int k = 0; k < dataset.n_clients(); ++k) {
        const auto& c = dataset.clients[k];
        const int n = c.n_train() + c.n_test();
        if (n < 2) throw TooFewSamples("split: client " + std::to_string(k) +
                                       " has fewer than 2 samples");

        Eigen::MatrixXd x(n, dataset.n_features);
        Eigen::VectorXi y(n);
        x.topRows(c.n_train()) = c.x_train;
        y.head(c.n_train()) = c.y_train;
        x.bottomRows(c.n_test()) = c.x_test;
        y.tail(c.n_test()) = c.y_test;

        auto rng = make_rng(seed, Stream::DataGen, 2, static_cast<std::uint64_t>(k));
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        const int n_train = std::clamp(static_cast<int>(std::lround(train_fraction * n)), 1, n - 1);
        auto& oc = out.clients[k];
        oc.label_set = c.label_set;
        oc.x_train.resize(n_train, dataset.n_features);
        oc.y_train.resize(n_train);
        oc.x_test.resize(n - n_train, dataset.n_features);
        oc.y_test.resize(n - n_train);
        for (int i = 0; i < n; ++i) {
            if (i < n_train) {
                oc.x_train.row(i) = x.row(perm[i]);
                oc.y_train(i) = y(perm[i]);
            } else {
                oc.x_test.row(i - n_train) = x.row(perm[i]);
                oc.y_test(i - n_train) = y(perm[i]);
            }
        }
    }
    return out;
}

CutoffResult apply_cutoff(const FederatedDataset& dataset, double fraction_of_clients,
                          double keep_fraction, std::uint64_t seed) {
    if (fraction_of_clients <= 0.0 || fraction_of_clients > 1.0)
        throw InvalidConfig("apply_cutoff: fraction_of_clients must be in (0,1]");
    if (keep_fraction <= 0.0 || keep_fraction >= 1.0)
        throw InvalidConfig("apply_cutoff: keep_fraction must be in (0,1)");

    const int n = dataset.n_clients();
    const int n_cut = static_cast<int>(std::ceil(fraction_of_clients * n));
    auto rng = make_rng(seed, Stream::DataGen, 3);
    std::vector<int> cut = random_subset(n, n_cut, rng);

    CutoffResult result;
    result.dataset = dataset;
    result.cut_clients = cut;

    for (int k : cut) {
        auto& c = result.dataset.clients[k];
        const int keep = std::max(1, static_cast<int>(std::lround(keep_fraction * c.n_train())));
        if (keep >= c.n_train()) continue;
        auto client_rng = make_rng(seed, Stream::DataGen, 4, static_cast<std::uint64_t>(k));
        std::vector<int> keep_idx = random_subset(c.n_train(), keep, client_rng);
        Eigen::MatrixXd x(keep, dataset.n_features);
        Eigen::VectorXi y(keep);
        for (int i = 0; i < keep; ++i) {
            x.row(i) = c.x_train.row(keep_idx[i]);
            y(i) = c.y_train(keep_idx[i]);
        }
        c.x_train = std::move(x);
        c.y_train = std::move(y);
    }
    return result;
}

// ---- CSV bundle -----------------------------------------------------------

void save_csv(const FederatedDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_csv: cannot open " + path + " for writing");

    out << "client_id,split,label";
    for (int f = 0; f < dataset.n_features; ++f) out << ",f" << f;
    out << "\n";

    char buf[40];
    auto write_rows = [&](int k, const char* split, const Eigen::MatrixXd& x,
                          const Eigen::VectorXi& y) {
        for (int i = 0; i < x.rows(); ++i) {
            out << k << ',' << split << ',' << y(i);
            for (int f = 0; f < x.cols(); ++f) {
                std::snprintf(buf, sizeof buf, "%.17g", x(i, f));
                out << ',' << buf;
            }
            out << "\n";
        }
    };
    for (int k = 0; k < dataset.n_clients(); ++k) {
        write_rows(k, "train", dataset.clients[k].x_train, dataset.clients[k].y_train);
        write_rows(k, "test", dataset.clients[k].x_test, dataset.clients[k].y_test);
    }
}

FederatedDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("load_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    const std::vector<std::string> fixed = {"client_id", "split", "label"};
    for (size_t i = 0; i < fixed.size(); ++i)
        if (header.size() <= i || header[i] != fixed[i])
            throw SchemaError("load_csv: missing or misplaced column \"" + fixed[i] + "\"");
    const int n_features = static_cast<int>(header.size()) - 3;
    if (n_features < 1) throw SchemaError("load_csv: no feature columns (f0..)");
    for (int f = 0; f < n_features; ++f)
        if (header[3 + f] != "f" + std::to_string(f))
            throw SchemaError("load_csv: expected column \"f" + std::to_string(f) +
                              "\", found \"" + header[3 + f] + "\"");

    struct Raw {
        std::vector<std::vector<double>> x_train, x_test;
        std::vector<int> y_train, y_test;
    };
    std::vector<Raw> raw;
    int max_label = -1;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != header.size())
            throw ParseError("load_csv: line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " columns, found " +
                             std::to_string(cells.size()));
        auto parse_int = [&](const std::string& s, int col) {
            try {
                size_t pos = 0;
                int v = std::stoi(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (...) {
                throw ParseError("load_csv: line " + std::to_string(line_no) + ", column " +
                                 std::to_string(col + 1) + ": not an integer: \"" + s + "\"");
            }
        };
        auto parse_double = [&](const std::string& s, int col) {
            try {
                size_t pos = 0;
                double v = std::stod(s, &pos);
                if (pos != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (...) {
                throw ParseError("load_csv: line " + std::to_string(line_no) + ", column " +
                                 std::to_string(col + 1) + ": not a number: \"" + s + "\"");
            }
        };

        const int client = parse_int(cells[0], 0);
        if (client < 0) throw ParseError("load_csv: line " + std::to_string(line_no) +
                                         ": negative client_id");
        const std::string& split_name = cells[1];
        if (split_name != "train" && split_name != "test")
            throw ParseError("load_csv: line " + std::to_string(line_no) +
                             ": split must be train or test, got \"" + split_name + "\"");
        const int label = parse_int(cells[2], 2);
        if (label < 0) throw ParseError("load_csv: line " + std::to_string(line_no) +
                                        ": negative label");
        max_label = std::max(max_label, label);

        std::vector<double> feats(n_features);
        for (int f = 0; f < n_features; ++f) feats[f] = parse_double(cells[3 + f], 3 + f);

        if (client >= static_cast<int>(raw.size())) raw.resize(client + 1);
        if (split_name == "train") {
            raw[client].x_train.push_back(std::move(feats));
            raw[client].y_train.push_back(label);
        } else {
            raw[client].x_test.push_back(std::move(feats));
            raw[client].y_test.push_back(label);
        }
    }
    if (raw.empty()) throw SchemaError("load_csv: no data rows in " + path);

    FederatedDataset ds;
    ds.n_features = n_features;
    ds.n_classes = max_label + 1;
    ds.clients.resize(raw.size());
    for (size_t k = 0; k < raw.size(); ++k) {
        const auto& r = raw[k];
        if (r.x_train.empty() || r.x_test.empty())
            throw SchemaError("load_csv: client " + std::to_string(k) +
                              " is missing a train or test row (client ids must be contiguous)");
        auto& c = ds.clients[k];
        auto fill = [&](const std::vector<std::vector<double>>& src_x,
                        const std::vector<int>& src_y, Eigen::MatrixXd& x, Eigen::VectorXi& y) {
            x.resize(static_cast<int>(src_x.size()), n_features);
            y.resize(static_cast<int>(src_y.size()));
            for (size_t i = 0; i < src_x.size(); ++i) {
                for (int f = 0; f < n_features; ++f) x(static_cast<int>(i), f) = src_x[i][f];
                y(static_cast<int>(i)) = src_y[i];
            }
        };
        fill(r.x_train, r.y_train, c.x_train, c.y_train);
        fill(r.x_test, r.y_test, c.x_test, c.y_test);
        std::set<int> labels(r.y_train.begin(), r.y_train.end());
        labels.insert(r.y_test.begin(), r.y_test.end());
        c.label_set.assign(labels.begin(), labels.end());
    }
    ds.validate();
    return ds;
}

}  // namespace fedlap
