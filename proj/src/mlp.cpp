#include "camtrap/mlp.hpp"

#include <cmath>
#include <numeric>

#include "camtrap/binary_io.hpp"
#include "camtrap/error.hpp"
#include "camtrap/parallel.hpp"
#include "camtrap/random.hpp"
#include "camtrap/svm.hpp"

namespace camtrap {

void MlpConfig::validate() const {
    if (tau < 1) throw Error("mlp: tau must be >= 1");
    if (epochs < 0) throw Error("mlp: epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw Error("mlp: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("mlp: momentum must lie in [0, 1)");
    if (batch_size < 1) throw Error("mlp: batch size must be >= 1");
}

MlpModel mlp_init(std::size_t dims, std::size_t num_classes, const MlpConfig& cfg) {
    cfg.validate();
    if (dims == 0 || num_classes < 2) throw Error("mlp: need features and at least 2 classes");
    MlpModel m;
    m.config = cfg;
    m.num_classes = num_classes;
    const auto tau = static_cast<Eigen::Index>(cfg.tau);
    const std::array<Eigen::Index, MlpModel::kLayers + 1> sizes{static_cast<Eigen::Index>(dims), tau, tau, tau,
                                                                 static_cast<Eigen::Index>(num_classes)};
    Rng rng(cfg.seed, "mlp_init");
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        const auto fan_in = sizes[l];
        const auto fan_out = sizes[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        m.weights[l].resize(fan_out, fan_in);
        for (Eigen::Index j = 0; j < fan_in; ++j) {
            for (Eigen::Index i = 0; i < fan_out; ++i) m.weights[l](i, j) = rng.uniform(-limit, limit);
        }
        m.biases[l] = Eigen::VectorXd::Zero(fan_out);
    }
    return m;
}

namespace {

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void softmax_inplace(Eigen::MatrixXd& z) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        auto col = z.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
    }
}

// Activations of every layer; acts[0] is the input (p x N), acts[4] the probabilities.
std::array<Eigen::MatrixXd, MlpModel::kLayers + 1> forward_all(const MlpModel& m, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.cols()) != m.dims()) throw Error("mlp: feature dimension mismatch");
    std::array<Eigen::MatrixXd, MlpModel::kLayers + 1> acts;
    acts[0] = x.transpose();
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        Eigen::MatrixXd z = (m.weights[l] * acts[l]).colwise() + m.biases[l];
        if (l + 1 < MlpModel::kLayers) {
            acts[l + 1] = sigmoid(z);
        } else {
            softmax_inplace(z);
            acts[l + 1] = std::move(z);
        }
    }
    return acts;
}

double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> y) {
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        loss -= std::log(std::max(probs(y[i], static_cast<Eigen::Index>(i)), std::numeric_limits<double>::min()));
    }
    return loss / static_cast<double>(y.size());
}

void check_labels(const MlpModel& m, const Eigen::MatrixXd& x, std::span<const int> y) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw Error("mlp: label count mismatch");
    if (y.empty()) throw Error("mlp: empty batch");
    for (int v : y) {
        if (v < 0 || static_cast<std::size_t>(v) >= m.num_classes) throw Error("mlp: label out of range");
    }
}

}  // namespace

Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& x) {
    return std::move(forward_all(model, x)[MlpModel::kLayers]);
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> y) {
    check_labels(model, x, y);
    return cross_entropy(mlp_forward(model, x), y);
}

MlpGradients mlp_gradients(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> y) {
    check_labels(model, x, y);
    const auto acts = forward_all(model, x);
    MlpGradients g;
    g.loss = cross_entropy(acts[MlpModel::kLayers], y);

    Eigen::MatrixXd delta = acts[MlpModel::kLayers];
    for (std::size_t i = 0; i < y.size(); ++i) delta(y[i], static_cast<Eigen::Index>(i)) -= 1.0;
    delta /= static_cast<double>(y.size());
    for (std::size_t l = MlpModel::kLayers; l-- > 0;) {
        g.weights[l] = delta * acts[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l == 0) break;
        const Eigen::MatrixXd back = model.weights[l].transpose() * delta;
        delta = (back.array() * acts[l].array() * (1.0 - acts[l].array())).matrix();
    }
    return g;
}

MlpModel mlp_train(const FeatureMatrix& train, const MlpConfig& cfg) {
    train.validate();
    MlpModel m = mlp_init(train.dims(), train.num_classes, cfg);
    const auto n = train.rows();
    if (n == 0) throw Error("mlp_train: empty training set");

    std::array<Eigen::MatrixXd, MlpModel::kLayers> vw;
    std::array<Eigen::VectorXd, MlpModel::kLayers> vb;
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        vw[l] = Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols());
        vb[l] = Eigen::VectorXd::Zero(m.biases[l].size());
    }
    Rng rng(cfg.seed, "mlp_shuffle");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<Eigen::Index> batch_rows;
    std::vector<int> batch_y;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const auto stop = std::min(n, start + batch);
            batch_rows.clear();
            batch_y.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch_rows.push_back(static_cast<Eigen::Index>(order[i]));
                batch_y.push_back(train.y[order[i]]);
            }
            const Eigen::MatrixXd xb = train.x(batch_rows, Eigen::all);
            const auto g = mlp_gradients(m, xb, batch_y);
            if (!std::isfinite(g.loss)) throw NumericalError("mlp_train: non-finite loss", static_cast<std::size_t>(epoch));
            for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
                vw[l] = cfg.momentum * vw[l] - cfg.learning_rate * g.weights[l];
                vb[l] = cfg.momentum * vb[l] - cfg.learning_rate * g.biases[l];
                m.weights[l] += vw[l];
                m.biases[l] += vb[l];
            }
        }
    }
    return m;
}

std::vector<int> mlp_predict(const MlpModel& model, const Eigen::MatrixXd& x) {
    const auto probs = mlp_forward(model, x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < probs.cols(); ++i) {
        Eigen::Index best = 0;
        probs.col(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

std::vector<int> default_mlp_widths() {
    std::vector<int> taus(100);
    std::iota(taus.begin(), taus.end(), 1);
    return taus;
}

MlpSearchResult mlp_width_search(const FeatureMatrix& train, const FeatureMatrix& val, std::span<const int> taus,
                                 const MlpConfig& base) {
    if (taus.empty()) throw Error("mlp_width_search: no widths given");
    if (val.rows() == 0) throw Error("mlp_width_search: empty validation set");
    for (int t : taus) {
        if (t < 1) throw Error("mlp_width_search: widths must be >= 1");
    }
    std::vector<MlpModel> models(taus.size());
    std::vector<double> acc(taus.size());
    parallel_for(taus.size(), [&](std::size_t i) {
        MlpConfig cfg = base;
        cfg.tau = taus[i];
        models[i] = mlp_train(train, cfg);
        acc[i] = accuracy_percent(mlp_predict(models[i], val.x), val.y);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < taus.size(); ++i) {
        if (acc[i] > acc[best] || (acc[i] == acc[best] && taus[i] < taus[best])) best = i;
    }
    MlpSearchResult r;
    r.best = models[best].config;
    r.model = std::move(models[best]);
    for (std::size_t i = 0; i < taus.size(); ++i) r.scores.emplace_back(taus[i], acc[i]);
    return r;
}

void write_mlp(std::ostream& out, const MlpModel& model) {
    binio::put_magic(out, "CTMLP");
    binio::put_u64(out, 1);
    const auto& c = model.config;
    binio::put_u64(out, static_cast<std::uint64_t>(c.tau));
    binio::put_u64(out, static_cast<std::uint64_t>(c.epochs));
    binio::put_f64(out, c.learning_rate);
    binio::put_f64(out, c.momentum);
    binio::put_u64(out, static_cast<std::uint64_t>(c.batch_size));
    binio::put_u64(out, c.seed);
    binio::put_u64(out, model.num_classes);
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        const auto& w = model.weights[l];
        binio::put_u64(out, static_cast<std::uint64_t>(w.rows()));
        binio::put_u64(out, static_cast<std::uint64_t>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) binio::put_f64(out, w(i, j));
        }
        for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) binio::put_f64(out, model.biases[l](i));
    }
}

MlpModel read_mlp(std::istream& in) {
    binio::expect_magic(in, "CTMLP");
    if (binio::get_u64(in) != 1) throw Error("unsupported MLP model version");
    MlpModel m;
    auto& c = m.config;
    c.tau = static_cast<int>(binio::get_u64(in));
    c.epochs = static_cast<int>(binio::get_u64(in));
    c.learning_rate = binio::get_f64(in);
    c.momentum = binio::get_f64(in);
    c.batch_size = static_cast<int>(binio::get_u64(in));
    c.seed = binio::get_u64(in);
    m.num_classes = binio::get_u64(in);
    for (std::size_t l = 0; l < MlpModel::kLayers; ++l) {
        const auto rows = static_cast<Eigen::Index>(binio::get_u64(in));
        const auto cols = static_cast<Eigen::Index>(binio::get_u64(in));
        m.weights[l].resize(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            for (Eigen::Index i = 0; i < rows; ++i) m.weights[l](i, j) = binio::get_f64(in);
        }
        m.biases[l].resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) m.biases[l](i) = binio::get_f64(in);
    }
    return m;
}

}  // namespace camtrap
