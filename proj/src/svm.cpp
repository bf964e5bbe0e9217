#include "camtrap/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "camtrap/binary_io.hpp"
#include "camtrap/error.hpp"
#include "camtrap/parallel.hpp"

namespace camtrap {

void SvmConfig::validate() const {
    if (!(c > 0.0) || !(gamma > 0.0)) throw Error("svm: C and gamma must be positive");
}

std::vector<SvmConfig> svm_grid() {
    std::vector<SvmConfig> grid;
    for (double c : kSvmGridC) {
        for (double g : kSvmGridGamma) grid.push_back({c, g});
    }
    return grid;
}

BinarySvmSolution smo_solve(const Eigen::MatrixXd& kernel, std::span<const int> y, double c, double eps) {
    const auto n = static_cast<Eigen::Index>(y.size());
    if (kernel.rows() != n || kernel.cols() != n) throw Error("smo: kernel size mismatch");
    if (!(c > 0.0)) throw Error("smo: C must be positive");
    constexpr double kTau = 1e-12;
    const double inf = std::numeric_limits<double>::infinity();

    auto yi = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
    auto q = [&](Eigen::Index i, Eigen::Index j) { return yi(i) * yi(j) * kernel(i, j); };
    auto up = [&](Eigen::Index t, const Eigen::VectorXd& a) {
        return (yi(t) > 0 && a(t) < c) || (yi(t) < 0 && a(t) > 0);
    };
    auto low = [&](Eigen::Index t, const Eigen::VectorXd& a) {
        return (yi(t) > 0 && a(t) > 0) || (yi(t) < 0 && a(t) < c);
    };

    BinarySvmSolution sol;
    Eigen::VectorXd& a = sol.alpha;
    a = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
    const long max_iter = std::max<long>(10'000'000, 100L * n);

    for (long iter = 0; iter < max_iter; ++iter) {
        double gmax = -inf;
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (up(t, a) && -yi(t) * grad(t) >= gmax) {
                gmax = -yi(t) * grad(t);
                i = t;
            }
        }
        double gmax2 = -inf;
        double best_obj = inf;
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!low(t, a)) continue;
            gmax2 = std::max(gmax2, yi(t) * grad(t));
            if (i < 0) continue;
            const double b = gmax + yi(t) * grad(t);
            if (b > 0.0) {
                double curvature = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
                if (curvature <= 0.0) curvature = kTau;
                const double obj = -(b * b) / curvature;
                if (obj <= best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if (i < 0 || j < 0 || gmax + gmax2 < eps) break;
        sol.iterations = iter + 1;

        const double old_i = a(i);
        const double old_j = a(j);
        if (y[static_cast<std::size_t>(i)] != y[static_cast<std::size_t>(j)]) {
            double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = a(i) - a(j);
            a(i) += delta;
            a(j) += delta;
            if (diff > 0.0) {
                if (a(j) < 0.0) {
                    a(j) = 0.0;
                    a(i) = diff;
                }
            } else if (a(i) < 0.0) {
                a(i) = 0.0;
                a(j) = -diff;
            }
            if (diff > 0.0) {
                if (a(i) > c) {
                    a(i) = c;
                    a(j) = c - diff;
                }
            } else if (a(j) > c) {
                a(j) = c;
                a(i) = c + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = a(i) + a(j);
            a(i) -= delta;
            a(j) += delta;
            if (sum > c) {
                if (a(i) > c) {
                    a(i) = c;
                    a(j) = sum - c;
                }
            } else if (a(j) < 0.0) {
                a(j) = 0.0;
                a(i) = sum;
            }
            if (sum > c) {
                if (a(j) > c) {
                    a(j) = c;
                    a(i) = sum - c;
                }
            } else if (a(i) < 0.0) {
                a(i) = 0.0;
                a(j) = sum;
            }
        }
        const double di = a(i) - old_i;
        const double dj = a(j) - old_j;
        for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(t, i) * di + q(t, j) * dj;
    }

    // Offset from the free variables, or the middle of the feasible interval.
    double ub = inf;
    double lb = -inf;
    double free_sum = 0.0;
    int free_count = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = yi(t) * grad(t);
        if (a(t) >= c) {
            if (yi(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (a(t) <= 0.0) {
            if (yi(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
    sol.bias = -rho;
    sol.objective = 0.5 * a.dot(grad - Eigen::VectorXd::Ones(n));
    return sol;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd d = -2.0 * a * b.transpose();
    d.colwise() += na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0);
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
    return (-gamma * squared_distances(a, b)).array().exp().matrix();
}

namespace {

SvmModel train_with_distances(const FeatureMatrix& train, const SvmConfig& cfg, const Eigen::MatrixXd& dist) {
    cfg.validate();
    const std::size_t k = train.num_classes;
    std::vector<std::vector<Eigen::Index>> members(k);
    for (std::size_t i = 0; i < train.rows(); ++i) members[static_cast<std::size_t>(train.y[i])].push_back(static_cast<Eigen::Index>(i));
    std::size_t present = 0;
    for (const auto& m : members) present += m.empty() ? 0 : 1;
    if (present < 2) throw Error("svm_train: need samples from at least 2 classes");

    SvmModel model;
    model.config = cfg;
    model.num_classes = k;
    std::vector<Eigen::Index> sv_rows;                      // training rows kept as support vectors
    std::vector<long> sv_slot(train.rows(), -1);            // training row -> support_vectors row
    for (std::size_t p = 0; p < k; ++p) {
        for (std::size_t q = p + 1; q < k; ++q) {
            SvmPairModel pair;
            pair.positive = static_cast<int>(p);
            pair.negative = static_cast<int>(q);
            std::vector<Eigen::Index> rows = members[p];
            rows.insert(rows.end(), members[q].begin(), members[q].end());
            if (members[p].empty() || members[q].empty()) {
                // A missing class never wins this vote.
                pair.bias = members[p].empty() ? -1.0 : 1.0;
                model.pairs.push_back(std::move(pair));
                continue;
            }
            std::vector<int> y(rows.size());
            for (std::size_t t = 0; t < rows.size(); ++t) y[t] = t < members[p].size() ? 1 : -1;
            const Eigen::MatrixXd kern = (-cfg.gamma * dist(rows, rows)).array().exp().matrix();
            const auto sol = smo_solve(kern, y, cfg.c);
            pair.bias = sol.bias;
            pair.dual_objective = sol.objective;
            for (std::size_t t = 0; t < rows.size(); ++t) {
                const double a = sol.alpha(static_cast<Eigen::Index>(t));
                if (a <= 0.0) continue;
                const auto r = static_cast<std::size_t>(rows[t]);
                if (sv_slot[r] < 0) {
                    sv_slot[r] = static_cast<long>(sv_rows.size());
                    sv_rows.push_back(rows[t]);
                }
                pair.support.push_back(static_cast<std::size_t>(sv_slot[r]));
                pair.alpha.push_back(a);
                pair.sign.push_back(y[t]);
            }
            model.pairs.push_back(std::move(pair));
        }
    }
    model.support_vectors = train.x(sv_rows, Eigen::all);
    if (sv_rows.empty()) model.support_vectors.resize(0, train.x.cols());
    return model;
}

}  // namespace

SvmModel svm_train(const FeatureMatrix& train, const SvmConfig& cfg) {
    train.validate();
    return train_with_distances(train, cfg, squared_distances(train.x, train.x));
}

Eigen::MatrixXd svm_decision_values(const SvmModel& model, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.cols()) != model.dims()) throw Error("svm_predict: feature dimension mismatch");
    const Eigen::MatrixXd kern = rbf_kernel(x, model.support_vectors, model.config.gamma);
    Eigen::MatrixXd dec(x.rows(), static_cast<Eigen::Index>(model.pairs.size()));
    for (std::size_t p = 0; p < model.pairs.size(); ++p) {
        const auto& pair = model.pairs[p];
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            double f = pair.bias;
            for (std::size_t s = 0; s < pair.support.size(); ++s) {
                f += pair.alpha[s] * pair.sign[s] * kern(r, static_cast<Eigen::Index>(pair.support[s]));
            }
            dec(r, static_cast<Eigen::Index>(p)) = f;
        }
    }
    return dec;
}

std::vector<int> svm_predict(const SvmModel& model, const Eigen::MatrixXd& x) {
    const auto dec = svm_decision_values(model, x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    std::vector<int> votes(model.num_classes);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::fill(votes.begin(), votes.end(), 0);
        for (std::size_t p = 0; p < model.pairs.size(); ++p) {
            const auto& pair = model.pairs[p];
            ++votes[static_cast<std::size_t>(dec(r, static_cast<Eigen::Index>(p)) > 0.0 ? pair.positive : pair.negative)];
        }
        out[static_cast<std::size_t>(r)] = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    return out;
}

double accuracy_percent(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw Error("accuracy: length mismatch");
    if (truth.empty()) throw Error("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

SvmSearchResult svm_grid_search(const FeatureMatrix& train, const FeatureMatrix& val, std::span<const SvmConfig> grid) {
    if (val.rows() == 0) throw Error("svm_grid_search: empty validation set");
    train.validate();
    val.validate();
    const auto default_grid = svm_grid();
    if (grid.empty()) grid = default_grid;

    const Eigen::MatrixXd dist = squared_distances(train.x, train.x);
    std::vector<SvmGridPoint> points(grid.size());
    std::vector<SvmModel> models(grid.size());
    parallel_for(grid.size(), [&](std::size_t g) {
        models[g] = train_with_distances(train, grid[g], dist);
        points[g] = {grid[g], accuracy_percent(svm_predict(models[g], val.x), val.y)};
    });

    std::size_t best = 0;
    for (std::size_t g = 1; g < points.size(); ++g) {
        const auto& cur = points[g];
        const auto& top = points[best];
        const bool better =
            cur.validation_accuracy > top.validation_accuracy ||
            (cur.validation_accuracy == top.validation_accuracy &&
             (cur.config.c < top.config.c || (cur.config.c == top.config.c && cur.config.gamma < top.config.gamma)));
        if (better) best = g;
    }
    return {points[best].config, std::move(models[best]), std::move(points)};
}

void write_svm(std::ostream& out, const SvmModel& model) {
    binio::put_magic(out, "CTSVM");
    binio::put_u64(out, 1);  // version
    binio::put_f64(out, model.config.c);
    binio::put_f64(out, model.config.gamma);
    binio::put_u64(out, model.num_classes);
    binio::put_u64(out, static_cast<std::uint64_t>(model.support_vectors.rows()));
    binio::put_u64(out, static_cast<std::uint64_t>(model.support_vectors.cols()));
    for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
        for (Eigen::Index j = 0; j < model.support_vectors.cols(); ++j) binio::put_f64(out, model.support_vectors(i, j));
    }
    binio::put_u64(out, model.pairs.size());
    for (const auto& p : model.pairs) {
        binio::put_u64(out, static_cast<std::uint64_t>(p.positive));
        binio::put_u64(out, static_cast<std::uint64_t>(p.negative));
        binio::put_f64(out, p.bias);
        binio::put_f64(out, p.dual_objective);
        binio::put_u64(out, p.support.size());
        for (std::size_t s = 0; s < p.support.size(); ++s) {
            binio::put_u64(out, p.support[s]);
            binio::put_f64(out, p.alpha[s]);
            binio::put_u64(out, p.sign[s] > 0 ? 1 : 0);
        }
    }
}

SvmModel read_svm(std::istream& in) {
    binio::expect_magic(in, "CTSVM");
    if (binio::get_u64(in) != 1) throw Error("unsupported SVM model version");
    SvmModel m;
    m.config.c = binio::get_f64(in);
    m.config.gamma = binio::get_f64(in);
    m.num_classes = binio::get_u64(in);
    const auto rows = static_cast<Eigen::Index>(binio::get_u64(in));
    const auto cols = static_cast<Eigen::Index>(binio::get_u64(in));
    m.support_vectors.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m.support_vectors(i, j) = binio::get_f64(in);
    }
    const auto n_pairs = binio::get_u64(in);
    for (std::uint64_t k = 0; k < n_pairs; ++k) {
        SvmPairModel p;
        p.positive = static_cast<int>(binio::get_u64(in));
        p.negative = static_cast<int>(binio::get_u64(in));
        p.bias = binio::get_f64(in);
        p.dual_objective = binio::get_f64(in);
        const auto n_sv = binio::get_u64(in);
        for (std::uint64_t s = 0; s < n_sv; ++s) {
            const auto idx = binio::get_u64(in);
            if (static_cast<Eigen::Index>(idx) >= rows) throw Error("SVM model: support index out of range");
            p.support.push_back(idx);
            p.alpha.push_back(binio::get_f64(in));
            p.sign.push_back(binio::get_u64(in) ? 1 : -1);
        }
        m.pairs.push_back(std::move(p));
    }
    return m;
}

}  // namespace camtrap
