#include "camtrap/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "camtrap/error.hpp"
#include "camtrap/random.hpp"
#include "camtrap/rpca.hpp"

namespace camtrap {

Eigen::MatrixXd LassoModel::predict(const Eigen::MatrixXd& x) const {
    return (x * coefficients).rowwise() + intercepts.transpose();
}

Eigen::MatrixXd one_hot(const std::vector<int>& y, std::size_t num_classes) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(num_classes));
    for (std::size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i), y[i]) = 1.0;
    return t;
}

namespace {

// Centred copy of the problem; the intercepts fall out as
// mean(y_k) - mean(x)^T beta_k.
class CoordinateDescent {
public:
    CoordinateDescent(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets)
        : n_(static_cast<double>(x.rows())),
          x_mean_(x.colwise().mean().transpose()),
          y_mean_(targets.colwise().mean().transpose()),
          xc_(x.rowwise() - x_mean_.transpose()),
          yc_(targets.rowwise() - y_mean_.transpose()),
          col_scale_(xc_.colwise().squaredNorm().transpose() / n_) {
        if (x.rows() == 0) throw Error("lasso: no rows");
        if (x.rows() != targets.rows()) throw Error("lasso: target rows differ from feature rows");
        if (!x.allFinite() || !targets.allFinite()) throw Error("lasso: non-finite input");
    }

    double lambda_max() const { return (xc_.transpose() * yc_).cwiseAbs().maxCoeff() / n_; }

    // Solves in place, warm-starting from `beta` (p x K).
    void solve(double lambda, Eigen::MatrixXd& beta, const LassoOptions& opts) const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lasso: lambda must be finite and >= 0");
        const Eigen::Index p = xc_.cols();
        Eigen::MatrixXd resid = yc_ - xc_ * beta;
        int sweeps = 0;
        auto record = [&] {
            if (!opts.objective_trace) return;
            opts.objective_trace->push_back(0.5 * resid.squaredNorm() / n_ + lambda * beta.cwiseAbs().sum());
        };
        auto sweep = [&](Eigen::Index k, bool active_only) {
            double max_change = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double old = beta(j, k);
                if (active_only && old == 0.0) continue;
                const double z = col_scale_(j);
                if (z <= 0.0) {
                    beta(j, k) = 0.0;
                    continue;
                }
                const double rho = xc_.col(j).dot(resid.col(k)) / n_ + z * old;
                const double updated = soft_threshold(rho, lambda) / z;
                const double delta = updated - old;
                if (delta != 0.0) {
                    resid.col(k) -= delta * xc_.col(j);
                    beta(j, k) = updated;
                    max_change = std::max(max_change, std::abs(delta));
                }
            }
            ++sweeps;
            record();
            return max_change;
        };
        for (Eigen::Index k = 0; k < beta.cols(); ++k) {
            while (sweeps < opts.max_sweeps) {
                if (sweep(k, false) <= opts.tol) break;
                while (sweeps < opts.max_sweeps && sweep(k, true) > opts.tol) {
                }
            }
        }
        if (!beta.allFinite()) throw NumericalError("lasso: coefficients became non-finite", static_cast<std::size_t>(sweeps));
    }

    LassoModel model(const Eigen::MatrixXd& beta, double lambda) const {
        LassoModel m;
        m.coefficients = beta;
        m.intercepts = y_mean_ - beta.transpose() * x_mean_;
        m.lambda = lambda;
        return m;
    }

    Eigen::Index dims() const { return xc_.cols(); }
    Eigen::Index classes() const { return yc_.cols(); }

private:
    double n_;
    Eigen::VectorXd x_mean_;
    Eigen::VectorXd y_mean_;
    Eigen::MatrixXd xc_;
    Eigen::MatrixXd yc_;
    Eigen::VectorXd col_scale_;
};

std::vector<double> lambda_grid(double lambda_max, int n) {
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        grid[static_cast<std::size_t>(i)] = lambda_max * std::pow(1e-3, static_cast<double>(i) / (n - 1));
    }
    return grid;
}

}  // namespace

double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets) {
    return CoordinateDescent(x, targets).lambda_max();
}

double lasso_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, const LassoModel& model) {
    const Eigen::MatrixXd resid = targets - model.predict(x);
    return 0.5 * resid.squaredNorm() / static_cast<double>(x.rows()) + model.lambda * model.coefficients.cwiseAbs().sum();
}

LassoModel lasso_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, double lambda, const LassoOptions& opts) {
    const CoordinateDescent cd(x, targets);
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(cd.dims(), cd.classes());
    cd.solve(lambda, beta, opts);
    return cd.model(beta, lambda);
}

LassoModel lasso_fit(const FeatureMatrix& train, double lambda, const LassoOptions& opts) {
    train.validate();
    return lasso_fit(train.x, one_hot(train.y, train.num_classes), lambda, opts);
}

LassoModel cv_select(const FeatureMatrix& train, int n_lambdas, int folds, std::uint64_t seed, const LassoOptions& opts) {
    train.validate();
    if (n_lambdas < 2) throw Error("cv_select: need at least 2 lambdas");
    if (folds < 2) throw Error("cv_select: need at least 2 folds");
    const auto n = train.rows();
    if (n < static_cast<std::size_t>(folds)) throw Error("cv_select: fewer samples than folds");

    const Eigen::MatrixXd targets = one_hot(train.y, train.num_classes);
    const CoordinateDescent full(train.x, targets);
    const double lmax = full.lambda_max();
    if (!(lmax > 0.0)) throw Error("cv_select: targets are constant; nothing to select");
    const auto grid = lambda_grid(lmax, n_lambdas);

    // Stratified fold ids: each class is shuffled and dealt round-robin,
    // continuing the deal across classes.
    std::vector<int> fold_of(n, 0);
    {
        Rng rng(seed, "cv_select");
        std::vector<std::vector<std::size_t>> members(train.num_classes);
        for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(train.y[i])].push_back(i);
        int next = 0;
        for (auto& m : members) {
            rng.shuffle(m);
            for (auto i : m) {
                fold_of[i] = next;
                next = (next + 1) % folds;
            }
        }
    }

    LassoOptions inner = opts;
    inner.objective_trace = nullptr;
    std::vector<double> mse(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> fit_rows;
        std::vector<Eigen::Index> held_rows;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? held_rows : fit_rows).push_back(static_cast<Eigen::Index>(i));
        if (held_rows.empty() || fit_rows.empty()) continue;
        const Eigen::MatrixXd x_fit = train.x(fit_rows, Eigen::all);
        const Eigen::MatrixXd t_fit = targets(fit_rows, Eigen::all);
        const Eigen::MatrixXd x_held = train.x(held_rows, Eigen::all);
        const Eigen::MatrixXd t_held = targets(held_rows, Eigen::all);
        const CoordinateDescent cd(x_fit, t_fit);
        Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(cd.dims(), cd.classes());
        for (std::size_t l = 0; l < grid.size(); ++l) {
            cd.solve(grid[l], beta, inner);
            const Eigen::MatrixXd pred = cd.model(beta, grid[l]).predict(x_held);
            mse[l] += (t_held - pred).squaredNorm() / static_cast<double>(t_held.size());
        }
    }

    std::size_t best = 0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
        mse[l] /= folds;
        if (mse[l] < mse[best]) best = l;
    }

    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(full.dims(), full.classes());
    for (std::size_t l = 0; l < best; ++l) full.solve(grid[l], beta, inner);
    full.solve(grid[best], beta, opts);
    LassoModel model = full.model(beta, grid[best]);
    for (std::size_t l = 0; l < grid.size(); ++l) model.path.push_back({grid[l], mse[l]});
    return model;
}

FeatureSupport select_support(const LassoModel& model) {
    FeatureSupport s;
    s.total = static_cast<std::size_t>(model.coefficients.rows());
    for (Eigen::Index j = 0; j < model.coefficients.rows(); ++j) {
        if (model.coefficients.row(j).cwiseAbs().maxCoeff() > kLassoZeroThreshold) s.selected.push_back(static_cast<std::size_t>(j));
    }
    if (s.selected.empty()) throw Error("empty support; decrease lambda");
    s.sparsity = 100.0 * static_cast<double>(s.total - s.selected.size()) / static_cast<double>(s.total);
    return s;
}

std::string sparsity_row(std::string_view name, const FeatureSupport& support) {
    return fmt::format("{} {:.2f}", name, support.sparsity);
}

void save_support(const std::filesystem::path& path, const FeatureSupport& support, double lambda) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write support file " + path.string());
    out << fmt::format("# sparsity {} lambda {} p {}\n", support.sparsity, lambda, support.total);
    for (auto j : support.selected) out << j << '\n';
}

FeatureSupport load_support(const std::filesystem::path& path, double* lambda) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open support file " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string hash, k1, k2, k3;
    FeatureSupport s;
    double lam = 0.0;
    if (!(hs >> hash >> k1 >> s.sparsity >> k2 >> lam >> k3 >> s.total) || hash != "#" || k1 != "sparsity" ||
        k2 != "lambda" || k3 != "p") {
        throw ParseError("bad support header", 1);
    }
    if (lambda) *lambda = lam;
    std::size_t j = 0;
    std::size_t line = 1;
    std::string text;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        std::istringstream ls(text);
        if (!(ls >> j) || j >= s.total) throw ParseError("bad feature index", line);
        s.selected.push_back(j);
    }
    if (!std::is_sorted(s.selected.begin(), s.selected.end())) throw Error("support indices must be sorted");
    return s;
}

}  // namespace camtrap
