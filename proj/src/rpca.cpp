#include "camtrap/rpca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "camtrap/binary_io.hpp"
#include "camtrap/error.hpp"
#include "camtrap/imaging.hpp"

namespace camtrap {

void RpcaConfig::validate() const {
    if (lambda && !(*lambda > 0.0)) throw Error("rpca: lambda must be positive");
    if (mu0 && !(*mu0 > 0.0)) throw Error("rpca: mu0 must be positive");
    if (!(rho > 1.0)) throw Error("rpca: rho must exceed 1");
    if (!(mu_max_factor >= 1.0)) throw Error("rpca: mu_max_factor must be >= 1");
    if (!(tol > 0.0 && tol < 1.0)) throw Error("rpca: tol must lie in (0, 1)");
    if (max_iter < 1) throw Error("rpca: max_iter must be positive");
}

DataMatrix build_data_matrix(std::span<const ImageGray> frames, double beta, std::vector<std::size_t> frame_ids) {
    if (frames.size() < 2) throw Error("build_data_matrix: need at least 2 frames");
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error("build_data_matrix: beta must lie in [0, 1]");
    const int w = frames.front().width();
    const int h = frames.front().height();
    for (const auto& f : frames) {
        if (f.width() != w || f.height() != h) throw Error("build_data_matrix: frame dimensions differ");
    }
    if (frame_ids.empty()) {
        frame_ids.resize(frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) frame_ids[i] = i;
    }
    if (frame_ids.size() != frames.size()) throw Error("build_data_matrix: frame id count mismatch");

    DataMatrix dm;
    dm.width = w;
    dm.height = h;
    dm.beta = beta;
    dm.frame_ids = std::move(frame_ids);
    const auto m = static_cast<Eigen::Index>(w) * h;
    dm.values.resize(m, static_cast<Eigen::Index>(frames.size()));
    for (std::size_t j = 0; j < frames.size(); ++j) {
        const auto& raw = frames[j].data();
        auto col = dm.values.col(static_cast<Eigen::Index>(j));
        if (beta > 0.0) {
            const auto texture = lbp_map(frames[j]);
            for (Eigen::Index i = 0; i < m; ++i) {
                col(i) = beta * texture.data()[static_cast<std::size_t>(i)] + (1.0 - beta) * raw[static_cast<std::size_t>(i)];
            }
        } else {
            for (Eigen::Index i = 0; i < m; ++i) col(i) = raw[static_cast<std::size_t>(i)];
        }
    }
    return dm;
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& a, double kappa) {
    return a.unaryExpr([kappa](double x) { return soft_threshold(x, kappa); });
}

namespace {

struct Shrunk {
    Eigen::MatrixXd value;
    bool ok = true;
};

Shrunk svt_impl(const Eigen::MatrixXd& a, double tau) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) return {Eigen::MatrixXd(), false};
    const auto& s = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > tau) ++rank;
    Shrunk out;
    if (rank == 0) {
        out.value = Eigen::MatrixXd::Zero(a.rows(), a.cols());
        return out;
    }
    const Eigen::VectorXd shrunk = (s.head(rank).array() - tau).matrix();
    out.value = svd.matrixU().leftCols(rank) * shrunk.asDiagonal() * svd.matrixV().leftCols(rank).transpose();
    return out;
}

}  // namespace

Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& a, double tau) {
    auto r = svt_impl(a, tau);
    if (!r.ok) throw NumericalError("singular value decomposition failed", 0);
    return std::move(r.value);
}

double default_rpca_lambda(Eigen::Index rows, Eigen::Index cols) {
    return 1.0 / std::sqrt(static_cast<double>(std::max(rows, cols)));
}

RpcaResult solve_rpca(const Eigen::MatrixXd& m, const RpcaConfig& cfg) {
    cfg.validate();
    if (!m.allFinite()) throw NumericalError("rpca: non-finite input matrix", 0);

    RpcaResult result;
    result.lambda = cfg.lambda.value_or(default_rpca_lambda(m.rows(), m.cols()));
    result.low_rank = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    result.sparse = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    const double norm_m = m.norm();
    if (norm_m == 0.0) return result;

    Eigen::BDCSVD<Eigen::MatrixXd> top(m);
    if (top.info() != Eigen::Success) throw NumericalError("singular value decomposition failed", 0);
    const double sigma1 = top.singularValues()(0);
    const double dual_norm = std::max(sigma1, m.cwiseAbs().maxCoeff() / result.lambda);

    Eigen::MatrixXd y = m / dual_norm;
    double mu = cfg.mu0.value_or(1.25 / sigma1);
    const double mu_max = mu * cfg.mu_max_factor;
    auto& l = result.low_rank;
    auto& s = result.sparse;

    for (int it = 1; it <= cfg.max_iter; ++it) {
        auto shrunk = svt_impl(m - s + y / mu, 1.0 / mu);
        if (!shrunk.ok) throw NumericalError("singular value decomposition failed", static_cast<std::size_t>(it));
        l = std::move(shrunk.value);
        s = soft_threshold(m - l + y / mu, result.lambda / mu);
        const Eigen::MatrixXd z = m - l - s;
        y += mu * z;
        mu = std::min(cfg.rho * mu, mu_max);
        result.iterations = it;
        const double residual = z.norm() / norm_m;
        if (!std::isfinite(residual)) throw NumericalError("rpca: residual became non-finite", static_cast<std::size_t>(it));
        if (residual <= cfg.tol) break;
    }
    result.final_residual = (m - l - s).norm() / norm_m;
    return result;
}

std::vector<ImageGray> foreground_masks(const Eigen::MatrixXd& sparse, int width, int height) {
    if (sparse.rows() != static_cast<Eigen::Index>(width) * height) {
        throw Error("foreground_masks: geometry does not match matrix rows");
    }
    std::vector<ImageGray> masks;
    masks.reserve(static_cast<std::size_t>(sparse.cols()));
    for (Eigen::Index j = 0; j < sparse.cols(); ++j) {
        const Eigen::VectorXd a = sparse.col(j).cwiseAbs();
        const double peak = a.size() > 0 ? a.maxCoeff() : 0.0;
        ImageGray mag(width, height);
        if (peak > 0.0) {
            for (Eigen::Index i = 0; i < a.size(); ++i) mag.data()[static_cast<std::size_t>(i)] = a(i) / peak;
        }
        const double threshold = otsu_threshold(mag);
        ImageGray mask(width, height);
        for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = mag.data()[i] > threshold ? 1.0 : 0.0;
        masks.push_back(morph_clean(mask));
    }
    return masks;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write matrix " + path.string());
    binio::put_magic(out, "CTMATRX1");
    binio::put_u64(out, static_cast<std::uint64_t>(m.rows()));
    binio::put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) binio::put_f64(out, m(i, j));
    }
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open matrix " + path.string());
    binio::expect_magic(in, "CTMATRX1");
    const auto rows = binio::get_u64(in);
    const auto cols = binio::get_u64(in);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = binio::get_f64(in);
    }
    return m;
}

}  // namespace camtrap
