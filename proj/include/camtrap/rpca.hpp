#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "camtrap/image.hpp"

namespace camtrap {

inline constexpr double kDefaultTextureWeight = 0.45;

// Frame stack as an m x n matrix, one vectorized (row-major) frame per column.
struct DataMatrix {
    int width = 0;
    int height = 0;
    Eigen::MatrixXd values;
    double beta = kDefaultTextureWeight;
    std::vector<std::size_t> frame_ids;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Settings for the inexact augmented Lagrangian solver. Unset lambda and
// mu0 take the data-dependent defaults 1/sqrt(max(m,n)) and 1.25/sigma_1(M).
struct RpcaConfig {
    std::optional<double> lambda;
    std::optional<double> mu0;
    double rho = 1.5;
    double mu_max_factor = 1e7;
    double tol = 1e-7;
    int max_iter = 500;

    void validate() const;
};

struct RpcaResult {
    Eigen::MatrixXd low_rank;
    Eigen::MatrixXd sparse;
    int iterations = 0;
    double final_residual = 0.0;  // ||M - L - S||_F / ||M||_F
    double lambda = 0.0;

    bool converged(double tol) const { return final_residual <= tol; }
};

// Column j = beta * vec(lbp_map(frame_j)) + (1 - beta) * vec(frame_j).
DataMatrix build_data_matrix(std::span<const ImageGray> frames, double beta,
                             std::vector<std::size_t> frame_ids = {});

// Elementwise sign(x) * max(|x| - kappa, 0).
inline double soft_threshold(double x, double kappa) {
    return x > kappa ? x - kappa : (x < -kappa ? x + kappa : 0.0);
}
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& a, double kappa);

// Proximal operator of tau * nuclear norm: shrinks singular values by tau.
Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& a, double tau);

double default_rpca_lambda(Eigen::Index rows, Eigen::Index cols);

// Principal component pursuit: min ||L||_* + lambda ||S||_1 s.t. L + S = M.
// Returns the last iterate even when max_iter is hit.
RpcaResult solve_rpca(const Eigen::MatrixXd& m, const RpcaConfig& cfg = {});
inline RpcaResult solve_rpca(const DataMatrix& m, const RpcaConfig& cfg = {}) { return solve_rpca(m.values, cfg); }

// Binary mask per column of S: Otsu on |S| rescaled to [0,1], then morph_clean.
std::vector<ImageGray> foreground_masks(const Eigen::MatrixXd& sparse, int width, int height);
inline std::vector<ImageGray> foreground_masks(const RpcaResult& result, int width, int height) {
    return foreground_masks(result.sparse, width, height);
}

// Flat matrix file: magic "CTMATRX1", u64 rows, u64 cols, then rows*cols
// little-endian doubles in column-major order.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

}  // namespace camtrap
