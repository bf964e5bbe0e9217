#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "camtrap/features.hpp"

namespace camtrap {

// Coefficients at or below this magnitude count as zero.
inline constexpr double kLassoZeroThreshold = 1e-10;

struct LassoOptions {
    double tol = 1e-7;  // max coefficient change that ends coordinate descent
    int max_sweeps = 100000;
    // When non-null, receives the objective after every sweep.
    std::vector<double>* objective_trace = nullptr;
};

struct LassoPathPoint {
    double lambda = 0.0;
    double cv_mse = 0.0;
};

// One regression per class against one-hot targets, minimizing
//   (1/2N) ||y_k - b_k - X beta_k||^2 + lambda ||beta_k||_1.
struct LassoModel {
    Eigen::MatrixXd coefficients;  // p x K
    Eigen::VectorXd intercepts;    // K
    double lambda = 0.0;
    std::vector<LassoPathPoint> path;  // lambdas strictly decreasing

    // Equivalent constraint bound sum_j |beta_j| of each class regression.
    Eigen::VectorXd constraint_bound() const { return coefficients.cwiseAbs().colwise().sum().transpose(); }
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

struct FeatureSupport {
    std::vector<std::size_t> selected;  // sorted
    std::size_t total = 0;
    double sparsity = 0.0;  // percentage of features never selected
};

Eigen::MatrixXd one_hot(const std::vector<int>& y, std::size_t num_classes);

// Smallest penalty that zeroes every coefficient: max_{j,k} |x_j^T (y_k - mean y_k)| / N.
double lasso_lambda_max(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets);

// Summed objective over the K regressions.
double lasso_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, const LassoModel& model);

LassoModel lasso_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets, double lambda,
                     const LassoOptions& opts = {});
LassoModel lasso_fit(const FeatureMatrix& train, double lambda, const LassoOptions& opts = {});

// Geometric grid lambda_max .. lambda_max * 1e-3, warm started, scored by
// the mean one-hot MSE over stratified folds; refit on all rows at the best lambda.
LassoModel cv_select(const FeatureMatrix& train, int n_lambdas, int folds, std::uint64_t seed,
                     const LassoOptions& opts = {});

FeatureSupport select_support(const LassoModel& model);

// "<name> <sparsity with two decimals>", e.g. "MixtureNet 96.71".
std::string sparsity_row(std::string_view name, const FeatureSupport& support);

// Support file: "# sparsity <pct> lambda <value> p <dims>" then one index per line.
void save_support(const std::filesystem::path& path, const FeatureSupport& support, double lambda);
FeatureSupport load_support(const std::filesystem::path& path, double* lambda = nullptr);

}  // namespace camtrap
