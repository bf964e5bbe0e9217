#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "camtrap/features.hpp"

namespace camtrap {

struct SvmConfig {
    double c = 1.0;
    double gamma = 1.0;

    void validate() const;
    friend bool operator==(const SvmConfig&, const SvmConfig&) = default;
};

// Power-of-ten search ranges for the margin parameter and the RBF width.
inline constexpr std::array<double, 7> kSvmGridC{1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4};
inline constexpr std::array<double, 6> kSvmGridGamma{1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
std::vector<SvmConfig> svm_grid();

// Solution of one binary dual
//   min 1/2 a^T Q a - e^T a,  0 <= a <= C,  y^T a = 0,  Q_ij = y_i y_j K_ij
// with decision function f(x) = sum_i a_i y_i K(x_i, x) + bias.
struct BinarySvmSolution {
    Eigen::VectorXd alpha;
    double bias = 0.0;
    double objective = 0.0;
    long iterations = 0;
};

inline constexpr double kSmoTolerance = 1e-5;

// Sequential minimal optimization with second-order working set selection;
// stops when the maximal KKT violation drops below `eps`.
BinarySvmSolution smo_solve(const Eigen::MatrixXd& kernel, std::span<const int> y, double c,
                            double eps = kSmoTolerance);

// One-vs-one binary model between classes `positive` (y=+1) and `negative`.
struct SvmPairModel {
    int positive = 0;
    int negative = 1;
    std::vector<std::size_t> support;  // rows of SvmModel::support_vectors
    std::vector<double> alpha;         // parallel to `support`, in [0, C]
    std::vector<int> sign;             // +1 / -1, parallel to `support`
    double bias = 0.0;
    double dual_objective = 0.0;
};

struct SvmModel {
    SvmConfig config;
    std::size_t num_classes = 0;
    Eigen::MatrixXd support_vectors;  // rows referenced by the pair models
    std::vector<SvmPairModel> pairs;  // (0,1), (0,2), ..., (K-2,K-1)

    std::size_t dims() const { return static_cast<std::size_t>(support_vectors.cols()); }
};

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

SvmModel svm_train(const FeatureMatrix& train, const SvmConfig& cfg);

// Decision value of every pair model for every row: rows x pairs.
Eigen::MatrixXd svm_decision_values(const SvmModel& model, const Eigen::MatrixXd& x);
// One-vs-one vote; a positive decision votes for `positive`, otherwise for
// `negative`. Ties go to the lowest class index.
std::vector<int> svm_predict(const SvmModel& model, const Eigen::MatrixXd& x);
inline std::vector<int> svm_predict(const SvmModel& model, const FeatureMatrix& x) { return svm_predict(model, x.x); }

double accuracy_percent(std::span<const int> predicted, std::span<const int> truth);

struct SvmGridPoint {
    SvmConfig config;
    double validation_accuracy = 0.0;
};

struct SvmSearchResult {
    SvmConfig best;
    SvmModel model;                  // trained on `train` with `best`
    std::vector<SvmGridPoint> grid;  // every evaluated pair, C-major order
};

// Evaluates all 42 grid pairs; the best validation accuracy wins, ties going
// to the smaller C, then the smaller gamma.
SvmSearchResult svm_grid_search(const FeatureMatrix& train, const FeatureMatrix& val,
                                std::span<const SvmConfig> grid = {});

void write_svm(std::ostream& out, const SvmModel& model);
SvmModel read_svm(std::istream& in);

}  // namespace camtrap
