#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "camtrap/features.hpp"

namespace camtrap {

struct MlpConfig {
    int tau = 10;  // units in each of the three hidden layers
    int epochs = 300;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

// p -> tau -> tau -> tau -> K; sigmoid hidden units, softmax output.
struct MlpModel {
    static constexpr std::size_t kLayers = 4;

    MlpConfig config;
    std::size_t num_classes = 0;
    std::array<Eigen::MatrixXd, kLayers> weights;  // layer l: out x in
    std::array<Eigen::VectorXd, kLayers> biases;

    std::size_t dims() const { return static_cast<std::size_t>(weights[0].cols()); }
};

struct MlpGradients {
    double loss = 0.0;  // mean cross-entropy over the batch
    std::array<Eigen::MatrixXd, MlpModel::kLayers> weights;
    std::array<Eigen::VectorXd, MlpModel::kLayers> biases;
};

// Glorot-uniform weights, zero biases.
MlpModel mlp_init(std::size_t dims, std::size_t num_classes, const MlpConfig& cfg);

// Class probabilities, one column per row of x (K x N).
Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& x);
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> y);
MlpGradients mlp_gradients(const MlpModel& model, const Eigen::MatrixXd& x, std::span<const int> y);

// Mini-batch momentum SGD on the cross-entropy; returns the final-epoch model.
MlpModel mlp_train(const FeatureMatrix& train, const MlpConfig& cfg);
std::vector<int> mlp_predict(const MlpModel& model, const Eigen::MatrixXd& x);

std::vector<int> default_mlp_widths();  // 1..100

struct MlpSearchResult {
    MlpConfig best;
    MlpModel model;
    std::vector<std::pair<int, double>> scores;  // (tau, validation accuracy)
};

// Trains one model per width; best validation accuracy wins, ties go to the
// smaller width.
MlpSearchResult mlp_width_search(const FeatureMatrix& train, const FeatureMatrix& val, std::span<const int> taus,
                                 const MlpConfig& base = {});

void write_mlp(std::ostream& out, const MlpModel& model);
MlpModel read_mlp(std::istream& in);

}  // namespace camtrap
