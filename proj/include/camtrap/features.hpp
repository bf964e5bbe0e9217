#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "camtrap/core.hpp"
#include "camtrap/image.hpp"

namespace camtrap {

// N x p design matrix; row i belongs to sample_ids[i] with class y[i].
struct FeatureMatrix {
    std::vector<std::string> sample_ids;
    Eigen::MatrixXd x;
    std::vector<int> y;
    std::size_t num_classes = 0;
    std::string extractor_id;

    std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(x.cols()); }

    // Throws on non-finite values, misaligned ids/labels, or labels >= num_classes.
    void validate() const;
    FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
    FeatureMatrix select_columns(std::span<const std::size_t> cols) const;
};

struct StandardizationParams {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // 1 for columns whose spread is below kMinStd

    static constexpr double kMinStd = 1e-8;

    FeatureMatrix apply(const FeatureMatrix& m) const;
    FeatureMatrix invert(const FeatureMatrix& m) const;
};

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dims() const = 0;
    virtual Eigen::VectorXd extract(const ImageColor& crop) const = 0;
};

// Hand-crafted descriptor for 64x64 crops (other sizes are resized first):
//   [0, 256)    histogram of 8-bit LBP codes over the grayscale crop's
//               interior pixels, one bin per code
//   [256, 304)  16-bin histograms of R, G and B
//   [304, 432)  4x4 cells x 8 gradient orientations, magnitude weighted
// The LBP block, each colour block and the gradient block are L1-normalized;
// a flat crop leaves the gradient block at zero.
class BuiltinExtractor final : public FeatureExtractor {
public:
    static constexpr int kCropSize = 64;
    static constexpr std::size_t kLbpBins = 256;
    static constexpr std::size_t kColorBins = 16;
    static constexpr std::size_t kGradientCells = 4;
    static constexpr std::size_t kOrientations = 8;
    static constexpr std::size_t kDims = kLbpBins + 3 * kColorBins + kGradientCells * kGradientCells * kOrientations;

    std::string id() const override { return "builtin"; }
    std::size_t dims() const override { return kDims; }
    Eigen::VectorXd extract(const ImageColor& crop) const override;
};

Eigen::VectorXd extract_builtin(const ImageColor& crop);

// Feature file: "#extractor_id p" header, then "sample_id v1 ... vp" per line.
void write_features(std::ostream& out, const FeatureMatrix& m);
void save_features(const std::filesystem::path& path, const FeatureMatrix& m);

// Reads a feature file; every sample id must appear in `ids`, whose class is
// taken from the parallel `labels`.
FeatureMatrix import_external(const std::filesystem::path& path, std::span<const std::string> ids,
                              std::span<const int> labels, std::size_t num_classes);
FeatureMatrix import_external(std::istream& in, std::span<const std::string> ids, std::span<const int> labels,
                              std::size_t num_classes);
// Manifest records are addressed as "camera_id/frame_index".
FeatureMatrix import_external(const std::filesystem::path& path, const DatasetManifest& manifest);

// Column-wise concatenation; rows must agree in sample id and label.
FeatureMatrix concat_features(std::span<const FeatureMatrix> parts);

StandardizationParams fit_standardization(const FeatureMatrix& train);
std::pair<FeatureMatrix, StandardizationParams> standardize(const FeatureMatrix& train,
                                                            const FeatureMatrix& apply_to);

}  // namespace camtrap
