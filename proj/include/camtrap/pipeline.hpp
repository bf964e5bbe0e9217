#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "camtrap/core.hpp"
#include "camtrap/eval.hpp"
#include "camtrap/features.hpp"
#include "camtrap/image.hpp"
#include "camtrap/imaging.hpp"
#include "camtrap/lasso.hpp"
#include "camtrap/mlp.hpp"
#include "camtrap/regions.hpp"
#include "camtrap/rpca.hpp"
#include "camtrap/svm.hpp"

namespace camtrap {

enum class ExperimentMode { gt_only, gt_plus_fp, auto_plus_fp };
enum class ClassifierChoice { svm, ann, both };

std::string_view to_string(ExperimentMode mode);
ExperimentMode parse_mode(std::string_view text);
std::string_view to_string(ClassifierChoice choice);
ClassifierChoice parse_classifier(std::string_view text);

struct ExperimentSpec {
    ExperimentMode mode = ExperimentMode::gt_only;
    bool builtin_features = true;
    std::vector<std::filesystem::path> external_features;
    std::string extractor_name;  // table row name; empty means the extractor id
    ClassifierChoice classifier = ClassifierChoice::svm;
    bool lasso = false;  // adds LASSO-selected variants next to the raw ones
    std::optional<std::uint64_t> seed;  // falls back to the manifest seed

    double beta = kDefaultTextureWeight;
    ClaheParams clahe;
    RpcaConfig rpca;
    double min_area_fraction = kDefaultMinAreaFraction;

    double train_fraction = 0.7;
    double validation_fraction = 0.2;  // carved from train for the searches
    int lasso_lambdas = 20;
    int lasso_folds = 5;
    std::vector<double> svm_c{kSvmGridC.begin(), kSvmGridC.end()};
    std::vector<double> svm_gamma{kSvmGridGamma.begin(), kSvmGridGamma.end()};
    std::vector<int> mlp_taus = default_mlp_widths();
    MlpConfig mlp;  // tau and seed are overridden per run

    std::filesystem::path output_dir;

    void validate() const;
};

// Flat "key = value" text, '#' starts a comment.
std::map<std::string, std::string> parse_config(std::istream& in);
std::map<std::string, std::string> load_config(const std::filesystem::path& path);
// Unknown keys and malformed values raise Error naming the key.
void apply_config(ExperimentSpec& spec, const std::map<std::string, std::string>& values);

using FrameLoader = std::function<ImageColor(const SampleRecord&)>;
// Reads base_dir / image_path.
FrameLoader disk_loader(const DatasetManifest& manifest);

// CLAHE-enhanced frames parallel to manifest.records.
std::vector<ImageColor> enhance_frames(const DatasetManifest& manifest, const FrameLoader& load,
                                       const ClaheParams& params);

struct CameraSegmentation {
    std::string camera;
    std::vector<std::size_t> frame_ids;  // manifest record indices
    std::vector<ImageGray> masks;        // parallel to frame_ids
    int iterations = 0;
    double residual = 0.0;
};

// Texture/intensity data matrix of one camera, RPCA, and per-frame masks.
CameraSegmentation segment_camera(const DatasetManifest& manifest, std::span<const ImageColor> enhanced,
                                  const std::string& camera, double beta, const RpcaConfig& cfg = {});

// <dir>/masks/<camera>/frame_NNNN.png
std::filesystem::path mask_path(const std::filesystem::path& dir, const SampleRecord& record);
// Writes the masks of one camera plus rpca_<camera>.json with the solver stats.
void save_segmentation(const std::filesystem::path& dir, const DatasetManifest& manifest,
                       const CameraSegmentation& seg);

// Components, merging and IoU assignment of one frame's mask.
std::vector<Region> frame_regions(const ImageGray& mask, const DatasetManifest& manifest, std::size_t frame_id,
                                  double min_area_fraction = kDefaultMinAreaFraction);

enum class SplitRole { train, test, unused };

struct Sample {
    std::string id;
    std::size_t frame_id = 0;
    BoundingBox box;
    int label = 0;  // index into the experiment label set
    std::optional<double> iou;
    RegionSource source = RegionSource::ground_truth;
};

// gt_only drops the FP class; the other modes append it when missing.
LabelSet experiment_labels(ExperimentMode mode, const LabelSet& manifest_labels);

// gt_only: ground-truth boxes of animal frames. gt_plus_fp: the same plus
// automatic regions with IoU 0 as FP. auto_plus_fp: automatic regions with
// IoU > 0.5 (genus) or IoU 0 (FP); the rest are discarded.
std::vector<Sample> collect_samples(ExperimentMode mode, const DatasetManifest& manifest,
                                    std::span<const Region> automatic, const LabelSet& labels);

// Crop, resize to 64x64 and describe every sample; external feature files
// are looked up by sample id and appended after the built-in block.
FeatureMatrix extract_features(std::span<const Sample> samples, std::span<const ImageColor> enhanced,
                               const LabelSet& labels, bool builtin,
                               std::span<const std::filesystem::path> external = {});

// Balance every class down to the smallest one, then split the survivors
// stratified into train and test.
std::vector<SplitRole> assign_roles(std::span<const int> labels, std::size_t num_classes, std::uint64_t seed,
                                    double train_fraction);

// Cross-validated LASSO on the standardized training rows.
LassoModel select_features(const FeatureMatrix& train_standardized, const ExperimentSpec& spec, std::uint64_t seed);

struct ClassifierModel {
    std::string kind;  // "SVM" or "ANN"
    bool lasso = false;
    // Multiplies the standardized inputs. SVMs use 1/sqrt(p), which makes the
    // expected squared distance between two samples about 2, so the fixed
    // power-of-ten gamma grid spans local to near-linear kernels.
    double input_scale = 1.0;
    std::variant<SvmModel, MlpModel> model;

    std::string hyperparameters() const;
};

// Everything needed to classify raw (unstandardized) feature rows.
struct PipelineModel {
    StandardizationParams standardization;
    std::optional<FeatureSupport> support;
    double lambda = 0.0;
    std::vector<ClassifierModel> classifiers;

    std::vector<int> predict(std::size_t which, const Eigen::MatrixXd& raw) const;
};

// Standardize on train, optional LASSO selection, hyperparameter search on
// a stratified validation carve-out, then refit on all of train.
PipelineModel train_models(const FeatureMatrix& train_raw, const ExperimentSpec& spec, std::uint64_t seed);
std::vector<EvaluationReport> evaluate_models(const PipelineModel& model, const FeatureMatrix& test_raw,
                                              const LabelSet& labels, const std::string& extractor,
                                              std::uint64_t seed);

void write_pipeline_model(std::ostream& out, const PipelineModel& model);
PipelineModel read_pipeline_model(std::istream& in);
void save_pipeline_model(const std::filesystem::path& path, const PipelineModel& model);
PipelineModel load_pipeline_model(const std::filesystem::path& path);

struct ExperimentResult {
    LabelSet labels;
    std::uint64_t seed = 0;
    std::vector<Region> automatic_regions;
    std::vector<Sample> samples;
    std::vector<SplitRole> roles;  // parallel to samples
    std::size_t animal_frames = 0;    // frames with a ground-truth box
    std::size_t detected_frames = 0;  // of those, frames with a region of IoU > 0.5
    std::optional<FeatureSupport> support;
    std::vector<EvaluationReport> reports;
    std::string table;
    std::string sparsity_table;

    const EvaluationReport& primary() const { return reports.front(); }
};

// Full chain; every intermediate is written below spec.output_dir when it is
// set. Stage failures surface as StageError.
ExperimentResult run_experiment(const ExperimentSpec& spec, const DatasetManifest& manifest,
                                const FrameLoader& load = {});

// samples.jsonl: a {"label_set", "seed"} header line, then one object per
// sample with sample_id, frame_id, box, label, iou, source and split.
void write_samples(std::ostream& out, std::span<const Sample> samples, std::span<const SplitRole> roles,
                   const LabelSet& labels, std::uint64_t seed);

struct SampleTable {
    LabelSet labels;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;
    std::vector<SplitRole> roles;
};
SampleTable read_samples(std::istream& in);
SampleTable load_samples(const std::filesystem::path& path);

// Rows of `features` (matched by sample id) that play `role`, in sample order.
FeatureMatrix rows_with_role(const FeatureMatrix& features, const SampleTable& table, SplitRole role);

}  // namespace camtrap
