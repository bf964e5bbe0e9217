#include "camtrap/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "camtrap/binary_io.hpp"
#include "camtrap/error.hpp"
#include "camtrap/image_io.hpp"
#include "camtrap/parallel.hpp"
#include "camtrap/random.hpp"

namespace camtrap {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(ExperimentMode mode) {
    switch (mode) {
        case ExperimentMode::gt_only: return "gt_only";
        case ExperimentMode::gt_plus_fp: return "gt_plus_fp";
        case ExperimentMode::auto_plus_fp: return "auto_plus_fp";
    }
    return "?";
}

ExperimentMode parse_mode(std::string_view text) {
    if (text == "gt_only") return ExperimentMode::gt_only;
    if (text == "gt_plus_fp") return ExperimentMode::gt_plus_fp;
    if (text == "auto_plus_fp") return ExperimentMode::auto_plus_fp;
    throw Error(fmt::format("unknown mode '{}' (expected gt_only, gt_plus_fp or auto_plus_fp)", text));
}

std::string_view to_string(ClassifierChoice choice) {
    switch (choice) {
        case ClassifierChoice::svm: return "svm";
        case ClassifierChoice::ann: return "ann";
        case ClassifierChoice::both: return "both";
    }
    return "?";
}

ClassifierChoice parse_classifier(std::string_view text) {
    if (text == "svm") return ClassifierChoice::svm;
    if (text == "ann" || text == "mlp") return ClassifierChoice::ann;
    if (text == "both") return ClassifierChoice::both;
    throw Error(fmt::format("unknown classifier '{}' (expected svm, ann or both)", text));
}

void ExperimentSpec::validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw Error("beta must lie in [0, 1]");
    if (!builtin_features && external_features.empty()) throw Error("no feature extractor selected");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("train_fraction must lie in (0, 1)");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw Error("validation_fraction must lie in (0, 1)");
    }
    if (lasso_lambdas < 2) throw Error("lasso_lambdas must be >= 2");
    if (lasso_folds < 2) throw Error("lasso_folds must be >= 2");
    if (svm_c.empty() || svm_gamma.empty()) throw Error("empty SVM grid");
    for (double v : svm_c) {
        if (!(v > 0.0)) throw Error("svm_c values must be positive");
    }
    for (double v : svm_gamma) {
        if (!(v > 0.0)) throw Error("svm_gamma values must be positive");
    }
    if (mlp_taus.empty()) throw Error("empty mlp_taus");
    for (int t : mlp_taus) {
        if (t < 1) throw Error("mlp_taus values must be >= 1");
    }
    mlp.validate();
    rpca.validate();
}

// ---------------------------------------------------------------- config

std::map<std::string, std::string> parse_config(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", line_no);
        out[key] = value;
    }
    return out;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    return parse_config(in);
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        const auto e = item.find_last_not_of(" \t");
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(fmt::format("config key '{}': malformed value '{}'", key, text));
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "off" || text == "no") return false;
    throw Error(fmt::format("config key '{}': expected a boolean, got '{}'", key, text));
}

// "1-5, 8" -> 1 2 3 4 5 8
std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
    std::vector<int> out;
    for (const auto& item : split_list(text)) {
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(parse_number<int>(key, item));
            continue;
        }
        const int lo = parse_number<int>(key, item.substr(0, dash));
        const int hi = parse_number<int>(key, item.substr(dash + 1));
        if (hi < lo) throw Error(fmt::format("config key '{}': empty range '{}'", key, item));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) out.push_back(parse_number<double>(key, item));
    return out;
}

}  // namespace

void apply_config(ExperimentSpec& spec, const std::map<std::string, std::string>& values) {
    for (const auto& [key, value] : values) {
        if (key == "mode") spec.mode = parse_mode(value);
        else if (key == "classifier") spec.classifier = parse_classifier(value);
        else if (key == "lasso") spec.lasso = parse_bool(key, value);
        else if (key == "builtin") spec.builtin_features = parse_bool(key, value);
        else if (key == "external") {
            spec.external_features.clear();
            for (const auto& p : split_list(value)) spec.external_features.emplace_back(p);
        }
        else if (key == "extractor_name") spec.extractor_name = value;
        else if (key == "seed") spec.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "beta") spec.beta = parse_number<double>(key, value);
        else if (key == "clahe_tiles_x") spec.clahe.tiles_x = parse_number<int>(key, value);
        else if (key == "clahe_tiles_y") spec.clahe.tiles_y = parse_number<int>(key, value);
        else if (key == "clahe_clip") spec.clahe.clip_limit = parse_number<double>(key, value);
        else if (key == "rpca_tol") spec.rpca.tol = parse_number<double>(key, value);
        else if (key == "rpca_max_iter") spec.rpca.max_iter = parse_number<int>(key, value);
        else if (key == "rpca_lambda") spec.rpca.lambda = parse_number<double>(key, value);
        else if (key == "min_area") spec.min_area_fraction = parse_number<double>(key, value);
        else if (key == "train_fraction") spec.train_fraction = parse_number<double>(key, value);
        else if (key == "validation_fraction") spec.validation_fraction = parse_number<double>(key, value);
        else if (key == "lasso_lambdas") spec.lasso_lambdas = parse_number<int>(key, value);
        else if (key == "lasso_folds") spec.lasso_folds = parse_number<int>(key, value);
        else if (key == "svm_c") spec.svm_c = parse_double_list(key, value);
        else if (key == "svm_gamma") spec.svm_gamma = parse_double_list(key, value);
        else if (key == "mlp_taus") spec.mlp_taus = parse_int_list(key, value);
        else if (key == "mlp_epochs") spec.mlp.epochs = parse_number<int>(key, value);
        else if (key == "mlp_learning_rate") spec.mlp.learning_rate = parse_number<double>(key, value);
        else if (key == "mlp_momentum") spec.mlp.momentum = parse_number<double>(key, value);
        else if (key == "mlp_batch_size") spec.mlp.batch_size = parse_number<int>(key, value);
        else if (key == "output") spec.output_dir = value;
        else throw Error(fmt::format("unknown config key '{}'", key));
    }
}

// ---------------------------------------------------------------- stages

namespace {

// Runs fn, converting library failures into StageError with context.
template <class Fn>
auto in_stage(const std::string& stage, const std::string& context, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, context, e.what());
    }
}

}  // namespace

FrameLoader disk_loader(const DatasetManifest& manifest) {
    return [base = manifest.base_dir](const SampleRecord& r) { return read_image(base / r.image_path); };
}

std::vector<ImageColor> enhance_frames(const DatasetManifest& manifest, const FrameLoader& load,
                                       const ClaheParams& params) {
    std::vector<ImageColor> out(manifest.records.size());
    parallel_for(out.size(), [&](std::size_t i) {
        const auto& rec = manifest.records[i];
        out[i] = in_stage("clahe", rec.sample_id(), [&] { return clahe_color(load(rec), params); });
    });
    return out;
}

CameraSegmentation segment_camera(const DatasetManifest& manifest, std::span<const ImageColor> enhanced,
                                  const std::string& camera, double beta, const RpcaConfig& cfg) {
    if (enhanced.size() != manifest.records.size()) throw Error("segment_camera: frame count mismatch");
    CameraSegmentation seg;
    seg.camera = camera;
    std::vector<ImageGray> gray;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (manifest.records[i].camera_id != camera) continue;
        seg.frame_ids.push_back(i);
        gray.push_back(to_grayscale(enhanced[i]));
    }
    if (gray.empty()) throw StageError("rpca", camera, "camera has no frames");
    const int w = gray.front().width();
    const int h = gray.front().height();
    for (std::size_t k = 0; k < gray.size(); ++k) {
        if (gray[k].width() != w || gray[k].height() != h) {
            throw StageError("rpca", manifest.records[seg.frame_ids[k]].sample_id(), "frame size differs within camera");
        }
    }
    const auto data = in_stage("rpca", camera, [&] { return build_data_matrix(gray, beta, seg.frame_ids); });
    const auto result = in_stage("rpca", camera, [&] { return solve_rpca(data, cfg); });
    seg.iterations = result.iterations;
    seg.residual = result.final_residual;
    seg.masks = in_stage("masks", camera, [&] { return foreground_masks(result, w, h); });
    return seg;
}

std::filesystem::path mask_path(const std::filesystem::path& dir, const SampleRecord& record) {
    return dir / "masks" / record.camera_id / fmt::format("frame_{:04d}.png", record.frame_index);
}

void save_segmentation(const std::filesystem::path& dir, const DatasetManifest& manifest,
                       const CameraSegmentation& seg) {
    for (std::size_t k = 0; k < seg.frame_ids.size(); ++k) {
        const auto path = mask_path(dir, manifest.records.at(seg.frame_ids[k]));
        std::filesystem::create_directories(path.parent_path());
        write_mask_png(path, seg.masks[k]);
    }
    ordered_json j;
    j["camera"] = seg.camera;
    j["frames"] = seg.frame_ids.size();
    j["iterations"] = seg.iterations;
    j["residual"] = seg.residual;
    std::ofstream out(dir / fmt::format("rpca_{}.json", seg.camera), std::ios::binary);
    if (!out) throw Error("cannot write segmentation stats to " + dir.string());
    out << j.dump() << '\n';
}

std::vector<Region> frame_regions(const ImageGray& mask, const DatasetManifest& manifest, std::size_t frame_id,
                                  double min_area_fraction) {
    const auto& rec = manifest.records.at(frame_id);
    const auto fp = manifest.label_set.false_positive();
    if (!fp) throw StageError("regions", rec.sample_id(), "manifest label set has no FP class");
    return in_stage("regions", rec.sample_id(), [&] {
        const auto boxes = merge_rois(connected_components(mask, min_area_fraction));
        std::vector<Region> regions;
        for (const auto& b : boxes) {
            Region r;
            r.box = b;
            r.frame_id = frame_id;
            r.source = RegionSource::automatic;
            regions.push_back(r);
        }
        return assign_regions(std::move(regions), rec, frame_id, *fp);
    });
}

LabelSet experiment_labels(ExperimentMode mode, const LabelSet& manifest_labels) {
    return mode == ExperimentMode::gt_only ? manifest_labels.without_false_positive()
                                           : manifest_labels.with_false_positive();
}

std::vector<Sample> collect_samples(ExperimentMode mode, const DatasetManifest& manifest,
                                    std::span<const Region> automatic, const LabelSet& labels) {
    std::vector<Sample> out;
    if (mode != ExperimentMode::auto_plus_fp) {
        for (std::size_t i = 0; i < manifest.records.size(); ++i) {
            const auto& rec = manifest.records[i];
            if (!rec.gt_box || rec.label.is_false_positive()) continue;
            Sample s;
            s.id = rec.sample_id();
            s.frame_id = i;
            s.box = *rec.gt_box;
            s.label = labels.at(rec.label.name).index;
            s.iou = 1.0;
            s.source = RegionSource::ground_truth;
            out.push_back(std::move(s));
        }
        if (mode == ExperimentMode::gt_only) return out;
    }
    std::unordered_map<std::size_t, int> per_frame;
    for (const auto& r : automatic) {
        const int k = per_frame[r.frame_id]++;
        if (!r.assigned) continue;
        const bool is_fp = r.assigned->is_false_positive();
        if (is_fp && !(r.iou_vs_gt && *r.iou_vs_gt == 0.0)) continue;
        if (!is_fp && !(r.iou_vs_gt && *r.iou_vs_gt > kAnimalIouThreshold)) continue;
        if (mode == ExperimentMode::gt_plus_fp && !is_fp) continue;
        Sample s;
        s.id = fmt::format("{}#{}", manifest.records.at(r.frame_id).sample_id(), k);
        s.frame_id = r.frame_id;
        s.box = r.box;
        s.label = labels.at(r.assigned->name).index;
        s.iou = r.iou_vs_gt;
        s.source = RegionSource::automatic;
        out.push_back(std::move(s));
    }
    return out;
}

FeatureMatrix extract_features(std::span<const Sample> samples, std::span<const ImageColor> enhanced,
                               const LabelSet& labels, bool builtin,
                               std::span<const std::filesystem::path> external) {
    std::vector<std::string> ids;
    std::vector<int> y;
    for (const auto& s : samples) {
        ids.push_back(s.id);
        y.push_back(s.label);
    }
    std::vector<FeatureMatrix> parts;
    if (builtin) {
        FeatureMatrix m;
        m.sample_ids = ids;
        m.y = y;
        m.num_classes = labels.size();
        m.extractor_id = BuiltinExtractor().id();
        m.x.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(BuiltinExtractor::kDims));
        parallel_for(samples.size(), [&](std::size_t i) {
            const auto& s = samples[i];
            const auto v = in_stage("extract", s.id, [&] {
                if (s.frame_id >= enhanced.size()) throw Error("frame index out of range");
                return extract_builtin(crop_resize(enhanced[s.frame_id], s.box, BuiltinExtractor::kCropSize));
            });
            m.x.row(static_cast<Eigen::Index>(i)) = v.transpose();
        });
        parts.push_back(std::move(m));
    }
    for (const auto& path : external) {
        auto imported = in_stage("extract", path.string(), [&] { return import_external(path, ids, y, labels.size()); });
        std::unordered_map<std::string, Eigen::Index> row_of;
        for (std::size_t i = 0; i < imported.sample_ids.size(); ++i) {
            row_of.emplace(imported.sample_ids[i], static_cast<Eigen::Index>(i));
        }
        std::vector<Eigen::Index> order;
        for (const auto& id : ids) {
            const auto it = row_of.find(id);
            if (it == row_of.end()) throw StageError("extract", id, "missing from " + path.string());
            order.push_back(it->second);
        }
        FeatureMatrix aligned;
        aligned.sample_ids = ids;
        aligned.y = y;
        aligned.num_classes = labels.size();
        aligned.extractor_id = imported.extractor_id;
        aligned.x = imported.x(order, Eigen::all);
        parts.push_back(std::move(aligned));
    }
    if (parts.empty()) throw Error("extract_features: no extractor selected");
    return parts.size() == 1 ? std::move(parts.front()) : concat_features(parts);
}

// ---------------------------------------------------------------- models

std::vector<SplitRole> assign_roles(std::span<const int> labels, std::size_t num_classes, std::uint64_t seed,
                                    double train_fraction) {
    const auto kept = in_stage("balance", "samples", [&] { return balance_indices(labels, num_classes, seed); });
    std::vector<int> kept_labels;
    for (auto i : kept) kept_labels.push_back(labels[i]);
    const auto split = in_stage("split", "samples",
                                [&] { return stratified_split(kept_labels, num_classes, train_fraction, seed); });
    std::vector<SplitRole> roles(labels.size(), SplitRole::unused);
    for (auto k : split.train_ids) roles[kept[k]] = SplitRole::train;
    for (auto k : split.test_ids) roles[kept[k]] = SplitRole::test;
    return roles;
}

LassoModel select_features(const FeatureMatrix& train_standardized, const ExperimentSpec& spec, std::uint64_t seed) {
    return in_stage("lasso", train_standardized.extractor_id, [&] {
        return cv_select(train_standardized, spec.lasso_lambdas, spec.lasso_folds, derive_seed(seed, "lasso_cv"));
    });
}

std::string ClassifierModel::hyperparameters() const {
    if (const auto* svm = std::get_if<SvmModel>(&model)) {
        return fmt::format("C={} gamma={}", svm->config.c, svm->config.gamma);
    }
    const auto& mlp = std::get<MlpModel>(model).config;
    return fmt::format("tau={} epochs={} lr={} momentum={} batch={}", mlp.tau, mlp.epochs, mlp.learning_rate,
                       mlp.momentum, mlp.batch_size);
}

std::vector<int> PipelineModel::predict(std::size_t which, const Eigen::MatrixXd& raw) const {
    const auto& clf = classifiers.at(which);
    if (raw.cols() != standardization.mean.size()) throw Error("predict: feature dimension mismatch");
    Eigen::MatrixXd z = (raw.rowwise() - standardization.mean.transpose()).array().rowwise() /
                        standardization.std.transpose().array();
    if (clf.lasso) {
        if (!support) throw Error("predict: LASSO classifier without a support");
        std::vector<Eigen::Index> cols(support->selected.begin(), support->selected.end());
        z = Eigen::MatrixXd(z(Eigen::all, cols));
    }
    z *= clf.input_scale;
    if (const auto* svm = std::get_if<SvmModel>(&clf.model)) return svm_predict(*svm, z);
    return mlp_predict(std::get<MlpModel>(clf.model), z);
}

PipelineModel train_models(const FeatureMatrix& train_raw, const ExperimentSpec& spec, std::uint64_t seed) {
    spec.validate();
    train_raw.validate();
    PipelineModel out;
    out.standardization = fit_standardization(train_raw);
    const FeatureMatrix train = out.standardization.apply(train_raw);

    std::vector<std::pair<bool, FeatureMatrix>> variants;
    variants.emplace_back(false, train);
    if (spec.lasso) {
        const auto lasso = select_features(train, spec, seed);
        out.support = in_stage("lasso", train.extractor_id, [&] { return select_support(lasso); });
        out.lambda = lasso.lambda;
        variants.emplace_back(true, train.select_columns(out.support->selected));
    }

    const auto carve = in_stage("validation_split", train.extractor_id, [&] {
        return stratified_split(train.y, train.num_classes, 1.0 - spec.validation_fraction, seed, "validation_split");
    });

    std::vector<SvmConfig> grid;
    for (double c : spec.svm_c) {
        for (double g : spec.svm_gamma) grid.push_back({c, g});
    }
    const bool want_svm = spec.classifier != ClassifierChoice::ann;
    const bool want_ann = spec.classifier != ClassifierChoice::svm;

    for (const auto& [lasso, data] : variants) {
        const auto sub = data.select_rows(carve.train_ids);
        const auto val = data.select_rows(carve.test_ids);
        const std::string ctx = lasso ? "lasso" : "raw";
        if (want_svm) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(data.dims()));
            auto scaled = [scale](FeatureMatrix m) {
                m.x *= scale;
                return m;
            };
            auto model = in_stage("svm", ctx, [&] {
                const auto search = svm_grid_search(scaled(sub), scaled(val), grid);
                return svm_train(scaled(data), search.best);
            });
            out.classifiers.push_back({"SVM", lasso, scale, std::move(model)});
        }
        if (want_ann) {
            auto model = in_stage("ann", ctx, [&] {
                MlpConfig base = spec.mlp;
                base.seed = derive_seed(seed, "mlp");
                const auto search = mlp_width_search(sub, val, spec.mlp_taus, base);
                return mlp_train(data, search.best);
            });
            out.classifiers.push_back({"ANN", lasso, 1.0, std::move(model)});
        }
    }
    // SVM before ANN, raw before LASSO.
    std::stable_sort(out.classifiers.begin(), out.classifiers.end(),
                     [](const ClassifierModel& a, const ClassifierModel& b) { return a.kind > b.kind; });
    return out;
}

std::vector<EvaluationReport> evaluate_models(const PipelineModel& model, const FeatureMatrix& test_raw,
                                              const LabelSet& labels, const std::string& extractor,
                                              std::uint64_t seed) {
    std::vector<EvaluationReport> reports;
    for (std::size_t i = 0; i < model.classifiers.size(); ++i) {
        const auto& clf = model.classifiers[i];
        const auto pred = model.predict(i, test_raw.x);
        auto r = evaluate(pred, test_raw.y, labels.size());
        r.class_names = labels.names();
        r.extractor_id = extractor;
        r.classifier = clf.kind;
        r.lasso = clf.lasso;
        r.hyperparameters = clf.hyperparameters();
        r.seed = seed;
        if (clf.lasso && model.support) r.sparsity = model.support->sparsity;
        reports.push_back(std::move(r));
    }
    return reports;
}

void write_pipeline_model(std::ostream& out, const PipelineModel& model) {
    binio::put_magic(out, "CTPIPE");
    binio::put_u64(out, 1);
    const auto p = static_cast<std::uint64_t>(model.standardization.mean.size());
    binio::put_u64(out, p);
    for (Eigen::Index j = 0; j < model.standardization.mean.size(); ++j) binio::put_f64(out, model.standardization.mean(j));
    for (Eigen::Index j = 0; j < model.standardization.std.size(); ++j) binio::put_f64(out, model.standardization.std(j));
    binio::put_u64(out, model.support ? 1 : 0);
    if (model.support) {
        binio::put_u64(out, model.support->total);
        binio::put_f64(out, model.support->sparsity);
        binio::put_f64(out, model.lambda);
        binio::put_u64(out, model.support->selected.size());
        for (auto j : model.support->selected) binio::put_u64(out, j);
    }
    binio::put_u64(out, model.classifiers.size());
    for (const auto& clf : model.classifiers) {
        binio::put_string(out, clf.kind);
        binio::put_u64(out, clf.lasso ? 1 : 0);
        binio::put_f64(out, clf.input_scale);
        if (const auto* svm = std::get_if<SvmModel>(&clf.model)) {
            write_svm(out, *svm);
        } else {
            write_mlp(out, std::get<MlpModel>(clf.model));
        }
    }
}

PipelineModel read_pipeline_model(std::istream& in) {
    binio::expect_magic(in, "CTPIPE");
    if (binio::get_u64(in) != 1) throw Error("unsupported pipeline model version");
    PipelineModel m;
    const auto p = static_cast<Eigen::Index>(binio::get_u64(in));
    m.standardization.mean.resize(p);
    m.standardization.std.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) m.standardization.mean(j) = binio::get_f64(in);
    for (Eigen::Index j = 0; j < p; ++j) m.standardization.std(j) = binio::get_f64(in);
    if (binio::get_u64(in) == 1) {
        FeatureSupport s;
        s.total = binio::get_u64(in);
        s.sparsity = binio::get_f64(in);
        m.lambda = binio::get_f64(in);
        const auto n = binio::get_u64(in);
        for (std::uint64_t i = 0; i < n; ++i) s.selected.push_back(binio::get_u64(in));
        m.support = std::move(s);
    }
    const auto count = binio::get_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        ClassifierModel clf;
        clf.kind = binio::get_string(in);
        clf.lasso = binio::get_u64(in) == 1;
        clf.input_scale = binio::get_f64(in);
        if (clf.kind == "SVM") {
            clf.model = read_svm(in);
        } else if (clf.kind == "ANN") {
            clf.model = read_mlp(in);
        } else {
            throw Error("unknown classifier kind '" + clf.kind + "' in model file");
        }
        m.classifiers.push_back(std::move(clf));
    }
    return m;
}

void save_pipeline_model(const std::filesystem::path& path, const PipelineModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model " + path.string());
    write_pipeline_model(out, model);
}

PipelineModel load_pipeline_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open model " + path.string());
    return read_pipeline_model(in);
}

// ---------------------------------------------------------------- samples file

namespace {

std::string_view role_name(SplitRole r) {
    switch (r) {
        case SplitRole::train: return "train";
        case SplitRole::test: return "test";
        case SplitRole::unused: return "unused";
    }
    return "?";
}

SplitRole parse_role(const std::string& s) {
    if (s == "train") return SplitRole::train;
    if (s == "test") return SplitRole::test;
    if (s == "unused") return SplitRole::unused;
    throw Error("unknown split '" + s + "'");
}

}  // namespace

void write_samples(std::ostream& out, std::span<const Sample> samples, std::span<const SplitRole> roles,
                   const LabelSet& labels, std::uint64_t seed) {
    if (samples.size() != roles.size()) throw Error("write_samples: roles and samples differ in length");
    ordered_json header;
    header["label_set"] = labels.names();
    header["seed"] = seed;
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        ordered_json j;
        j["sample_id"] = s.id;
        j["frame_id"] = s.frame_id;
        j["x"] = s.box.x;
        j["y"] = s.box.y;
        j["w"] = s.box.w;
        j["h"] = s.box.h;
        j["label"] = labels[static_cast<std::size_t>(s.label)].name;
        j["iou"] = s.iou ? ordered_json(*s.iou) : ordered_json(nullptr);
        j["source"] = s.source == RegionSource::automatic ? "automatic" : "ground_truth";
        j["split"] = role_name(roles[i]);
        out << j.dump() << '\n';
    }
}

SampleTable read_samples(std::istream& in) {
    SampleTable t;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = ordered_json::parse(line);
            if (!header) {
                t.labels = LabelSet(j.at("label_set").get<std::vector<std::string>>());
                t.seed = j.at("seed").get<std::uint64_t>();
                header = true;
                continue;
            }
            Sample s;
            s.id = j.at("sample_id").get<std::string>();
            s.frame_id = j.at("frame_id").get<std::size_t>();
            s.box = {j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
            s.label = t.labels.at(j.at("label").get<std::string>()).index;
            if (!j.at("iou").is_null()) s.iou = j.at("iou").get<double>();
            s.source = j.at("source").get<std::string>() == "automatic" ? RegionSource::automatic
                                                                         : RegionSource::ground_truth;
            t.roles.push_back(parse_role(j.at("split").get<std::string>()));
            t.samples.push_back(std::move(s));
        } catch (const ordered_json::exception& e) {
            throw ParseError(e.what(), line_no);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (!header) throw ParseError("missing header line", line_no + 1);
    return t;
}

SampleTable load_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open samples " + path.string());
    return read_samples(in);
}

FeatureMatrix rows_with_role(const FeatureMatrix& features, const SampleTable& table, SplitRole role) {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < features.sample_ids.size(); ++i) row_of.emplace(features.sample_ids[i], i);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < table.samples.size(); ++i) {
        if (table.roles[i] != role) continue;
        const auto it = row_of.find(table.samples[i].id);
        if (it == row_of.end()) throw Error("no feature row for sample " + table.samples[i].id);
        rows.push_back(it->second);
    }
    return features.select_rows(rows);
}

// ---------------------------------------------------------------- experiment

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const DatasetManifest& input, const FrameLoader& load) {
    spec.validate();
    DatasetManifest manifest = input;
    manifest.canonicalize();
    ExperimentResult res;
    res.seed = spec.seed.value_or(manifest.seed);
    res.labels = experiment_labels(spec.mode, manifest.label_set);
    const bool dump = !spec.output_dir.empty();
    const auto& dir = spec.output_dir;
    if (dump) std::filesystem::create_directories(dir);

    const FrameLoader loader = load ? load : disk_loader(manifest);
    const auto enhanced = enhance_frames(manifest, loader, spec.clahe);

    for (const auto& rec : manifest.records) {
        if (rec.gt_box) ++res.animal_frames;
    }

    if (spec.mode != ExperimentMode::gt_only) {
        if (!manifest.label_set.false_positive()) {
            throw StageError("regions", "manifest", "FP modes need an FP class in the manifest label set");
        }
        const auto cameras = manifest.camera_ids();
        std::vector<CameraSegmentation> segs(cameras.size());
        parallel_for(cameras.size(), [&](std::size_t c) {
            segs[c] = segment_camera(manifest, enhanced, cameras[c], spec.beta, spec.rpca);
        });
        std::vector<std::vector<Region>> per_frame(manifest.records.size());
        for (const auto& seg : segs) {
            for (std::size_t k = 0; k < seg.frame_ids.size(); ++k) {
                const auto id = seg.frame_ids[k];
                per_frame[id] = frame_regions(seg.masks[k], manifest, id, spec.min_area_fraction);
            }
            if (dump) save_segmentation(dir, manifest, seg);
        }
        for (std::size_t i = 0; i < per_frame.size(); ++i) {
            bool detected = false;
            for (auto& r : per_frame[i]) {
                if (r.iou_vs_gt && *r.iou_vs_gt > kAnimalIouThreshold) detected = true;
                res.automatic_regions.push_back(std::move(r));
            }
            if (detected && manifest.records[i].gt_box) ++res.detected_frames;
        }
        if (dump) save_regions(dir / "regions.jsonl", res.automatic_regions, manifest);
    }

    const std::string mode_name(to_string(spec.mode));
    res.samples = collect_samples(spec.mode, manifest, res.automatic_regions, res.labels);
    if (res.samples.empty()) throw StageError("samples", mode_name, "no samples collected");

    auto features = extract_features(res.samples, enhanced, res.labels, spec.builtin_features, spec.external_features);
    const std::string extractor = spec.extractor_name.empty() ? features.extractor_id : spec.extractor_name;
    if (dump) save_features(dir / "features.txt", features);

    res.roles = assign_roles(features.y, res.labels.size(), res.seed, spec.train_fraction);
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < res.roles.size(); ++i) {
        if (res.roles[i] == SplitRole::train) train_rows.push_back(i);
        if (res.roles[i] == SplitRole::test) test_rows.push_back(i);
    }
    if (dump) {
        std::ofstream out(dir / "samples.jsonl", std::ios::binary);
        write_samples(out, res.samples, res.roles, res.labels, res.seed);
    }

    const auto train_raw = features.select_rows(train_rows);
    const auto test_raw = features.select_rows(test_rows);
    const auto model = train_models(train_raw, spec, res.seed);
    res.support = model.support;
    res.reports = in_stage("evaluate", extractor, [&] { return evaluate_models(model, test_raw, res.labels, extractor, res.seed); });
    res.table = table_report(res.reports);
    if (res.support) {
        res.sparsity_table = "Extractor Sparsity [%]\n" + sparsity_row(extractor, *res.support) + "\n";
    }

    if (dump) {
        save_pipeline_model(dir / "model.bin", model);
        if (res.support) {
            save_support(dir / "support.txt", *res.support, model.lambda);
            write_text(dir / "sparsity.txt", res.sparsity_table);
        }
        write_text(dir / "report.txt", res.table);
        std::ofstream jl(dir / "report.jsonl", std::ios::binary);
        write_report_jsonl(jl, res.reports);
        for (const auto& r : res.reports) {
            std::ofstream csv(dir / fmt::format("confusion_{}_{}.csv", r.classifier == "SVM" ? "svm" : "ann",
                                                r.lasso ? "lasso" : "raw"),
                              std::ios::binary);
            write_confusion_csv(csv, r);
        }
    }
    return res;
}

}  // namespace camtrap
