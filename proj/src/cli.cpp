#include "camtrap/cli.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "camtrap/error.hpp"
#include "camtrap/image_io.hpp"
#include "camtrap/pipeline.hpp"
#include "camtrap/synthetic.hpp"

namespace camtrap {

namespace {

namespace fs = std::filesystem;

// Options that mirror config-file keys; only flags given on the command line
// are applied, on top of the --config file.
struct Overrides {
    std::map<std::string, std::string> values;
    std::vector<std::pair<CLI::Option*, std::string>> options;
    std::map<std::string, std::string> storage;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto* opt = app->add_option(flag, storage[key], help);
        options.emplace_back(opt, key);
    }
    void collect() {
        for (const auto& [opt, key] : options) {
            if (opt->count() > 0) values[key] = storage[key];
        }
    }
};

DatasetManifest read_manifest(const fs::path& path) { return load_manifest(path); }

FeatureMatrix load_feature_table(const fs::path& features, const SampleTable& table) {
    std::vector<std::string> ids;
    std::vector<int> y;
    for (const auto& s : table.samples) {
        ids.push_back(s.id);
        y.push_back(s.label);
    }
    return import_external(features, ids, y, table.labels.size());
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

void write_reports(const fs::path& dir, std::span<const EvaluationReport> reports) {
    fs::create_directories(dir);
    write_file(dir / "report.txt", table_report(reports));
    std::ofstream jl(dir / "report.jsonl", std::ios::binary);
    write_report_jsonl(jl, reports);
    for (const auto& r : reports) {
        std::ofstream csv(dir / fmt::format("confusion_{}_{}.csv", r.classifier == "SVM" ? "svm" : "ann",
                                            r.lasso ? "lasso" : "raw"),
                          std::ios::binary);
        write_confusion_csv(csv, r);
    }
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Camera-trap genus classification pipeline"};
    app.name("camtrap");
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    double beta = kDefaultTextureWeight;
    std::string config_path;
    auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream (default: manifest seed)");
    auto* beta_opt = app.add_option("--beta", beta, "Texture weight of the RPCA data matrix, in [0, 1]")
                         ->check(CLI::Range(0.0, 1.0));
    app.add_option("--config", config_path, "Flat key = value file overriding the defaults")
        ->check(CLI::ExistingFile);

    Overrides ov;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic camera-trap dataset");
    std::string synth_out;
    SyntheticConfig scfg;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--cameras", scfg.cameras, "Number of cameras");
    synth->add_option("--frames", scfg.frames_per_camera, "Frames per camera");
    synth->add_option("--width", scfg.width, "Frame width");
    synth->add_option("--height", scfg.height, "Frame height");
    synth->add_option("--p-animal", scfg.p_animal, "Probability that a frame holds an animal");
    synth->add_option("--genera", scfg.genera, "Genus names");
    synth->add_option("--jitter", scfg.illumination_jitter, "Illumination gain jitter");
    synth->add_option("--noise", scfg.noise_sigma, "Additive noise sigma");

    // segment
    auto* segment = app.add_subcommand("segment", "CLAHE, RPCA and foreground masks per camera");
    std::string manifest_path, out_path, camera;
    segment->add_option("--manifest", manifest_path, "Dataset manifest (JSON lines)")->check(CLI::ExistingFile)->required();
    segment->add_option("--camera", camera, "Only this camera (default: all)");
    segment->add_option("--out", out_path, "Output directory")->required();

    // regions
    auto* regions = app.add_subcommand("regions", "Boxes from masks, merged and labelled by IoU");
    std::string masks_dir;
    regions->add_option("--manifest", manifest_path, "Dataset manifest")->check(CLI::ExistingFile)->required();
    regions->add_option("--masks", masks_dir, "Directory written by 'segment'")->check(CLI::ExistingDirectory)->required();
    regions->add_option("--out", out_path, "Region file to write")->required();
    ov.add(regions, "--min-area", "min_area", "Minimum component area as a fraction of the frame");

    // extract
    auto* extract = app.add_subcommand("extract", "Crop samples, describe them and assign train/test roles");
    std::string regions_path;
    extract->add_option("--manifest", manifest_path, "Dataset manifest")->check(CLI::ExistingFile)->required();
    extract->add_option("--regions", regions_path, "Region file from 'regions' (FP modes)")->check(CLI::ExistingFile);
    extract->add_option("--out", out_path, "Output directory")->required();
    ov.add(extract, "--mode", "mode", "gt_only, gt_plus_fp or auto_plus_fp");
    ov.add(extract, "--external", "external", "Comma-separated external feature files");
    ov.add(extract, "--builtin", "builtin", "Use the built-in descriptor (true/false)");

    // select
    auto* select = app.add_subcommand("select", "Cross-validated LASSO feature selection");
    std::string features_path, samples_path;
    select->add_option("--features", features_path, "Feature file")->check(CLI::ExistingFile)->required();
    select->add_option("--samples", samples_path, "samples.jsonl from 'extract'")->check(CLI::ExistingFile)->required();
    select->add_option("--out", out_path, "Support file to write")->required();
    ov.add(select, "--lambdas", "lasso_lambdas", "Number of penalties on the path");
    ov.add(select, "--folds", "lasso_folds", "Cross-validation folds");
    ov.add(select, "--name", "extractor_name", "Row name of the sparsity table");

    // train
    auto* train = app.add_subcommand("train", "Standardize, select and fit the classifiers");
    train->add_option("--features", features_path, "Feature file")->check(CLI::ExistingFile)->required();
    train->add_option("--samples", samples_path, "samples.jsonl from 'extract'")->check(CLI::ExistingFile)->required();
    train->add_option("--out", out_path, "Model file to write")->required();

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a model on the test rows");
    std::string model_path;
    evaluate_cmd->add_option("--model", model_path, "Model file from 'train'")->check(CLI::ExistingFile)->required();
    evaluate_cmd->add_option("--features", features_path, "Feature file")->check(CLI::ExistingFile)->required();
    evaluate_cmd->add_option("--samples", samples_path, "samples.jsonl from 'extract'")->check(CLI::ExistingFile)->required();
    evaluate_cmd->add_option("--out", out_path, "Directory for report files");
    ov.add(evaluate_cmd, "--name", "extractor_name", "Row name of the result table");

    // run
    auto* run = app.add_subcommand("run", "Full experiment from manifest to report");
    run->add_option("--manifest", manifest_path, "Dataset manifest")->check(CLI::ExistingFile)->required();
    ov.add(run, "--out", "output", "Output directory for every intermediate");
    ov.add(run, "--mode", "mode", "gt_only, gt_plus_fp or auto_plus_fp");
    ov.add(run, "--external", "external", "Comma-separated external feature files");
    ov.add(run, "--builtin", "builtin", "Use the built-in descriptor (true/false)");
    ov.add(run, "--name", "extractor_name", "Row name of the result table");

    for (auto* sub : {train, run}) {
        ov.add(sub, "--classifier", "classifier", "svm, ann or both");
        ov.add(sub, "--lasso", "lasso", "Add LASSO-selected variants (true/false)");
        ov.add(sub, "--svm-c", "svm_c", "Comma-separated C values");
        ov.add(sub, "--svm-gamma", "svm_gamma", "Comma-separated gamma values");
        ov.add(sub, "--taus", "mlp_taus", "Hidden widths, e.g. 1-100 or 4,8,16");
        ov.add(sub, "--epochs", "mlp_epochs", "MLP epochs");
    }
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        const CLI::App* ctx = &app;
        for (const auto* s : app.get_subcommands()) ctx = s;
        err << "error: " << e.what() << "\n\n" << ctx->help();
        return kExitUsage;
    }

    ExperimentSpec spec;
    try {
        if (!config_path.empty()) apply_config(spec, load_config(config_path));
        ov.collect();
        apply_config(spec, ov.values);
        if (seed_opt->count() > 0) spec.seed = seed;
        if (beta_opt->count() > 0) spec.beta = beta;
        spec.validate();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (synth->parsed()) {
            const auto data = gen_synthetic(scfg, spec.seed.value_or(0));
            write_synthetic(synth_out, data);
            std::size_t animals = 0;
            for (const auto& r : data.manifest.records) animals += r.gt_box ? 1 : 0;
            out << fmt::format("wrote {} frames ({} with an animal) to {}\n", data.frames.size(), animals, synth_out);
        } else if (segment->parsed()) {
            auto manifest = read_manifest(manifest_path);
            if (!camera.empty()) {
                std::erase_if(manifest.records, [&](const SampleRecord& r) { return r.camera_id != camera; });
                if (manifest.records.empty()) throw Error("no frames for camera '" + camera + "'");
            }
            const auto enhanced = enhance_frames(manifest, disk_loader(manifest), spec.clahe);
            for (const auto& cam : manifest.camera_ids()) {
                const auto seg = segment_camera(manifest, enhanced, cam, spec.beta, spec.rpca);
                save_segmentation(out_path, manifest, seg);
                out << fmt::format("{}: {} frames, {} iterations, residual {:.3g}\n", cam, seg.frame_ids.size(),
                                   seg.iterations, seg.residual);
            }
        } else if (regions->parsed()) {
            const auto manifest = read_manifest(manifest_path);
            std::vector<Region> all;
            std::size_t animal = 0, detected = 0;
            for (std::size_t i = 0; i < manifest.records.size(); ++i) {
                const auto& rec = manifest.records[i];
                const auto path = mask_path(masks_dir, rec);
                if (!fs::exists(path)) throw StageError("regions", rec.sample_id(), "missing mask " + path.string());
                auto frame = frame_regions(read_image_gray(path), manifest, i, spec.min_area_fraction);
                bool hit = false;
                for (const auto& r : frame) hit = hit || (r.iou_vs_gt && *r.iou_vs_gt > kAnimalIouThreshold);
                if (rec.gt_box) {
                    ++animal;
                    detected += hit ? 1 : 0;
                }
                all.insert(all.end(), frame.begin(), frame.end());
            }
            if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
            save_regions(out_path, all, manifest);
            out << fmt::format("{} regions; {} of {} animal frames have a region with IoU > 0.5\n", all.size(),
                               detected, animal);
        } else if (extract->parsed()) {
            const auto manifest = read_manifest(manifest_path);
            const auto labels = experiment_labels(spec.mode, manifest.label_set);
            std::vector<Region> automatic;
            if (spec.mode != ExperimentMode::gt_only) {
                if (regions_path.empty()) throw Error("--regions is required for mode " + std::string(to_string(spec.mode)));
                automatic = load_regions(regions_path, manifest.label_set);
            }
            const auto samples = collect_samples(spec.mode, manifest, automatic, labels);
            if (samples.empty()) throw StageError("samples", std::string(to_string(spec.mode)), "no samples collected");
            const auto enhanced = enhance_frames(manifest, disk_loader(manifest), spec.clahe);
            const auto features =
                extract_features(samples, enhanced, labels, spec.builtin_features, spec.external_features);
            const auto run_seed = spec.seed.value_or(manifest.seed);
            const auto roles = assign_roles(features.y, labels.size(), run_seed, spec.train_fraction);
            fs::create_directories(out_path);
            save_features(fs::path(out_path) / "features.txt", features);
            std::ofstream s(fs::path(out_path) / "samples.jsonl", std::ios::binary);
            write_samples(s, samples, roles, labels, run_seed);
            out << fmt::format("{} samples x {} features written to {}\n", features.rows(), features.dims(), out_path);
        } else if (select->parsed()) {
            const auto table = load_samples(samples_path);
            const auto features = load_feature_table(features_path, table);
            const auto train_raw = rows_with_role(features, table, SplitRole::train);
            const auto train_std = fit_standardization(train_raw).apply(train_raw);
            const auto lasso = select_features(train_std, spec, spec.seed.value_or(table.seed));
            const auto support = select_support(lasso);
            save_support(out_path, support, lasso.lambda);
            const std::string name = spec.extractor_name.empty() ? features.extractor_id : spec.extractor_name;
            out << "Extractor Sparsity [%]\n" << sparsity_row(name, support) << '\n';
        } else if (train->parsed()) {
            const auto table = load_samples(samples_path);
            const auto features = load_feature_table(features_path, table);
            const auto model =
                train_models(rows_with_role(features, table, SplitRole::train), spec, spec.seed.value_or(table.seed));
            save_pipeline_model(out_path, model);
            for (const auto& c : model.classifiers) {
                out << fmt::format("{} {}: {}\n", c.kind, c.lasso ? "LASSO" : "raw", c.hyperparameters());
            }
        } else if (evaluate_cmd->parsed()) {
            const auto table = load_samples(samples_path);
            const auto features = load_feature_table(features_path, table);
            const auto model = load_pipeline_model(model_path);
            const std::string name = spec.extractor_name.empty() ? features.extractor_id : spec.extractor_name;
            const auto reports = evaluate_models(model, rows_with_role(features, table, SplitRole::test), table.labels,
                                                 name, spec.seed.value_or(table.seed));
            if (!out_path.empty()) write_reports(out_path, reports);
            out << table_report(reports);
        } else if (run->parsed()) {
            const auto manifest = read_manifest(manifest_path);
            const auto res = run_experiment(spec, manifest);
            if (spec.mode != ExperimentMode::gt_only) {
                out << fmt::format("{} of {} animal frames have a region with IoU > 0.5\n", res.detected_frames,
                                   res.animal_frames);
            }
            out << res.table << res.sparsity_table;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace camtrap
