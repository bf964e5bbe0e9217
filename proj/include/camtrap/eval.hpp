#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace camtrap {

struct EvaluationReport {
    double accuracy = 0.0;                            // percent
    std::vector<std::optional<double>> per_class;     // recall per class, absent when the class has no test sample
    double intra_class_std = 0.0;                     // population std of the present per-class values
    Eigen::MatrixXi confusion;                        // rows truth, columns prediction
    std::optional<double> sparsity;                   // percent of features removed by LASSO

    std::vector<std::string> class_names;
    std::string extractor_id;
    std::string classifier;  // "SVM" or "ANN"
    bool lasso = false;
    std::string hyperparameters;
    std::uint64_t seed = 0;

    std::size_t total() const { return static_cast<std::size_t>(confusion.sum()); }
};

// Throws on length mismatch or labels outside [0, K).
EvaluationReport evaluate(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes);

// Plain-text table: one row per extractor id (first-seen order), columns
// ANN / SVM x raw / LASSO, the best accuracy wrapped in ** **. A sparsity
// column is added when any report carries one.
std::string table_report(std::span<const EvaluationReport> reports);

// One JSON object per report.
void write_report_jsonl(std::ostream& out, std::span<const EvaluationReport> reports);
std::vector<EvaluationReport> read_report_jsonl(std::istream& in);

// Header row of predicted class names, then one row per true class.
void write_confusion_csv(std::ostream& out, const EvaluationReport& report);

}  // namespace camtrap
