#include "camtrap/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <json.hpp>

#include "camtrap/error.hpp"

namespace camtrap {

using ordered_json = nlohmann::ordered_json;

EvaluationReport evaluate(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes) {
    if (predicted.size() != truth.size()) {
        throw Error(fmt::format("evaluate: {} predictions for {} labels", predicted.size(), truth.size()));
    }
    if (num_classes == 0) throw Error("evaluate: no classes");
    const auto k = static_cast<int>(num_classes);
    EvaluationReport r;
    r.confusion = Eigen::MatrixXi::Zero(k, k);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k) {
            throw Error(fmt::format("evaluate: label out of range at position {}", i));
        }
        ++r.confusion(truth[i], predicted[i]);
    }
    const auto n = truth.size();
    r.accuracy = n == 0 ? 0.0 : 100.0 * r.confusion.trace() / static_cast<double>(n);

    r.per_class.resize(num_classes);
    std::vector<double> present;
    for (int c = 0; c < k; ++c) {
        const int count = r.confusion.row(c).sum();
        if (count == 0) continue;
        const double v = 100.0 * r.confusion(c, c) / count;
        r.per_class[static_cast<std::size_t>(c)] = v;
        present.push_back(v);
    }
    if (!present.empty()) {
        double mean = 0.0;
        for (double v : present) mean += v;
        mean /= static_cast<double>(present.size());
        double var = 0.0;
        for (double v : present) var += (v - mean) * (v - mean);
        r.intra_class_std = std::sqrt(var / static_cast<double>(present.size()));
    }
    return r;
}

namespace {

struct TableRow {
    std::string extractor;
    // ANN raw, ANN LASSO, SVM raw, SVM LASSO
    std::array<std::optional<double>, 4> cells;
    std::optional<double> sparsity;
};

int cell_index(const EvaluationReport& r) {
    const int base = r.classifier == "ANN" ? 0 : (r.classifier == "SVM" ? 2 : -1);
    if (base < 0) throw Error("table_report: unknown classifier '" + r.classifier + "'");
    return base + (r.lasso ? 1 : 0);
}

double rounded(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

std::string table_report(std::span<const EvaluationReport> reports) {
    std::vector<TableRow> rows;
    bool any_sparsity = false;
    for (const auto& r : reports) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const TableRow& t) { return t.extractor == r.extractor_id; });
        if (it == rows.end()) {
            rows.push_back({r.extractor_id, {}, {}});
            it = rows.end() - 1;
        }
        it->cells[static_cast<std::size_t>(cell_index(r))] = r.accuracy;
        if (r.sparsity && !it->sparsity) it->sparsity = r.sparsity;
        any_sparsity = any_sparsity || r.sparsity.has_value();
    }

    std::optional<double> best;
    for (const auto& row : rows) {
        for (const auto& c : row.cells) {
            if (c && (!best || rounded(*c) > *best)) best = rounded(*c);
        }
    }

    std::vector<std::string> header{"Extractor", "ANN Accuracy [%]", "ANN Accuracy LASSO [%]", "SVM Accuracy [%]",
                                    "SVM Accuracy LASSO [%]"};
    if (any_sparsity) header.emplace_back("Sparsity [%]");
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        std::vector<std::string> line{row.extractor};
        for (const auto& c : row.cells) {
            if (!c) {
                line.emplace_back("-");
            } else if (best && rounded(*c) == *best) {
                line.push_back(fmt::format("**{:.2f}**", *c));
            } else {
                line.push_back(fmt::format("{:.2f}", *c));
            }
        }
        if (any_sparsity) line.push_back(row.sparsity ? fmt::format("{:.2f}", *row.sparsity) : "-");
        cells.push_back(std::move(line));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t j = 0; j < header.size(); ++j) {
        width[j] = header[j].size();
        for (const auto& line : cells) width[j] = std::max(width[j], line[j].size());
    }
    std::string out;
    auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t j = 0; j < line.size(); ++j) {
            if (j > 0) out += " | ";
            out += fmt::format("{:<{}}", line[j], j + 1 == line.size() ? 0 : width[j]);
        }
        out += '\n';
    };
    emit(header);
    std::vector<std::string> rule;
    for (auto w : width) rule.emplace_back(w, '-');
    emit(rule);
    for (const auto& line : cells) emit(line);
    return out;
}

void write_report_jsonl(std::ostream& out, std::span<const EvaluationReport> reports) {
    for (const auto& r : reports) {
        ordered_json j;
        j["extractor_id"] = r.extractor_id;
        j["classifier"] = r.classifier;
        j["lasso"] = r.lasso;
        j["hyperparameters"] = r.hyperparameters;
        j["seed"] = r.seed;
        j["accuracy"] = r.accuracy;
        j["intra_class_std"] = r.intra_class_std;
        j["sparsity"] = r.sparsity ? ordered_json(*r.sparsity) : ordered_json(nullptr);
        j["class_names"] = r.class_names;
        auto per_class = ordered_json::array();
        for (const auto& v : r.per_class) per_class.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
        j["per_class_accuracy"] = per_class;
        auto conf = ordered_json::array();
        for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
            auto row = ordered_json::array();
            for (Eigen::Index c = 0; c < r.confusion.cols(); ++c) row.push_back(r.confusion(i, c));
            conf.push_back(row);
        }
        j["confusion"] = conf;
        out << j.dump() << '\n';
    }
}

std::vector<EvaluationReport> read_report_jsonl(std::istream& in) {
    std::vector<EvaluationReport> reports;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = ordered_json::parse(line);
            EvaluationReport r;
            r.extractor_id = j.at("extractor_id").get<std::string>();
            r.classifier = j.at("classifier").get<std::string>();
            r.lasso = j.at("lasso").get<bool>();
            r.hyperparameters = j.at("hyperparameters").get<std::string>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.accuracy = j.at("accuracy").get<double>();
            r.intra_class_std = j.at("intra_class_std").get<double>();
            if (!j.at("sparsity").is_null()) r.sparsity = j.at("sparsity").get<double>();
            r.class_names = j.at("class_names").get<std::vector<std::string>>();
            for (const auto& v : j.at("per_class_accuracy")) {
                r.per_class.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
            }
            const auto& conf = j.at("confusion");
            const auto k = static_cast<Eigen::Index>(conf.size());
            r.confusion = Eigen::MatrixXi::Zero(k, k);
            for (Eigen::Index i = 0; i < k; ++i) {
                const auto& row = conf[static_cast<std::size_t>(i)];
                if (static_cast<Eigen::Index>(row.size()) != k) throw Error("confusion matrix is not square");
                for (Eigen::Index c = 0; c < k; ++c) r.confusion(i, c) = row[static_cast<std::size_t>(c)].get<int>();
            }
            reports.push_back(std::move(r));
        } catch (const ordered_json::exception& e) {
            throw ParseError(e.what(), line_no);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return reports;
}

void write_confusion_csv(std::ostream& out, const EvaluationReport& report) {
    const auto k = report.confusion.rows();
    auto name = [&](Eigen::Index i) {
        return static_cast<std::size_t>(i) < report.class_names.size() ? report.class_names[static_cast<std::size_t>(i)]
                                                                       : std::to_string(i);
    };
    out << "truth\\predicted";
    for (Eigen::Index c = 0; c < k; ++c) out << ',' << name(c);
    out << '\n';
    for (Eigen::Index i = 0; i < k; ++i) {
        out << name(i);
        for (Eigen::Index c = 0; c < k; ++c) out << ',' << report.confusion(i, c);
        out << '\n';
    }
}

}  // namespace camtrap
