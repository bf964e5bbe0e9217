#include "camtrap/features.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "camtrap/error.hpp"
#include "camtrap/imaging.hpp"

namespace camtrap {

void FeatureMatrix::validate() const {
    if (sample_ids.size() != rows() || y.size() != rows()) throw Error("feature matrix: ids/labels misaligned with rows");
    if (!x.allFinite()) throw Error("feature matrix: non-finite value");
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes) throw Error("feature matrix: label out of range");
    }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows_to_keep) const {
    FeatureMatrix out;
    out.num_classes = num_classes;
    out.extractor_id = extractor_id;
    out.x.resize(static_cast<Eigen::Index>(rows_to_keep.size()), x.cols());
    for (std::size_t i = 0; i < rows_to_keep.size(); ++i) {
        const auto r = rows_to_keep[i];
        if (r >= rows()) throw Error("feature matrix: row index out of range");
        out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(r));
        out.sample_ids.push_back(sample_ids[r]);
        out.y.push_back(y[r]);
    }
    return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols) const {
    FeatureMatrix out;
    out.num_classes = num_classes;
    out.extractor_id = extractor_id;
    out.sample_ids = sample_ids;
    out.y = y;
    out.x.resize(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] >= dims()) throw Error("feature matrix: column index out of range");
        out.x.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
    }
    return out;
}

FeatureMatrix StandardizationParams::apply(const FeatureMatrix& m) const {
    if (static_cast<Eigen::Index>(m.dims()) != mean.size()) throw Error("standardize: dimension mismatch");
    FeatureMatrix out = m;
    out.x = ((m.x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
    return out;
}

FeatureMatrix StandardizationParams::invert(const FeatureMatrix& m) const {
    if (static_cast<Eigen::Index>(m.dims()) != mean.size()) throw Error("standardize: dimension mismatch");
    FeatureMatrix out = m;
    out.x = ((m.x.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose());
    return out;
}

Eigen::VectorXd BuiltinExtractor::extract(const ImageColor& crop) const {
    if (crop.width() < 1 || crop.height() < 1) throw Error("extract_builtin: degenerate crop");
    const ImageColor img = (crop.width() == kCropSize && crop.height() == kCropSize)
                               ? crop
                               : crop_resize(crop, {0, 0, crop.width(), crop.height()}, kCropSize);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kDims));
    const auto gray = to_grayscale(img);
    const int n = kCropSize;

    // Texture.
    const auto lbp = lbp_map(gray);
    double lbp_total = 0.0;
    for (int y = 1; y < n - 1; ++y) {
        for (int x = 1; x < n - 1; ++x) {
            const auto code = static_cast<std::size_t>(std::lround(lbp(x, y) * 255.0));
            f(static_cast<Eigen::Index>(code)) += 1.0;
            lbp_total += 1.0;
        }
    }
    f.head(static_cast<Eigen::Index>(kLbpBins)) /= lbp_total;

    // Colour.
    for (std::size_t c = 0; c < 3; ++c) {
        const auto offset = static_cast<Eigen::Index>(kLbpBins + c * kColorBins);
        for (double v : img.channel(c).data()) {
            const auto bin = std::min<Eigen::Index>(static_cast<Eigen::Index>(v * kColorBins),
                                                    static_cast<Eigen::Index>(kColorBins) - 1);
            f(offset + bin) += 1.0;
        }
        f.segment(offset, static_cast<Eigen::Index>(kColorBins)) /= static_cast<double>(img.channel(c).size());
    }

    // Gradient orientation.
    const auto goffset = static_cast<Eigen::Index>(kLbpBins + 3 * kColorBins);
    const double sector = 2.0 * std::numbers::pi / kOrientations;
    double grad_total = 0.0;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double gx = 0.5 * (gray.clamped(x + 1, y) - gray.clamped(x - 1, y));
            const double gy = 0.5 * (gray.clamped(x, y + 1) - gray.clamped(x, y - 1));
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0.0) angle += 2.0 * std::numbers::pi;
            const auto o = std::min<std::size_t>(static_cast<std::size_t>(angle / sector), kOrientations - 1);
            const auto cx = static_cast<std::size_t>(x) * kGradientCells / n;
            const auto cy = static_cast<std::size_t>(y) * kGradientCells / n;
            f(goffset + static_cast<Eigen::Index>((cy * kGradientCells + cx) * kOrientations + o)) += mag;
            grad_total += mag;
        }
    }
    if (grad_total > 0.0) f.tail(static_cast<Eigen::Index>(kGradientCells * kGradientCells * kOrientations)) /= grad_total;
    return f;
}

Eigen::VectorXd extract_builtin(const ImageColor& crop) { return BuiltinExtractor{}.extract(crop); }

void write_features(std::ostream& out, const FeatureMatrix& m) {
    out << '#' << m.extractor_id << ' ' << m.dims() << '\n';
    std::string line;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        line = m.sample_ids[i];
        for (Eigen::Index j = 0; j < m.x.cols(); ++j) fmt::format_to(std::back_inserter(line), " {}", m.x(static_cast<Eigen::Index>(i), j));
        line += '\n';
        out << line;
    }
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write features " + path.string());
    write_features(out, m);
}

FeatureMatrix import_external(std::istream& in, std::span<const std::string> ids, std::span<const int> labels,
                              std::size_t num_classes) {
    if (ids.size() != labels.size()) throw Error("import_external: ids and labels differ in length");
    std::unordered_map<std::string, int> label_of;
    for (std::size_t i = 0; i < ids.size(); ++i) label_of.emplace(ids[i], labels[i]);

    std::string text;
    if (!std::getline(in, text) || text.empty() || text[0] != '#') throw ParseError("missing '#extractor_id p' header", 1);
    FeatureMatrix m;
    m.num_classes = num_classes;
    std::size_t p = 0;
    {
        std::istringstream hs(text.substr(1));
        if (!(hs >> m.extractor_id >> p) || p == 0) throw ParseError("bad header, expected '#extractor_id p'", 1);
    }
    std::vector<double> values;
    std::size_t line = 1;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (text.empty()) continue;
        std::istringstream ls(text);
        std::string id;
        ls >> id;
        const auto it = label_of.find(id);
        if (it == label_of.end()) throw ParseError("unknown sample id \"" + id + "\"", line);
        std::size_t count = 0;
        std::string token;
        while (ls >> token) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
                throw ParseError("row \"" + id + "\": non-finite or malformed value \"" + token + "\"", line);
            }
            values.push_back(v);
            ++count;
        }
        if (count != p) {
            throw ParseError("row \"" + id + "\" has " + std::to_string(count) + " values, expected " + std::to_string(p), line);
        }
        m.sample_ids.push_back(id);
        m.y.push_back(it->second);
    }
    m.x.resize(static_cast<Eigen::Index>(m.sample_ids.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < m.sample_ids.size(); ++i) {
        for (std::size_t j = 0; j < p; ++j) m.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * p + j];
    }
    m.validate();
    return m;
}

FeatureMatrix import_external(const std::filesystem::path& path, std::span<const std::string> ids,
                              std::span<const int> labels, std::size_t num_classes) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open feature file " + path.string());
    return import_external(in, ids, labels, num_classes);
}

FeatureMatrix import_external(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::vector<std::string> ids;
    for (const auto& r : manifest.records) ids.push_back(r.sample_id());
    const auto labels = manifest.label_indices();
    return import_external(path, ids, labels, manifest.label_set.size());
}

FeatureMatrix concat_features(std::span<const FeatureMatrix> parts) {
    if (parts.empty()) throw Error("concat_features: no inputs");
    const auto& first = parts.front();
    Eigen::Index total = 0;
    std::string id;
    for (const auto& part : parts) {
        if (part.sample_ids != first.sample_ids || part.y != first.y || part.num_classes != first.num_classes) {
            throw Error("concat_features: rows are not aligned (sample ids or labels differ)");
        }
        total += part.x.cols();
        id += (id.empty() ? "" : "+") + part.extractor_id;
    }
    FeatureMatrix out;
    out.sample_ids = first.sample_ids;
    out.y = first.y;
    out.num_classes = first.num_classes;
    out.extractor_id = id;
    out.x.resize(first.x.rows(), total);
    Eigen::Index col = 0;
    for (const auto& part : parts) {
        out.x.middleCols(col, part.x.cols()) = part.x;
        col += part.x.cols();
    }
    return out;
}

StandardizationParams fit_standardization(const FeatureMatrix& train) {
    if (train.rows() == 0) throw Error("standardize: empty training matrix");
    StandardizationParams p;
    p.mean = train.x.colwise().mean().transpose();
    const Eigen::MatrixXd centred = train.x.rowwise() - p.mean.transpose();
    p.std = (centred.array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt().transpose();
    for (Eigen::Index j = 0; j < p.std.size(); ++j) {
        if (p.std(j) < StandardizationParams::kMinStd) p.std(j) = 1.0;
    }
    return p;
}

std::pair<FeatureMatrix, StandardizationParams> standardize(const FeatureMatrix& train, const FeatureMatrix& apply_to) {
    auto params = fit_standardization(train);
    auto out = params.apply(apply_to);
    return {std::move(out), std::move(params)};
}

}  // namespace camtrap
