#include "camtrap/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "camtrap/error.hpp"
#include "camtrap/random.hpp"

namespace camtrap {

using nlohmann::json;

LabelSet::LabelSet(std::vector<std::string> names) {
    std::set<std::string> seen;
    labels_.reserve(names.size());
    for (auto& name : names) {
        if (name.empty()) throw Error("empty label name");
        if (!seen.insert(name).second) throw Error("duplicate label \"" + name + "\"");
        labels_.push_back(GenusLabel{std::move(name), static_cast<int>(labels_.size())});
    }
}

std::optional<GenusLabel> LabelSet::find(std::string_view name) const {
    for (const auto& l : labels_) {
        if (l.name == name) return l;
    }
    return std::nullopt;
}

const GenusLabel& LabelSet::at(std::string_view name) const {
    for (const auto& l : labels_) {
        if (l.name == name) return l;
    }
    throw Error("unknown label \"" + std::string(name) + "\"");
}

std::vector<std::string> LabelSet::names() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.name);
    return out;
}

LabelSet LabelSet::without_false_positive() const {
    std::vector<std::string> kept;
    for (const auto& l : labels_) {
        if (!l.is_false_positive()) kept.push_back(l.name);
    }
    return LabelSet(std::move(kept));
}

LabelSet LabelSet::with_false_positive() const {
    if (false_positive()) return *this;
    auto n = names();
    n.emplace_back(kFalsePositiveName);
    return LabelSet(std::move(n));
}

std::string SampleRecord::sample_id() const { return camera_id + "/" + std::to_string(frame_index); }

void DatasetManifest::canonicalize() {
    for (const auto& r : records) {
        const auto l = label_set.find(r.label.name);
        if (!l) throw Error("unknown label \"" + r.label.name + "\"");
        if (l->index != r.label.index) throw Error("label index mismatch for \"" + r.label.name + "\"");
        if (r.label.is_false_positive() == r.gt_box.has_value()) {
            throw Error("record " + r.sample_id() + ": gt_box must be present iff label is not FP");
        }
        if (r.gt_box && !r.gt_box->valid()) throw Error("record " + r.sample_id() + ": empty gt_box");
    }
    std::stable_sort(records.begin(), records.end(), [](const SampleRecord& a, const SampleRecord& b) {
        if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
        return a.frame_index < b.frame_index;
    });
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].camera_id == records[i - 1].camera_id &&
            records[i].frame_index == records[i - 1].frame_index) {
            throw Error("duplicate (camera_id, frame_index) " + records[i].sample_id());
        }
    }
}

std::vector<int> DatasetManifest::label_indices() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.label.index);
    return out;
}

std::vector<std::string> DatasetManifest::camera_ids() const {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (out.empty() || out.back() != r.camera_id) out.push_back(r.camera_id);
    }
    return out;
}

namespace {

SampleRecord parse_record(const json& j, const LabelSet& labels, std::size_t line) {
    SampleRecord r;
    try {
        r.image_path = j.at("image_path").get<std::string>();
        r.camera_id = j.at("camera_id").get<std::string>();
        r.frame_index = j.at("frame_index").get<int>();
        const auto name = j.at("label").get<std::string>();
        const auto label = labels.find(name);
        if (!label) throw ParseError("unknown label \"" + name + "\"", line);
        r.label = *label;
        if (auto it = j.find("gt_box"); it != j.end() && !it->is_null()) {
            const auto v = it->get<std::vector<int>>();
            if (v.size() != 4) throw ParseError("gt_box must be [x, y, width, height]", line);
            r.gt_box = BoundingBox{v[0], v[1], v[2], v[3]};
        }
    } catch (const json::exception& e) {
        throw ParseError(e.what(), line);
    }
    if (r.frame_index < 0) throw ParseError("negative frame_index", line);
    return r;
}

}  // namespace

DatasetManifest parse_manifest(std::istream& in) {
    DatasetManifest m;
    bool have_header = false;
    std::string text;
    std::size_t line = 0;
    std::set<std::pair<std::string, int>> keys;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(e.what(), line);
        }
        if (!j.is_object()) throw ParseError("expected a JSON object", line);
        if (!have_header) {
            try {
                m.label_set = LabelSet(j.at("label_set").get<std::vector<std::string>>());
                m.seed = j.at("seed").get<std::uint64_t>();
            } catch (const json::exception& e) {
                throw ParseError(std::string("bad header: ") + e.what(), line);
            } catch (const Error& e) {
                throw ParseError(e.what(), line);
            }
            have_header = true;
            continue;
        }
        auto r = parse_record(j, m.label_set, line);
        if (!keys.emplace(r.camera_id, r.frame_index).second) {
            throw ParseError("duplicate (camera_id, frame_index) " + r.sample_id(), line);
        }
        if (r.label.is_false_positive() == r.gt_box.has_value()) {
            throw ParseError("gt_box must be present iff label is not FP", line);
        }
        m.records.push_back(std::move(r));
    }
    if (!have_header) throw ParseError("missing header object", line);
    m.canonicalize();
    return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    auto m = parse_manifest(in);
    m.base_dir = path.parent_path();
    return m;
}

void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
    json header;
    header["label_set"] = manifest.label_set.names();
    header["seed"] = manifest.seed;
    out << header.dump() << '\n';
    for (const auto& r : manifest.records) {
        json j;
        j["image_path"] = r.image_path;
        j["camera_id"] = r.camera_id;
        j["frame_index"] = r.frame_index;
        j["label"] = r.label.name;
        if (r.gt_box) j["gt_box"] = {r.gt_box->x, r.gt_box->y, r.gt_box->w, r.gt_box->h};
        out << j.dump() << '\n';
    }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write manifest " + path.string());
    write_manifest(out, manifest);
}

std::vector<std::size_t> class_counts(std::span<const int> labels, std::size_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) throw Error("label index out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    return counts;
}

std::vector<std::size_t> balance_indices(std::span<const int> labels, std::size_t num_classes,
                                         std::uint64_t seed, std::string_view stream) {
    if (labels.empty()) throw Error("balance_classes: empty input");
    const auto counts = class_counts(labels, num_classes);
    const auto target = *std::min_element(counts.begin(), counts.end());
    if (target == 0) throw Error("balance_classes: a class has no samples");

    Rng rng(seed, stream);
    std::vector<std::vector<std::size_t>> members(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

    std::vector<std::size_t> kept;
    kept.reserve(target * num_classes);
    for (auto& m : members) {
        // Classes are always visited in index order so the stream consumption
        // is a pure function of the class counts.
        rng.shuffle(m);
        kept.insert(kept.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(target));
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

DatasetManifest balance_classes(const DatasetManifest& manifest) {
    const auto labels = manifest.label_indices();
    const auto kept = balance_indices(labels, manifest.label_set.size(), manifest.seed);
    DatasetManifest out = manifest;
    out.records.clear();
    for (auto i : kept) out.records.push_back(manifest.records[i]);
    return out;
}

std::size_t split_train_count(std::size_t class_count, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("train fraction must lie in (0, 1)");
    const double exact = train_fraction * static_cast<double>(class_count);
    return static_cast<std::size_t>(std::floor(exact + 0.5 + 1e-9));
}

SplitAssignment stratified_split(std::span<const int> labels, std::size_t num_classes, double train_fraction,
                                 std::uint64_t seed, std::string_view stream) {
    const auto counts = class_counts(labels, num_classes);
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (counts[k] == 1) throw Error("stratified_split: class " + std::to_string(k) + " has fewer than 2 samples");
    }
    Rng rng(seed, stream);
    std::vector<std::vector<std::size_t>> members(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

    SplitAssignment split;
    for (auto& m : members) {
        if (m.empty()) continue;
        const auto n_train = split_train_count(m.size(), train_fraction);
        rng.shuffle(m);
        split.train_ids.insert(split.train_ids.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test_ids.insert(split.test_ids.end(), m.begin() + static_cast<std::ptrdiff_t>(n_train), m.end());
    }
    std::sort(split.train_ids.begin(), split.train_ids.end());
    std::sort(split.test_ids.begin(), split.test_ids.end());
    return split;
}

SplitAssignment stratified_split(const DatasetManifest& manifest, double train_fraction) {
    const auto labels = manifest.label_indices();
    return stratified_split(labels, manifest.label_set.size(), train_fraction, manifest.seed);
}

}  // namespace camtrap
