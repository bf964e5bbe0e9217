#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace camtrap {

inline constexpr std::string_view kFalsePositiveName = "FP";

struct GenusLabel {
    std::string name;
    int index = 0;

    bool is_false_positive() const { return name == kFalsePositiveName; }
    friend bool operator==(const GenusLabel&, const GenusLabel&) = default;
};

// Ordered label set; index i of the set is the class id of its i-th entry.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::vector<std::string> names);

    std::size_t size() const { return labels_.size(); }
    bool empty() const { return labels_.empty(); }
    const GenusLabel& operator[](std::size_t i) const { return labels_[i]; }
    const std::vector<GenusLabel>& labels() const { return labels_; }

    std::optional<GenusLabel> find(std::string_view name) const;
    const GenusLabel& at(std::string_view name) const;  // throws Error("unknown label ...")
    std::optional<GenusLabel> false_positive() const { return find(kFalsePositiveName); }

    std::vector<std::string> names() const;
    // Copy without the FP class, indices renumbered.
    LabelSet without_false_positive() const;
    // Copy with FP appended if it is not already present.
    LabelSet with_false_positive() const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;

private:
    std::vector<GenusLabel> labels_;
};

// Axis-aligned pixel box; origin top-left.
struct BoundingBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const { return x + w; }   // exclusive
    int bottom() const { return y + h; }  // exclusive
    long long area() const { return static_cast<long long>(w) * h; }
    bool valid() const { return w > 0 && h > 0; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct SampleRecord {
    std::string image_path;
    std::string camera_id;
    int frame_index = 0;
    GenusLabel label;
    std::optional<BoundingBox> gt_box;

    // Stable identifier "camera_id/frame_index" used by feature files.
    std::string sample_id() const;
};

struct DatasetManifest {
    std::vector<SampleRecord> records;
    LabelSet label_set;
    std::uint64_t seed = 0;
    // Directory image paths are resolved against.
    std::filesystem::path base_dir;

    // Validates invariants and sorts records by (camera_id, frame_index).
    void canonicalize();
    std::vector<int> label_indices() const;
    std::vector<std::string> camera_ids() const;
};

struct SplitAssignment {
    std::vector<std::size_t> train_ids;  // sorted
    std::vector<std::size_t> test_ids;   // sorted
};

// Manifest format: JSON lines. The first object is the header
// {"label_set": [...], "seed": n}; every following line is a record.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::istream& in);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

std::vector<std::size_t> class_counts(std::span<const int> labels, std::size_t num_classes);

// Indices of the samples kept after undersampling every class to the
// smallest class count. Survivors are returned in ascending order.
// `stream` names the random stream derived from `seed`.
std::vector<std::size_t> balance_indices(std::span<const int> labels, std::size_t num_classes,
                                         std::uint64_t seed, std::string_view stream = "balance_classes");
DatasetManifest balance_classes(const DatasetManifest& manifest);

// Per-class train count = round(fraction * count), halves rounded up.
std::size_t split_train_count(std::size_t class_count, double train_fraction);
SplitAssignment stratified_split(std::span<const int> labels, std::size_t num_classes,
                                 double train_fraction, std::uint64_t seed,
                                 std::string_view stream = "stratified_split");
SplitAssignment stratified_split(const DatasetManifest& manifest, double train_fraction);

}  // namespace camtrap
