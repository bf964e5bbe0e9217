#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "camtrap/core.hpp"
#include "camtrap/image.hpp"

namespace camtrap {

inline constexpr double kDefaultMinAreaFraction = 0.001;
inline constexpr double kAnimalIouThreshold = 0.5;

enum class RegionSource { ground_truth, automatic };

struct Region {
    BoundingBox box;
    std::size_t frame_id = 0;  // record index in the canonical manifest
    RegionSource source = RegionSource::automatic;
    std::optional<double> iou_vs_gt;
    std::optional<GenusLabel> assigned;
};

// Tight boxes of the 8-connected foreground components, in raster order of
// their first pixel. Components with fewer than min_area * width * height
// pixels are dropped.
std::vector<BoundingBox> connected_components(const ImageGray& mask,
                                              double min_area = kDefaultMinAreaFraction);

// Positive-area intersection; boxes that only touch along an edge do not overlap.
bool boxes_overlap(const BoundingBox& a, const BoundingBox& b);
BoundingBox box_union(const BoundingBox& a, const BoundingBox& b);
long long intersection_area(const BoundingBox& a, const BoundingBox& b);

// Replaces overlapping pairs by their bounding union until no two boxes
// overlap. Output sorted by (x, y, w, h).
std::vector<BoundingBox> merge_rois(std::vector<BoundingBox> boxes);

double iou(const BoundingBox& a, const BoundingBox& b);

// Labels automatic regions of one frame: IoU > 0.5 takes the frame's genus,
// IoU = 0 becomes FP, anything in between stays unassigned. Frames without
// a ground-truth box give every region IoU 0 and the FP label.
std::vector<Region> assign_regions(std::vector<Region> regions, const SampleRecord& record, std::size_t frame_id,
                                   const GenusLabel& false_positive);

// Region dump: one JSON object per line with frame_id, x, y, w, h, iou,
// assigned_label (null when absent).
void write_regions(std::ostream& out, std::span<const Region> regions, const DatasetManifest& manifest);
void save_regions(const std::filesystem::path& path, std::span<const Region> regions,
                  const DatasetManifest& manifest);
std::vector<Region> load_regions(const std::filesystem::path& path, const LabelSet& labels);

}  // namespace camtrap
