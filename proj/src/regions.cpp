#include "camtrap/regions.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include <json.hpp>

#include "camtrap/error.hpp"

namespace camtrap {

std::vector<BoundingBox> connected_components(const ImageGray& mask, double min_area) {
    const int w = mask.width();
    const int h = mask.height();
    const double min_pixels = min_area * static_cast<double>(w) * static_cast<double>(h);
    std::vector<char> seen(mask.size(), 0);
    std::vector<BoundingBox> boxes;
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            const auto start = static_cast<std::size_t>(y0) * w + x0;
            if (seen[start] || mask(x0, y0) <= 0.5) continue;
            seen[start] = 1;
            stack.assign(1, {x0, y0});
            int xmin = x0, xmax = x0, ymin = y0, ymax = y0;
            long long pixels = 0;
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                ++pixels;
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const auto k = static_cast<std::size_t>(ny) * w + nx;
                        if (seen[k] || mask(nx, ny) <= 0.5) continue;
                        seen[k] = 1;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
            if (static_cast<double>(pixels) < min_pixels) continue;
            boxes.push_back({xmin, ymin, xmax - xmin + 1, ymax - ymin + 1});
        }
    }
    return boxes;
}

long long intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const long long iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const long long ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    return iw > 0 && ih > 0 ? iw * ih : 0;
}

bool boxes_overlap(const BoundingBox& a, const BoundingBox& b) { return intersection_area(a, b) > 0; }

BoundingBox box_union(const BoundingBox& a, const BoundingBox& b) {
    const int x = std::min(a.x, b.x);
    const int y = std::min(a.y, b.y);
    return {x, y, std::max(a.right(), b.right()) - x, std::max(a.bottom(), b.bottom()) - y};
}

std::vector<BoundingBox> merge_rois(std::vector<BoundingBox> boxes) {
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < boxes.size(); ++j) {
                if (boxes_overlap(boxes[i], boxes[j])) {
                    boxes[i] = box_union(boxes[i], boxes[j]);
                    boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                    merged = true;
                    break;
                }
            }
        }
    }
    std::sort(boxes.begin(), boxes.end(), [](const BoundingBox& a, const BoundingBox& b) {
        return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
    });
    return boxes;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    const long long inter = intersection_area(a, b);
    if (inter == 0) return 0.0;
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Region> assign_regions(std::vector<Region> regions, const SampleRecord& record, std::size_t frame_id,
                                   const GenusLabel& false_positive) {
    for (auto& r : regions) {
        if (r.frame_id != frame_id) throw Error("assign_regions: region belongs to another frame");
        if (!record.gt_box) {
            r.iou_vs_gt = 0.0;
            r.assigned = false_positive;
            continue;
        }
        const double v = iou(r.box, *record.gt_box);
        r.iou_vs_gt = v;
        if (v > kAnimalIouThreshold) {
            r.assigned = record.label;
        } else if (v == 0.0) {
            r.assigned = false_positive;
        } else {
            r.assigned.reset();
        }
    }
    return regions;
}

void write_regions(std::ostream& out, std::span<const Region> regions, const DatasetManifest& manifest) {
    for (const auto& r : regions) {
        nlohmann::ordered_json j;
        j["frame_id"] = r.frame_id;
        if (r.frame_id < manifest.records.size()) j["sample_id"] = manifest.records[r.frame_id].sample_id();
        j["x"] = r.box.x;
        j["y"] = r.box.y;
        j["w"] = r.box.w;
        j["h"] = r.box.h;
        j["source"] = r.source == RegionSource::automatic ? "automatic" : "ground_truth";
        j["iou"] = r.iou_vs_gt ? nlohmann::ordered_json(*r.iou_vs_gt) : nlohmann::ordered_json(nullptr);
        j["assigned_label"] = r.assigned ? nlohmann::ordered_json(r.assigned->name) : nlohmann::ordered_json(nullptr);
        out << j.dump() << '\n';
    }
}

void save_regions(const std::filesystem::path& path, std::span<const Region> regions,
                  const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write regions " + path.string());
    write_regions(out, regions, manifest);
}

std::vector<Region> load_regions(const std::filesystem::path& path, const LabelSet& labels) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open regions " + path.string());
    std::vector<Region> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(text);
            Region r;
            r.frame_id = j.at("frame_id").get<std::size_t>();
            r.box = {j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
            r.source = j.value("source", std::string("automatic")) == "ground_truth" ? RegionSource::ground_truth
                                                                                     : RegionSource::automatic;
            if (!j.at("iou").is_null()) r.iou_vs_gt = j.at("iou").get<double>();
            if (!j.at("assigned_label").is_null()) r.assigned = labels.at(j.at("assigned_label").get<std::string>());
            out.push_back(r);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(e.what(), line);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(e.what(), line);
        }
    }
    return out;
}

}  // namespace camtrap
