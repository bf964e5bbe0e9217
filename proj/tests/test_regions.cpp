#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "camtrap/error.hpp"
#include "camtrap/random.hpp"
#include "camtrap/regions.hpp"
#include "oracles.hpp"

using namespace camtrap;

namespace {

BoundingBox random_box(Rng& rng, int grid) {
    const int x = static_cast<int>(rng.index(static_cast<std::uint64_t>(grid)));
    const int y = static_cast<int>(rng.index(static_cast<std::uint64_t>(grid)));
    const int w = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(grid - x)));
    const int h = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(grid - y)));
    return {x, y, w, h};
}

bool contains(const BoundingBox& outer, const BoundingBox& inner) {
    return inner.x >= outer.x && inner.y >= outer.y && inner.right() <= outer.right() &&
           inner.bottom() <= outer.bottom();
}

SampleRecord record_with_box(std::optional<BoundingBox> box, const GenusLabel& label) {
    SampleRecord r;
    r.image_path = "f.png";
    r.camera_id = "cam";
    r.frame_index = 0;
    r.label = label;
    r.gt_box = box;
    return r;
}

std::vector<Region> automatic(std::initializer_list<BoundingBox> boxes) {
    std::vector<Region> out;
    for (const auto& b : boxes) {
        Region r;
        r.box = b;
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST(Iou, KnownValues) {
    EXPECT_EQ(iou({0, 0, 10, 10}, {5, 0, 10, 10}), 1.0 / 3.0);
    EXPECT_EQ(iou({2, 3, 4, 5}, {2, 3, 4, 5}), 1.0);
    EXPECT_EQ(iou({0, 0, 2, 2}, {5, 5, 2, 2}), 0.0);
    EXPECT_EQ(iou({0, 0, 2, 2}, {2, 0, 2, 2}), 0.0);  // edge contact only
}

TEST(Iou, PropertySymmetryBoundsAndIdentity) {
    Rng rng(1);
    for (int i = 0; i < 5000; ++i) {
        const auto a = random_box(rng, 64);
        const auto b = random_box(rng, 64);
        const double v = iou(a, b);
        EXPECT_EQ(v, iou(b, a));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_EQ(iou(a, a), 1.0);
    }
}

TEST(Iou, MatchesPixelCountOnRandom64Grid) {
    Rng rng(2);
    for (int i = 0; i < 400; ++i) {
        const auto a = random_box(rng, 64);
        const auto b = random_box(rng, 64);
        EXPECT_EQ(iou(a, b), oracle::pixel_iou(a, b, 64));
    }
}

TEST(Iou, ExhaustiveSmallGrid) {
    const auto boxes = oracle::all_boxes(5);
    for (const auto& a : boxes) {
        for (const auto& b : boxes) ASSERT_EQ(iou(a, b), oracle::pixel_iou(a, b, 5));
    }
}

TEST(Components, EmptyTwoBlocksAndDiagonal) {
    EXPECT_TRUE(connected_components(ImageGray(10, 10, 0.0), 0.0).empty());
    ImageGray two(20, 10, 0.0);
    for (int y = 1; y < 6; ++y) {
        for (int x = 1; x < 6; ++x) {
            two(x, y) = 1.0;
            two(x + 10, y + 2) = 1.0;
        }
    }
    const auto boxes = connected_components(two, 0.0);
    ASSERT_EQ(boxes.size(), 2u);
    EXPECT_EQ(boxes[0], (BoundingBox{1, 1, 5, 5}));
    EXPECT_EQ(boxes[1], (BoundingBox{11, 3, 5, 5}));
    ImageGray diag(8, 8, 0.0);
    for (int i = 1; i < 7; ++i) diag(i, i) = 1.0;
    const auto chain = connected_components(diag, 0.0);
    ASSERT_EQ(chain.size(), 1u);
    EXPECT_EQ(chain[0], (BoundingBox{1, 1, 6, 6}));
}

TEST(Components, MinAreaDropsSpecks) {
    ImageGray mask(10, 10, 0.0);
    mask(0, 0) = 1.0;
    for (int x = 3; x < 8; ++x) mask(x, 5) = 1.0;
    EXPECT_EQ(connected_components(mask, 0.05).size(), 1u);  // 5 pixels survive, 1 does not
    EXPECT_EQ(connected_components(mask, 0.06).size(), 0u);
}

TEST(Components, PropertyMatchFloodFillOracle) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 5 + static_cast<int>(rng.index(30));
        const int h = 5 + static_cast<int>(rng.index(30));
        const double density = rng.uniform(0.05, 0.6);
        ImageGray mask(w, h);
        for (auto& v : mask.data()) v = rng.uniform() < density ? 1.0 : 0.0;
        const double min_area = trial % 2 == 0 ? 0.0 : 0.01;
        auto got = connected_components(mask, min_area);
        std::sort(got.begin(), got.end(),
                  [](const auto& a, const auto& b) { return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h); });
        EXPECT_EQ(got, oracle::flood_fill_components(mask, min_area * w * h)) << "trial " << trial;
    }
}

TEST(Merge, KnownCases) {
    const std::vector<BoundingBox> disjoint{{0, 0, 2, 2}, {5, 5, 2, 2}};
    EXPECT_EQ(merge_rois(disjoint), disjoint);
    EXPECT_EQ(merge_rois({{0, 0, 10, 10}, {5, 5, 10, 10}}), (std::vector<BoundingBox>{{0, 0, 15, 15}}));
    // A meets B, B meets C, A and C apart.
    EXPECT_EQ(merge_rois({{0, 0, 4, 4}, {3, 3, 4, 4}, {6, 6, 4, 4}}), (std::vector<BoundingBox>{{0, 0, 10, 10}}));
    // A union that swallows a box it never overlapped directly.
    EXPECT_EQ(merge_rois({{0, 0, 3, 10}, {0, 0, 10, 3}, {6, 6, 2, 2}}), (std::vector<BoundingBox>{{0, 0, 10, 10}}));
    // Edge contact does not merge.
    EXPECT_EQ(merge_rois({{0, 0, 2, 2}, {2, 0, 2, 2}}).size(), 2u);
}

TEST(Merge, PropertyDisjointCoveringIdempotent) {
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<BoundingBox> boxes;
        const auto n = rng.index(12);
        for (std::uint64_t i = 0; i < n; ++i) {
            auto b = random_box(rng, 40);
            b.w = std::min(b.w, 8);
            b.h = std::min(b.h, 8);
            boxes.push_back(b);
        }
        const auto merged = merge_rois(boxes);
        for (std::size_t i = 0; i < merged.size(); ++i) {
            for (std::size_t j = i + 1; j < merged.size(); ++j) EXPECT_FALSE(boxes_overlap(merged[i], merged[j]));
        }
        for (const auto& b : boxes) {
            EXPECT_TRUE(std::any_of(merged.begin(), merged.end(), [&](const auto& m) { return contains(m, b); }));
        }
        EXPECT_EQ(merge_rois(merged), merged);
        EXPECT_TRUE(std::is_sorted(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
            return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
        }));
    }
}

TEST(Assign, ThresholdRule) {
    const LabelSet labels({"Mazama", "FP"});
    const auto rec = record_with_box(BoundingBox{0, 0, 100, 1}, labels.at("Mazama"));
    // IoU 51/100, 0 and 30/100 against the ground truth.
    const auto out = assign_regions(automatic({{0, 0, 51, 1}, {200, 0, 5, 1}, {0, 0, 30, 1}, {0, 0, 50, 1}}), rec, 0,
                                    labels.at("FP"));
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(out[0].assigned->name, "Mazama");
    EXPECT_NEAR(*out[0].iou_vs_gt, 0.51, 1e-12);
    EXPECT_EQ(out[1].assigned->name, "FP");
    EXPECT_EQ(*out[1].iou_vs_gt, 0.0);
    EXPECT_FALSE(out[2].assigned.has_value());
    EXPECT_FALSE(out[3].assigned.has_value());  // exactly 0.5 is not enough
    for (const auto& r : out) EXPECT_EQ(r.frame_id, 0u);
}

TEST(Assign, FrameWithoutGroundTruthIsAllFalsePositive) {
    const LabelSet labels({"Mazama", "FP"});
    const auto rec = record_with_box(std::nullopt, labels.at("FP"));
    const auto out = assign_regions(automatic({{0, 0, 5, 5}, {10, 10, 3, 3}}), rec, 0, labels.at("FP"));
    for (const auto& r : out) {
        EXPECT_EQ(r.assigned->name, "FP");
        EXPECT_EQ(r.iou_vs_gt, 0.0);
    }
}

TEST(Assign, PropertyNoGenusAtOrBelowHalf) {
    Rng rng(5);
    const LabelSet labels({"Mazama", "Tapirus", "FP"});
    for (int trial = 0; trial < 500; ++trial) {
        const auto gt = random_box(rng, 30);
        const auto rec = record_with_box(gt, labels[rng.index(2)]);
        std::vector<Region> regions;
        for (int i = 0; i < 5; ++i) {
            Region r;
            r.box = random_box(rng, 30);
            regions.push_back(r);
        }
        for (const auto& r : assign_regions(regions, rec, 0, labels.at("FP"))) {
            const double v = iou(r.box, gt);
            ASSERT_TRUE(r.iou_vs_gt.has_value());
            EXPECT_EQ(*r.iou_vs_gt, v);
            if (v > 0.5) {
                EXPECT_EQ(r.assigned->name, rec.label.name);
            } else if (v == 0.0) {
                EXPECT_EQ(r.assigned->name, "FP");
            } else {
                EXPECT_FALSE(r.assigned.has_value());
            }
        }
    }
}

TEST(Assign, RejectsForeignFrame) {
    const LabelSet labels({"Mazama", "FP"});
    const auto rec = record_with_box(BoundingBox{0, 0, 4, 4}, labels.at("Mazama"));
    auto regions = automatic({{0, 0, 4, 4}});
    regions[0].frame_id = 7;
    EXPECT_THROW(assign_regions(regions, rec, 2, labels.at("FP")), Error);
}

TEST(RegionFile, RoundTrip) {
    DatasetManifest m;
    m.label_set = LabelSet({"Mazama", "FP"});
    m.records.push_back(record_with_box(BoundingBox{0, 0, 10, 10}, m.label_set.at("Mazama")));
    const auto regions =
        assign_regions(automatic({{0, 0, 9, 10}, {20, 20, 3, 3}, {5, 0, 10, 10}}), m.records[0], 0, m.label_set.at("FP"));
    const auto path = std::filesystem::temp_directory_path() / "camtrap_regions_test.jsonl";
    save_regions(path, regions, m);
    const auto back = load_regions(path, m.label_set);
    ASSERT_EQ(back.size(), regions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].box, regions[i].box);
        EXPECT_EQ(back[i].frame_id, regions[i].frame_id);
        EXPECT_EQ(back[i].iou_vs_gt, regions[i].iou_vs_gt);
        EXPECT_EQ(back[i].assigned, regions[i].assigned);
    }
    std::filesystem::remove(path);
}
