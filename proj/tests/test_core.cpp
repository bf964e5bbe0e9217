#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "camtrap/core.hpp"
#include "camtrap/error.hpp"
#include "camtrap/random.hpp"

using namespace camtrap;

namespace {

DatasetManifest manifest_from(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in);
}

std::vector<int> random_labels(Rng& rng, std::size_t k, std::size_t min_per_class) {
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c) {
        const auto n = min_per_class + rng.index(20);
        for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(c));
    }
    rng.shuffle(labels);
    return labels;
}

}  // namespace

TEST(LabelSet, IndicesAreABijection) {
    LabelSet set({"Mazama", "Tapirus", "FP"});
    ASSERT_EQ(set.size(), 3u);
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(set[i].index, static_cast<int>(i));
    EXPECT_TRUE(set.at("FP").is_false_positive());
    EXPECT_EQ(set.without_false_positive().size(), 2u);
    EXPECT_EQ(set.without_false_positive().with_false_positive(), set);
    EXPECT_THROW(LabelSet({"A", "A"}), Error);
    EXPECT_THROW(set.at("Puma"), Error);
}

TEST(Manifest, ParsesAndSortsRecords) {
    const auto m = manifest_from(
        R"({"label_set": ["Mazama", "FP"], "seed": 9}
{"image_path": "b.png", "camera_id": "cam2", "frame_index": 0, "label": "FP"}
{"image_path": "a1.png", "camera_id": "cam1", "frame_index": 1, "label": "Mazama", "gt_box": [1, 2, 3, 4]}
{"image_path": "a0.png", "camera_id": "cam1", "frame_index": 0, "label": "FP"}
)");
    ASSERT_EQ(m.records.size(), 3u);
    EXPECT_EQ(m.label_set.size(), 2u);
    EXPECT_EQ(m.seed, 9u);
    EXPECT_EQ(m.records[0].image_path, "a0.png");
    EXPECT_EQ(m.records[1].image_path, "a1.png");
    EXPECT_EQ(m.records[2].camera_id, "cam2");
    EXPECT_EQ(m.records[1].gt_box, (BoundingBox{1, 2, 3, 4}));
    EXPECT_EQ(m.records[1].sample_id(), "cam1/1");
}

TEST(Manifest, TenClassLabelSet) {
    std::string text = R"({"label_set": ["Cuniculus", "Dasyprocta", "Didelphis", "Eira", "Leopardus", "Mazama", "Nasua", "Pecari", "Tamandua", "FP"], "seed": 1})";
    text += "\n";
    const auto m = manifest_from(text);
    EXPECT_EQ(m.label_set.size(), 10u);
}

TEST(Manifest, RejectsUnknownLabelWithLine) {
    try {
        manifest_from(R"({"label_set": ["Mazama", "FP"], "seed": 1}
{"image_path": "a.png", "camera_id": "c", "frame_index": 0, "label": "Puma", "gt_box": [0, 0, 2, 2]}
)");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("unknown label"), std::string::npos) << e.what();
    }
}

TEST(Manifest, RejectsDuplicateFrameAndBadJson) {
    EXPECT_THROW(manifest_from(R"({"label_set": ["FP"], "seed": 1}
{"image_path": "a.png", "camera_id": "c", "frame_index": 0, "label": "FP"}
{"image_path": "b.png", "camera_id": "c", "frame_index": 0, "label": "FP"}
)"),
                 Error);
    try {
        manifest_from("{\"label_set\": [\"FP\"], \"seed\": 1}\n{not json\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Manifest, GtBoxPresentIffNotFalsePositive) {
    EXPECT_THROW(manifest_from(R"({"label_set": ["Mazama", "FP"], "seed": 1}
{"image_path": "a.png", "camera_id": "c", "frame_index": 0, "label": "Mazama"}
)"),
                 Error);
    EXPECT_THROW(manifest_from(R"({"label_set": ["Mazama", "FP"], "seed": 1}
{"image_path": "a.png", "camera_id": "c", "frame_index": 0, "label": "FP", "gt_box": [0, 0, 2, 2]}
)"),
                 Error);
}

TEST(Manifest, WriteParseRoundTrip) {
    const auto m = manifest_from(
        R"({"label_set": ["Mazama", "FP"], "seed": 42}
{"image_path": "a.png", "camera_id": "cam1", "frame_index": 3, "label": "Mazama", "gt_box": [5, 6, 7, 8]}
{"image_path": "b.png", "camera_id": "cam1", "frame_index": 4, "label": "FP"}
)");
    std::ostringstream out;
    write_manifest(out, m);
    const auto back = manifest_from(out.str());
    EXPECT_EQ(back.seed, m.seed);
    EXPECT_EQ(back.label_set, m.label_set);
    ASSERT_EQ(back.records.size(), m.records.size());
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        EXPECT_EQ(back.records[i].sample_id(), m.records[i].sample_id());
        EXPECT_EQ(back.records[i].gt_box, m.records[i].gt_box);
        EXPECT_EQ(back.records[i].label, m.records[i].label);
    }
}

TEST(Balance, AlreadyBalancedIsUnchanged) {
    const std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto kept = balance_indices(labels, 2, 3);
    EXPECT_EQ(kept.size(), labels.size());
}

TEST(Balance, UndersamplesToSmallestClass) {
    std::vector<int> labels(4228, 0);
    labels.insert(labels.end(), 204, 1);
    const auto kept = balance_indices(labels, 2, 5);
    std::vector<int> kept_labels;
    for (auto i : kept) kept_labels.push_back(labels[i]);
    const auto counts = class_counts(kept_labels, 2);
    EXPECT_EQ(counts[0], 204u);
    EXPECT_EQ(counts[1], 204u);
}

TEST(Balance, SeededAndDeterministic) {
    const std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
    const auto a = balance_indices(labels, 3, 7);
    const auto b = balance_indices(labels, 3, 7);
    EXPECT_EQ(a, b);
    std::vector<int> kept_labels;
    for (auto i : a) kept_labels.push_back(labels[i]);
    EXPECT_EQ(class_counts(kept_labels, 3), (std::vector<std::size_t>{3, 3, 3}));
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
}

TEST(Balance, PropertyConstantCountsOverRandomLabelings) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.index(5);
        const auto labels = random_labels(rng, k, 1);
        const auto kept = balance_indices(labels, k, rng.next());
        std::vector<int> kept_labels;
        for (auto i : kept) kept_labels.push_back(labels[i]);
        const auto counts = class_counts(kept_labels, k);
        const auto original = class_counts(labels, k);
        EXPECT_TRUE(std::all_of(counts.begin(), counts.end(), [&](auto c) { return c == counts[0]; }));
        EXPECT_EQ(counts[0], *std::min_element(original.begin(), original.end()));
    }
}

TEST(Balance, ManifestVersionPreservesOrder) {
    DatasetManifest m;
    m.label_set = LabelSet({"A", "FP"});
    m.seed = 4;
    for (int i = 0; i < 9; ++i) {
        SampleRecord r;
        r.image_path = "f.png";
        r.camera_id = "c";
        r.frame_index = i;
        r.label = m.label_set[i < 3 ? 0 : 1];
        if (i < 3) r.gt_box = BoundingBox{0, 0, 2, 2};
        m.records.push_back(r);
    }
    const auto b = balance_classes(m);
    EXPECT_EQ(b.records.size(), 6u);
    for (std::size_t i = 1; i < b.records.size(); ++i) EXPECT_LT(b.records[i - 1].frame_index, b.records[i].frame_index);
    EXPECT_THROW(balance_classes(DatasetManifest{}), Error);
}

TEST(Split, RoundingRule) {
    EXPECT_EQ(split_train_count(10, 0.7), 7u);
    EXPECT_EQ(split_train_count(204, 0.7), 143u);
    EXPECT_EQ(split_train_count(5, 0.5), 3u);  // 2.5 rounds up
    EXPECT_EQ(split_train_count(3, 0.5), 2u);
}

TEST(Split, TwoClassesOf204) {
    std::vector<int> labels(204, 0);
    labels.insert(labels.end(), 204, 1);
    const auto s = stratified_split(labels, 2, 0.7, 1);
    std::vector<int> train_labels;
    for (auto i : s.train_ids) train_labels.push_back(labels[i]);
    EXPECT_EQ(class_counts(train_labels, 2), (std::vector<std::size_t>{143, 143}));
    EXPECT_EQ(s.test_ids.size(), 2u * 61u);
}

TEST(Split, PropertyDisjointCoveringAndStratified) {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.index(4);
        const auto labels = random_labels(rng, k, 2);
        const double fraction = 0.1 + 0.8 * rng.uniform();
        const auto seed = rng.next();
        const auto s = stratified_split(labels, k, fraction, seed);
        std::set<std::size_t> train(s.train_ids.begin(), s.train_ids.end());
        std::set<std::size_t> test(s.test_ids.begin(), s.test_ids.end());
        for (auto i : train) EXPECT_EQ(test.count(i), 0u);
        EXPECT_EQ(train.size() + test.size(), labels.size());
        std::vector<int> train_labels;
        for (auto i : s.train_ids) train_labels.push_back(labels[i]);
        const auto counts = class_counts(labels, k);
        const auto train_counts = class_counts(train_labels, k);
        for (std::size_t c = 0; c < k; ++c) {
            EXPECT_EQ(train_counts[c], split_train_count(counts[c], fraction));
            EXPECT_LE(std::abs(static_cast<double>(train_counts[c]) - fraction * static_cast<double>(counts[c])), 1.0);
        }
        const auto again = stratified_split(labels, k, fraction, seed);
        EXPECT_EQ(again.train_ids, s.train_ids);
        EXPECT_EQ(again.test_ids, s.test_ids);
    }
}

TEST(Split, RejectsTinyClassAndBadFraction) {
    const std::vector<int> labels{0, 0, 0, 1};
    EXPECT_THROW(stratified_split(labels, 2, 0.7, 1), Error);
    const std::vector<int> ok{0, 0, 1, 1};
    EXPECT_THROW(stratified_split(ok, 2, 1.0, 1), Error);
    EXPECT_THROW(stratified_split(ok, 2, 0.0, 1), Error);
}

TEST(Random, DerivedStreamsDifferByName) {
    EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
    EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
    Rng a(5, "x"), b(5, "x");
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        const auto v = r.index(7);
        EXPECT_LT(v, 7u);
        const double u = r.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
}
