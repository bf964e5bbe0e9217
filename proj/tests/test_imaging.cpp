#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "camtrap/error.hpp"
#include "camtrap/image_io.hpp"
#include "camtrap/imaging.hpp"
#include "camtrap/random.hpp"
#include "oracles.hpp"

using namespace camtrap;

namespace {

ImageGray random_gray(Rng& rng, int w, int h) {
    ImageGray img(w, h);
    for (auto& v : img.data()) v = rng.uniform();
    return img;
}

ImageColor random_color(Rng& rng, int w, int h) {
    return ImageColor(random_gray(rng, w, h), random_gray(rng, w, h), random_gray(rng, w, h));
}

bool in_unit_range(const ImageGray& img) {
    return std::all_of(img.data().begin(), img.data().end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

// A smooth, strictly increasing map of [0, 1] onto itself.
double monotone_remap(double v, double k) { return std::log1p(k * v) / std::log1p(k); }

}  // namespace

TEST(Grayscale, LuminanceWeights) {
    const auto gray = to_grayscale(ImageColor(4, 3, 0.6, 0.6, 0.6));
    for (double v : gray.data()) EXPECT_NEAR(v, 0.6, 1e-15);
    const auto red = to_grayscale(ImageColor(2, 2, 1.0, 0.0, 0.0));
    for (double v : red.data()) EXPECT_NEAR(v, 0.299, 1e-15);
    const auto black = to_grayscale(ImageColor(2, 2));
    for (double v : black.data()) EXPECT_EQ(v, 0.0);
    const auto white = to_grayscale(ImageColor(2, 2, 1.0, 1.0, 1.0));
    for (double v : white.data()) EXPECT_LE(v, 1.0);
}

TEST(Histogram, BinRule) {
    EXPECT_EQ(histogram_bin(0.0), 0);
    EXPECT_EQ(histogram_bin(1.0), 255);
    EXPECT_EQ(histogram_bin(0.5), 127);
    EXPECT_EQ(histogram_bin(1.0 / 255.999), 1);
}

TEST(Clahe, UniformImageIsIdentity) {
    for (double v : {0.0, 0.13, 0.5, 0.87, 1.0}) {
        const ImageGray img(37, 29, v);
        for (int tiles : {1, 3, 8}) {
            const auto out = clahe(img, {tiles, tiles, 3.55});
            for (double o : out.data()) EXPECT_NEAR(o, v, 1.0 / 512.0) << "v=" << v << " tiles=" << tiles;
        }
    }
}

TEST(Clahe, TwoValuedImageEqualizes) {
    ImageGray img(20, 20);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) img(x, y) = x < 10 ? 0.2 : 0.8;
    }
    const auto out = clahe(img, {1, 1, 1000.0});
    const double low = out(0, 0);
    const double high = out(19, 0);
    EXPECT_NEAR(low, 0.5, 0.01);
    EXPECT_NEAR(high, 1.0, 0.01);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) EXPECT_EQ(out(x, y), x < 10 ? low : high);
    }
}

TEST(Clahe, RangeAndErrors) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const auto img = random_gray(rng, 40 + trial, 30 + 2 * trial);
        EXPECT_TRUE(in_unit_range(clahe(img)));
        EXPECT_TRUE(in_unit_range(clahe(img, {3, 5, 1.5})));
    }
    const ImageGray small(6, 6, 0.5);
    EXPECT_THROW(clahe(small, {8, 8, 3.55}), Error);
    EXPECT_THROW(clahe(small, {2, 2, 0.0}), Error);
    EXPECT_THROW(clahe(small, {2, 2, -1.0}), Error);
}

TEST(Clahe, ColorKeepsGrayInputsGray) {
    Rng rng(2);
    const auto gray = random_gray(rng, 32, 24);
    const auto out = clahe_color(ImageColor::from_gray(gray));
    for (std::size_t i = 0; i < gray.size(); ++i) {
        EXPECT_NEAR(out.channel(0).data()[i], out.channel(1).data()[i], 1e-9);
        EXPECT_NEAR(out.channel(1).data()[i], out.channel(2).data()[i], 1e-9);
    }
    for (std::size_t c = 0; c < 3; ++c) EXPECT_TRUE(in_unit_range(out.channel(c)));
}

TEST(Lbp, ConstantImageIsAllOnes) {
    const auto codes = lbp_map(ImageGray(5, 4, 0.3));
    for (double v : codes.data()) EXPECT_EQ(v, 1.0);
}

TEST(Lbp, BrightCentreIsZero) {
    ImageGray img(3, 3, 0.1);
    img(1, 1) = 0.9;
    EXPECT_EQ(lbp_map(img)(1, 1), 0.0);
}

TEST(Lbp, VerticalStepEdge) {
    ImageGray img(8, 5);
    for (int y = 0; y < 5; ++y) {
        for (int x = 4; x < 8; ++x) img(x, y) = 1.0;
    }
    const auto codes = lbp_map(img);
    // The first bright column sees dark top-left, left and bottom-left neighbours:
    // bits 7, 1 and 0 cleared.
    for (int y = 1; y < 4; ++y) {
        for (int x = 1; x < 7; ++x) {
            const double expected = x == 4 ? 124.0 / 255.0 : 1.0;
            EXPECT_DOUBLE_EQ(codes(x, y), expected) << x << "," << y;
        }
    }
}

TEST(Lbp, SingleBitPositions) {
    // Clockwise from the top-left neighbour, which is the most significant bit.
    const int dx[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
    const int dy[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
    for (int k = 0; k < 8; ++k) {
        ImageGray img(3, 3, 0.0);
        img(1, 1) = 0.5;
        img(1 + dx[k], 1 + dy[k]) = 0.7;
        EXPECT_DOUBLE_EQ(lbp_map(img)(1, 1), static_cast<double>(1 << (7 - k)) / 255.0);
    }
}

TEST(Lbp, BorderReplicatesNearestInterior) {
    Rng rng(3);
    const auto codes = lbp_map(random_gray(rng, 7, 6));
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 7; ++x) {
            const int cx = std::clamp(x, 1, 5);
            const int cy = std::clamp(y, 1, 4);
            EXPECT_EQ(codes(x, y), codes(cx, cy));
        }
    }
    EXPECT_THROW(lbp_map(ImageGray(2, 5)), Error);
}

TEST(Lbp, PropertyInvariantUnderMonotoneRemap) {
    Rng rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        auto img = random_gray(rng, 12 + static_cast<int>(rng.index(10)), 9 + static_cast<int>(rng.index(10)));
        // Quantize so that ties occur and exercise the >= rule.
        for (auto& v : img.data()) v = std::floor(v * 8.0) / 8.0;
        auto remapped = img;
        const double k = 0.5 + 20.0 * rng.uniform();
        for (auto& v : remapped.data()) v = monotone_remap(v, k);
        EXPECT_EQ(lbp_map(img), lbp_map(remapped));
    }
}

TEST(Otsu, BimodalAndConstant) {
    ImageGray img(10, 10, 0.1);
    for (int y = 5; y < 10; ++y) {
        for (int x = 0; x < 10; ++x) img(x, y) = 0.9;
    }
    const double t = otsu_threshold(img);
    EXPECT_GT(t, 0.1);
    EXPECT_LT(t, 0.9);
    EXPECT_EQ(otsu_threshold(ImageGray(4, 4, 0.37)), 0.37);
}

TEST(Otsu, MatchesExhaustiveSearch) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        ImageGray img(16, 16);
        if (trial % 2 == 0) {
            // Three levels with random masses.
            const double levels[3] = {rng.uniform(0.0, 0.3), rng.uniform(0.35, 0.65), rng.uniform(0.7, 1.0)};
            for (auto& v : img.data()) v = levels[rng.index(3)];
        } else {
            for (auto& v : img.data()) v = rng.uniform() * rng.uniform();
        }
        double best = 0.0;
        const int t = oracle::otsu_exhaustive(img, &best);
        ASSERT_GE(t, 0);
        const double thr = otsu_threshold(img);
        // The library's split must attain the exhaustive maximum.
        std::array<long long, 256> hist{};
        for (double v : img.data()) hist[static_cast<std::size_t>(histogram_bin(v))]++;
        int split = -1;
        for (int b = 0; b < 256; ++b) {
            if (hist[static_cast<std::size_t>(b)] == 0) continue;
            const double centre = (b + 0.5) / 255.999;
            if (centre <= thr) split = b;
        }
        ASSERT_GE(split, 0);
        EXPECT_NEAR(oracle::between_class_variance(hist, split), best, 1e-12 * best);
        // Foreground `v > thr` is exactly the pixels above the split.
        for (double v : img.data()) EXPECT_EQ(v > thr, histogram_bin(v) > t) << "trial " << trial;
    }
}

TEST(Morph, SolidStaysSolidAndSpeckVanishes) {
    const auto solid = morph_clean(ImageGray(9, 7, 1.0));
    for (double v : solid.data()) EXPECT_EQ(v, 1.0);
    ImageGray speck(9, 9, 0.0);
    speck(4, 4) = 1.0;
    const auto cleaned = morph_clean(speck);
    for (double v : cleaned.data()) EXPECT_EQ(v, 0.0);
    ImageGray bad(3, 3, 0.0);
    bad(1, 1) = 0.5;
    EXPECT_THROW(morph_clean(bad), Error);
}

TEST(Morph, FiveByFiveSquareSurvives) {
    ImageGray mask(15, 15, 0.0);
    for (int y = 5; y < 10; ++y) {
        for (int x = 5; x < 10; ++x) mask(x, y) = 1.0;
    }
    const auto out = morph_clean(mask);
    const auto boxes = oracle::flood_fill_components(out, 1.0);
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_EQ(boxes[0], (BoundingBox{5, 5, 5, 5}));
    for (int y = 0; y < 15; ++y) {
        for (int x = 0; x < 15; ++x) {
            if (out(x, y) > 0.5) EXPECT_EQ(mask(x, y), 1.0);
        }
    }
    EXPECT_EQ(out(7, 7), 1.0);
}

TEST(CropResize, IdentityClampAndErrors) {
    Rng rng(6);
    const auto img = random_color(rng, 16, 16);
    const auto same = crop_resize(img, {0, 0, 16, 16}, 16);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < img.channel(c).size(); ++i) {
            EXPECT_NEAR(same.channel(c).data()[i], img.channel(c).data()[i], 1e-12);
        }
    }
    // Half outside: only the in-frame part is used.
    const auto clamped = crop_resize(img, {8, 8, 16, 16}, 8);
    const auto inside = crop_resize(img, {8, 8, 8, 8}, 8);
    EXPECT_EQ(clamped, inside);
    EXPECT_THROW(crop_resize(img, {20, 20, 4, 4}, 8), Error);
    EXPECT_THROW(crop_resize(img, {-10, 0, 5, 5}, 8), Error);
}

TEST(CropResize, BilinearCheckerboard) {
    ImageGray board(2, 2);
    board(0, 0) = 1.0;
    board(1, 1) = 1.0;
    const auto up = resize_bilinear(board, 4, 4);
    // Output centres map to source coordinates -0.25, 0.25, 0.75, 1.25 (clamped).
    EXPECT_NEAR(up(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(up(1, 1), 0.625, 1e-12);
    EXPECT_NEAR(up(1, 2), 0.375, 1e-12);
    EXPECT_NEAR(up(3, 3), 1.0, 1e-12);
    EXPECT_NEAR(up(3, 0), 0.0, 1e-12);
}

TEST(Imaging, PropertyOutputsStayInUnitRange) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = random_color(rng, 20 + static_cast<int>(rng.index(20)), 20 + static_cast<int>(rng.index(20)));
        const auto gray = to_grayscale(img);
        EXPECT_TRUE(in_unit_range(gray));
        EXPECT_TRUE(in_unit_range(clahe(gray)));
        EXPECT_TRUE(in_unit_range(lbp_map(gray)));
        const double t = otsu_threshold(gray);
        EXPECT_GE(t, 0.0);
        EXPECT_LE(t, 1.0);
        ImageGray mask = gray;
        for (auto& v : mask.data()) v = v > t ? 1.0 : 0.0;
        EXPECT_TRUE(in_unit_range(morph_clean(mask)));
        const auto crop = crop_resize(img, {3, 2, 11, 13}, 9);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_TRUE(in_unit_range(crop.channel(c)));
    }
}

TEST(ImageIo, RoundTripsAt8Bits) {
    const auto dir = std::filesystem::temp_directory_path() / "camtrap_test_imaging";
    std::filesystem::create_directories(dir);
    Rng rng(8);
    ImageColor img(13, 7);
    for (std::size_t c = 0; c < 3; ++c) {
        for (auto& v : img.channel(c).data()) v = static_cast<double>(rng.index(256)) / 255.0;
    }
    for (const char* ext : {".png", ".ppm"}) {
        const auto path = dir / (std::string("rgb") + ext);
        write_image(path, img);
        const auto back = read_image(path);
        ASSERT_EQ(back.width(), 13);
        ASSERT_EQ(back.height(), 7);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < img.channel(c).size(); ++i) {
                EXPECT_NEAR(back.channel(c).data()[i], img.channel(c).data()[i], 1e-12);
            }
        }
    }
    for (const char* ext : {".png", ".pgm"}) {
        const auto path = dir / (std::string("gray") + ext);
        write_image(path, img.channel(1));
        const auto back = read_image_gray(path);
        for (std::size_t i = 0; i < back.size(); ++i) EXPECT_NEAR(back.data()[i], img.channel(1).data()[i], 1e-12);
    }
    ImageGray mask(9, 5, 0.0);
    mask(2, 3) = 1.0;
    mask(8, 0) = 1.0;
    write_mask_png(dir / "mask.png", mask);
    EXPECT_EQ(read_image_gray(dir / "mask.png"), mask);
    EXPECT_THROW(read_image(dir / "missing.png"), Error);
    std::filesystem::remove_all(dir);
}
