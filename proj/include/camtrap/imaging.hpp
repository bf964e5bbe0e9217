#pragma once

#include <array>

#include "camtrap/core.hpp"
#include "camtrap/image.hpp"

namespace camtrap {

inline constexpr int kHistogramBins = 256;

// Maps a [0,1] value onto one of 256 bins: floor(v * 255.999).
inline int histogram_bin(double v) {
    const int b = static_cast<int>(v * 255.999);
    return b < 0 ? 0 : (b > 255 ? 255 : b);
}

std::array<long long, kHistogramBins> histogram256(const ImageGray& img);

// Luminance 0.299 R + 0.587 G + 0.114 B, clamped to [0, 1].
ImageGray to_grayscale(const ImageColor& img);

struct ClaheParams {
    int tiles_x = 8;
    int tiles_y = 8;
    // Per-bin clip height as a multiple of the uniform level (tile pixels / 256).
    // 3.55 places the clip 1% of the tile mass above uniform.
    double clip_limit = 3.55;
};

ImageGray clahe(const ImageGray& img, const ClaheParams& params = {});
// Equalizes the luminance of a YCbCr transform; chroma is left untouched.
ImageColor clahe_color(const ImageColor& img, const ClaheParams& params = {});

// Radius-1, 8-neighbour local binary pattern. Neighbours are visited
// clockwise from the top-left one, which lands in the most significant bit;
// a neighbour >= the centre sets its bit. Codes are divided by 255. Border
// pixels copy the code of the nearest interior pixel.
ImageGray lbp_map(const ImageGray& img);

// Otsu threshold over the 256-bin histogram. Returns the upper edge of the
// lowest bin that maximizes the between-class variance, so foreground is
// `value > threshold`. A single-valued image returns that value.
double otsu_threshold(const ImageGray& img);

// 3x3 median filter followed by a 3x3 opening. Input must be binary.
ImageGray morph_clean(const ImageGray& mask);

// Clamps `box` to the image, then resizes the crop to out_size x out_size
// with bilinear interpolation (pixel-centre aligned).
ImageColor crop_resize(const ImageColor& img, const BoundingBox& box, int out_size);
ImageGray resize_bilinear(const ImageGray& img, int out_width, int out_height);

}  // namespace camtrap
