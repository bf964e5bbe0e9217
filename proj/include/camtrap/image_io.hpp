#pragma once

#include <filesystem>

#include "camtrap/image.hpp"

namespace camtrap {

// 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette) and binary PGM/PPM.
// Samples map linearly 0..255 <-> [0, 1]; alpha is dropped.
ImageColor read_image(const std::filesystem::path& path);
ImageGray read_image_gray(const std::filesystem::path& path);

// Format is chosen by extension: .png, .pgm, .ppm.
void write_image(const std::filesystem::path& path, const ImageColor& img);
void write_image(const std::filesystem::path& path, const ImageGray& img);

// 1-bit grayscale PNG; pixels > 0.5 are written as 1.
void write_mask_png(const std::filesystem::path& path, const ImageGray& mask);

}  // namespace camtrap
