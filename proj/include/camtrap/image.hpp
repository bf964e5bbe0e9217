#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace camtrap {

// Single-channel raster, row-major, values in [0, 1].
class ImageGray {
public:
    ImageGray() = default;
    ImageGray(int width, int height, double fill = 0.0);
    ImageGray(int width, int height, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int x, int y) { return data_[index(x, y)]; }
    double operator()(int x, int y) const { return data_[index(x, y)]; }
    // Border-replicating read.
    double clamped(int x, int y) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const ImageGray&, const ImageGray&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

// Three planes (R, G, B) of identical geometry.
class ImageColor {
public:
    ImageColor() = default;
    ImageColor(int width, int height, double r = 0.0, double g = 0.0, double b = 0.0);
    ImageColor(ImageGray r, ImageGray g, ImageGray b);
    static ImageColor from_gray(const ImageGray& gray) { return ImageColor(gray, gray, gray); }

    int width() const { return planes_[0].width(); }
    int height() const { return planes_[0].height(); }
    bool empty() const { return planes_[0].empty(); }

    ImageGray& channel(std::size_t c) { return planes_[c]; }
    const ImageGray& channel(std::size_t c) const { return planes_[c]; }

    friend bool operator==(const ImageColor&, const ImageColor&) = default;

private:
    std::array<ImageGray, 3> planes_;
};

}  // namespace camtrap
