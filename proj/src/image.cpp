#include "camtrap/image.hpp"

#include <algorithm>

#include "camtrap/error.hpp"

namespace camtrap {

ImageGray::ImageGray(int width, int height, double fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill) {
    if (width < 0 || height < 0) throw Error("negative image dimensions");
}

ImageGray::ImageGray(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw Error("negative image dimensions");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error("image data length does not match width x height");
    }
}

double ImageGray::clamped(int x, int y) const {
    x = std::clamp(x, 0, width_ - 1);
    y = std::clamp(y, 0, height_ - 1);
    return (*this)(x, y);
}

ImageColor::ImageColor(int width, int height, double r, double g, double b)
    : planes_{ImageGray(width, height, r), ImageGray(width, height, g), ImageGray(width, height, b)} {}

ImageColor::ImageColor(ImageGray r, ImageGray g, ImageGray b) : planes_{std::move(r), std::move(g), std::move(b)} {
    for (const auto& p : planes_) {
        if (p.width() != planes_[0].width() || p.height() != planes_[0].height()) {
            throw Error("color planes differ in size");
        }
    }
}

}  // namespace camtrap
