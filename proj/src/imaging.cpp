#include "camtrap/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "camtrap/error.hpp"

namespace camtrap {

std::array<long long, kHistogramBins> histogram256(const ImageGray& img) {
    std::array<long long, kHistogramBins> hist{};
    for (double v : img.data()) ++hist[static_cast<std::size_t>(histogram_bin(v))];
    return hist;
}

ImageGray to_grayscale(const ImageColor& img) {
    ImageGray out(img.width(), img.height());
    const auto& r = img.channel(0).data();
    const auto& g = img.channel(1).data();
    const auto& b = img.channel(2).data();
    auto& o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        // The weights do not sum to exactly 1 in binary, so neutral pixels pass through.
        if (r[i] == g[i] && g[i] == b[i]) o[i] = r[i];
        else o[i] = std::clamp(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i], 0.0, 1.0);
    }
    return out;
}

namespace {

// Tile i spans [edges[i], edges[i+1]).
std::vector<int> tile_edges(int extent, int tiles) {
    std::vector<int> edges(static_cast<std::size_t>(tiles) + 1);
    for (int i = 0; i <= tiles; ++i) {
        edges[static_cast<std::size_t>(i)] =
            static_cast<int>(static_cast<long long>(i) * extent / tiles);
    }
    return edges;
}

struct TileMapping {
    bool identity = false;  // single occupied bin
    std::array<double, kHistogramBins> lut{};

    double apply(double v) const { return identity ? v : lut[static_cast<std::size_t>(histogram_bin(v))]; }
};

TileMapping tile_mapping(const ImageGray& img, int x0, int x1, int y0, int y1, double clip_limit) {
    std::array<double, kHistogramBins> hist{};
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) hist[static_cast<std::size_t>(histogram_bin(img(x, y)))] += 1.0;
    }
    TileMapping map;
    const auto occupied = std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0.0; });
    if (occupied <= 1) {
        map.identity = true;
        return map;
    }
    const double n = static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0);
    const double limit = clip_limit * n / kHistogramBins;
    double excess = 0.0;
    for (auto& c : hist) {
        if (c > limit) {
            excess += c - limit;
            c = limit;
        }
    }
    const double share = excess / kHistogramBins;
    double cdf = 0.0;
    for (std::size_t b = 0; b < hist.size(); ++b) {
        cdf += hist[b] + share;
        map.lut[b] = std::clamp(cdf / n, 0.0, 1.0);
    }
    return map;
}

// Interpolation position of pixel centre `p` between tile centres.
struct Blend {
    int lo = 0;
    int hi = 0;
    double w = 0.0;  // weight of `hi`
};

Blend locate(double p, const std::vector<double>& centres) {
    const int last = static_cast<int>(centres.size()) - 1;
    if (p <= centres.front()) return {0, 0, 0.0};
    if (p >= centres.back()) return {last, last, 0.0};
    int i = 0;
    while (i + 1 < last && centres[static_cast<std::size_t>(i) + 1] <= p) ++i;
    const double a = centres[static_cast<std::size_t>(i)];
    const double b = centres[static_cast<std::size_t>(i) + 1];
    return {i, i + 1, (p - a) / (b - a)};
}

}  // namespace

ImageGray clahe(const ImageGray& img, const ClaheParams& params) {
    if (!(params.clip_limit > 0.0)) throw Error("clahe: clip limit must be positive");
    if (params.tiles_x < 1 || params.tiles_y < 1) throw Error("clahe: tile grid must be at least 1x1");
    if (params.tiles_x > img.width() || params.tiles_y > img.height()) {
        throw Error("clahe: tile grid larger than image");
    }
    const auto ex = tile_edges(img.width(), params.tiles_x);
    const auto ey = tile_edges(img.height(), params.tiles_y);

    std::vector<TileMapping> maps;
    maps.reserve(static_cast<std::size_t>(params.tiles_x * params.tiles_y));
    for (int ty = 0; ty < params.tiles_y; ++ty) {
        for (int tx = 0; tx < params.tiles_x; ++tx) {
            maps.push_back(tile_mapping(img, ex[static_cast<std::size_t>(tx)], ex[static_cast<std::size_t>(tx) + 1],
                                        ey[static_cast<std::size_t>(ty)], ey[static_cast<std::size_t>(ty) + 1],
                                        params.clip_limit));
        }
    }
    auto centres = [](const std::vector<int>& edges) {
        std::vector<double> c(edges.size() - 1);
        for (std::size_t i = 0; i + 1 < edges.size(); ++i) c[i] = 0.5 * (edges[i] + edges[i + 1]);
        return c;
    };
    const auto cx = centres(ex);
    const auto cy = centres(ey);
    auto tile = [&](int tx, int ty) -> const TileMapping& {
        return maps[static_cast<std::size_t>(ty * params.tiles_x + tx)];
    };

    ImageGray out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        const Blend by = locate(y + 0.5, cy);
        for (int x = 0; x < img.width(); ++x) {
            const Blend bx = locate(x + 0.5, cx);
            const double v = img(x, y);
            const double top = (1.0 - bx.w) * tile(bx.lo, by.lo).apply(v) + bx.w * tile(bx.hi, by.lo).apply(v);
            const double bottom = (1.0 - bx.w) * tile(bx.lo, by.hi).apply(v) + bx.w * tile(bx.hi, by.hi).apply(v);
            out(x, y) = std::clamp((1.0 - by.w) * top + by.w * bottom, 0.0, 1.0);
        }
    }
    return out;
}

ImageColor clahe_color(const ImageColor& img, const ClaheParams& params) {
    const auto& r = img.channel(0).data();
    const auto& g = img.channel(1).data();
    const auto& b = img.channel(2).data();
    const auto luma = to_grayscale(img);
    const auto eq = clahe(luma, params);

    ImageColor out(img.width(), img.height());
    auto& ro = out.channel(0).data();
    auto& go = out.channel(1).data();
    auto& bo = out.channel(2).data();
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double cb = -0.168736 * r[i] - 0.331264 * g[i] + 0.5 * b[i];
        const double cr = 0.5 * r[i] - 0.418688 * g[i] - 0.081312 * b[i];
        const double y = eq.data()[i];
        ro[i] = std::clamp(y + 1.402 * cr, 0.0, 1.0);
        go[i] = std::clamp(y - 0.344136 * cb - 0.714136 * cr, 0.0, 1.0);
        bo[i] = std::clamp(y + 1.772 * cb, 0.0, 1.0);
    }
    return out;
}

ImageGray lbp_map(const ImageGray& img) {
    const int w = img.width();
    const int h = img.height();
    if (w < 3 || h < 3) throw Error("lbp_map: image smaller than 3x3");
    static constexpr std::array<std::array<int, 2>, 8> kOffsets{{
        {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0},
    }};
    ImageGray out(w, h);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double c = img(x, y);
            int code = 0;
            for (const auto& [dx, dy] : kOffsets) {
                code = (code << 1) | (img(x + dx, y + dy) >= c ? 1 : 0);
            }
            out(x, y) = code / 255.0;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x > 0 && x < w - 1 && y > 0 && y < h - 1) continue;
            out(x, y) = out(std::clamp(x, 1, w - 2), std::clamp(y, 1, h - 2));
        }
    }
    return out;
}

double otsu_threshold(const ImageGray& img) {
    if (img.empty()) throw Error("otsu_threshold: empty image");
    const auto hist = histogram256(img);
    const auto occupied = std::count_if(hist.begin(), hist.end(), [](long long c) { return c > 0; });
    if (occupied < 2) return *std::max_element(img.data().begin(), img.data().end());

    long long total = 0;
    long long total_sum = 0;
    for (int b = 0; b < kHistogramBins; ++b) {
        total += hist[static_cast<std::size_t>(b)];
        total_sum += b * hist[static_cast<std::size_t>(b)];
    }
    long long n0 = 0;
    long long s0 = 0;
    double best = -1.0;
    int best_bin = 0;
    for (int k = 0; k < kHistogramBins - 1; ++k) {
        n0 += hist[static_cast<std::size_t>(k)];
        s0 += k * hist[static_cast<std::size_t>(k)];
        const long long n1 = total - n0;
        const long long s1 = total_sum - s0;
        if (n0 == 0 || n1 == 0) continue;
        // Between-class variance scaled by N^2; integer numerator keeps the
        // comparison free of accumulation error.
        const double diff = static_cast<double>(s0 * n1 - s1 * n0);
        const double var = diff * diff / (static_cast<double>(n0) * static_cast<double>(n1));
        if (var > best) {
            best = var;
            best_bin = k;
        }
    }
    return (best_bin + 1) / 255.999;
}

namespace {

ImageGray neighbourhood_filter(const ImageGray& in, int min_ones) {
    ImageGray out(in.width(), in.height());
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            int ones = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) ones += in.clamped(x + dx, y + dy) > 0.5 ? 1 : 0;
            }
            out(x, y) = ones >= min_ones ? 1.0 : 0.0;
        }
    }
    return out;
}

}  // namespace

ImageGray morph_clean(const ImageGray& mask) {
    for (double v : mask.data()) {
        if (v != 0.0 && v != 1.0) throw Error("morph_clean: mask is not binary");
    }
    if (mask.empty()) return mask;
    const auto median = neighbourhood_filter(mask, 5);
    const auto eroded = neighbourhood_filter(median, 9);
    return neighbourhood_filter(eroded, 1);
}

ImageGray resize_bilinear(const ImageGray& img, int out_width, int out_height) {
    if (img.empty()) throw Error("resize: empty image");
    if (out_width < 1 || out_height < 1) throw Error("resize: output size must be positive");
    ImageGray out(out_width, out_height);
    const double sx = static_cast<double>(img.width()) / out_width;
    const double sy = static_cast<double>(img.height()) / out_height;
    for (int y = 0; y < out_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double wx = fx - x0;
            const double top = (1.0 - wx) * img(x0, y0) + wx * img(x1, y0);
            const double bottom = (1.0 - wx) * img(x0, y1) + wx * img(x1, y1);
            out(x, y) = std::clamp((1.0 - wy) * top + wy * bottom, 0.0, 1.0);
        }
    }
    return out;
}

ImageColor crop_resize(const ImageColor& img, const BoundingBox& box, int out_size) {
    const int x0 = std::max(box.x, 0);
    const int y0 = std::max(box.y, 0);
    const int x1 = std::min(box.right(), img.width());
    const int y1 = std::min(box.bottom(), img.height());
    if (x1 <= x0 || y1 <= y0) throw Error("crop_resize: box lies outside the image");

    std::array<ImageGray, 3> planes;
    for (std::size_t c = 0; c < 3; ++c) {
        ImageGray crop(x1 - x0, y1 - y0);
        const auto& src = img.channel(c);
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) crop(x - x0, y - y0) = src(x, y);
        }
        planes[c] = resize_bilinear(crop, out_size, out_size);
    }
    return ImageColor(std::move(planes[0]), std::move(planes[1]), std::move(planes[2]));
}

}  // namespace camtrap
