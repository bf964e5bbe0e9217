#include "camtrap/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "camtrap/error.hpp"
#include "camtrap/imaging.hpp"

namespace camtrap {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
    if (!f) throw Error("cannot open image " + path.string());
    return f;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string lower_ext(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

ImageColor read_png(const std::filesystem::path& path) {
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    std::vector<png_byte> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("corrupt PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const auto rowbytes = png_get_rowbytes(png, info);
    pixels.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const int w = static_cast<int>(width);
    const int h = static_cast<int>(height);
    ImageColor out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.channel(c)(x, y) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 3 + c] / 255.0;
            }
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
               const std::vector<std::vector<png_byte>>& rows) {
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed writing PNG " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Skips whitespace and '#' comments in a netpbm header.
int read_pnm_int(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    if (!in || v < 0) throw Error("bad netpbm header");
    return v;
}

ImageColor read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5" && magic != "P6") throw Error("unsupported netpbm type in " + path.string());
    const int w = read_pnm_int(in);
    const int h = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (maxval != 255) throw Error("only 8-bit netpbm is supported: " + path.string());
    in.get();
    const int channels = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw Error("truncated netpbm " + path.string());
    ImageColor out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * w + x) * channels;
            for (std::size_t c = 0; c < 3; ++c) out.channel(c)(x, y) = buf[base + (channels == 3 ? c : 0)] / 255.0;
        }
    }
    return out;
}

void write_pnm(const std::filesystem::path& path, const ImageColor& img, bool gray) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write image " + path.string());
    out << (gray ? "P5" : "P6") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (gray) {
                out.put(static_cast<char>(to_byte(img.channel(0)(x, y))));
            } else {
                for (std::size_t c = 0; c < 3; ++c) out.put(static_cast<char>(to_byte(img.channel(c)(x, y))));
            }
        }
    }
}

}  // namespace

ImageColor read_image(const std::filesystem::path& path) {
    const auto ext = lower_ext(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm" || ext == ".ppm") return read_pnm(path);
    throw Error("unsupported image format: " + path.string());
}

ImageGray read_image_gray(const std::filesystem::path& path) { return to_grayscale(read_image(path)); }

void write_image(const std::filesystem::path& path, const ImageColor& img) {
    const auto ext = lower_ext(path);
    if (ext == ".ppm") return write_pnm(path, img, false);
    if (ext == ".pgm") return write_pnm(path, img, true);
    if (ext != ".png") throw Error("unsupported image format: " + path.string());
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y) {
        auto& row = rows[static_cast<std::size_t>(y)];
        row.reserve(static_cast<std::size_t>(img.width()) * 3);
        for (int x = 0; x < img.width(); ++x) {
            for (std::size_t c = 0; c < 3; ++c) row.push_back(to_byte(img.channel(c)(x, y)));
        }
    }
    write_png(path, img.width(), img.height(), 3, 8, rows);
}

void write_image(const std::filesystem::path& path, const ImageGray& img) {
    const auto ext = lower_ext(path);
    if (ext == ".pgm" || ext == ".ppm") return write_pnm(path, ImageColor::from_gray(img), ext == ".pgm");
    if (ext != ".png") throw Error("unsupported image format: " + path.string());
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y) {
        auto& row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < img.width(); ++x) row.push_back(to_byte(img(x, y)));
    }
    write_png(path, img.width(), img.height(), 1, 8, rows);
}

void write_mask_png(const std::filesystem::path& path, const ImageGray& mask) {
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(mask.height()));
    const std::size_t row_bytes = (static_cast<std::size_t>(mask.width()) + 7) / 8;
    for (int y = 0; y < mask.height(); ++y) {
        auto& row = rows[static_cast<std::size_t>(y)];
        row.assign(row_bytes, 0);
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) > 0.5) row[static_cast<std::size_t>(x) / 8] |= static_cast<png_byte>(0x80 >> (x % 8));
        }
    }
    write_png(path, mask.width(), mask.height(), 1, 1, rows);
}

}  // namespace camtrap
