#include "camtrap/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include <fmt/format.h>

#include "camtrap/error.hpp"
#include "camtrap/image_io.hpp"
#include "camtrap/random.hpp"

namespace camtrap {

void SyntheticConfig::validate() const {
    if (width < 8 || height < 8) throw Error("synthetic: frame must be at least 8x8");
    if (cameras < 1) throw Error("synthetic: need at least one camera");
    if (frames_per_camera < 10) throw Error("synthetic: need at least 10 frames per camera");
    if (genera.size() < 2) throw Error("synthetic: need at least 2 genera");
    for (const auto& g : genera) {
        if (g.empty() || g == kFalsePositiveName) throw Error("synthetic: invalid genus name '" + g + "'");
    }
    if (!(p_animal >= 0.0 && p_animal <= 1.0)) throw Error("synthetic: p_animal must lie in [0, 1]");
    if (!(p_new_animal >= 0.0 && p_new_animal <= 1.0)) throw Error("synthetic: p_new_animal must lie in [0, 1]");
    if (blob_min < 2 || blob_max < blob_min) throw Error("synthetic: invalid blob size range");
    if (blob_max > width || blob_max > height) throw Error("synthetic: blob larger than frame");
    const double min_pixels = min_area_fraction * width * height;
    // An ellipse covers about pi/4 of its box.
    if (std::numbers::pi / 4.0 * blob_min * blob_min < min_pixels) {
        throw Error("synthetic: smallest blob falls below the minimum region area");
    }
    if (!(step >= 0.0)) throw Error("synthetic: step must be non-negative");
    if (!(illumination_jitter >= 0.0 && illumination_jitter < 1.0)) {
        throw Error("synthetic: illumination jitter must lie in [0, 1)");
    }
    if (!(noise_sigma >= 0.0)) throw Error("synthetic: noise sigma must be non-negative");
}

namespace {

using Rgb = std::array<double, 3>;

struct Palette {
    Rgb dark;
    Rgb light;
};

Palette class_palette(std::size_t c) {
    static const std::array<Palette, 6> base{{
        {{0.10, 0.05, 0.00}, {1.00, 0.84, 0.40}},
        {{0.06, 0.06, 0.08}, {0.92, 0.92, 0.88}},
        {{0.30, 0.02, 0.08}, {0.55, 0.10, 0.20}},
        {{0.04, 0.12, 0.34}, {0.52, 0.78, 0.96}},
        {{0.40, 0.36, 0.02}, {0.98, 0.96, 0.50}},
        {{0.02, 0.26, 0.24}, {0.50, 0.94, 0.84}},
    }};
    return base[c % base.size()];
}

// Class texture value in [0, 1] at offset (u, v) inside a w x h extent.
double class_texture(std::size_t c, double u, double v, double w, double h) {
    const double freq = 1.0 + static_cast<double>(c / 3);
    switch (c % 3) {
        case 0:  // vertical stripes
            return std::sin(2.0 * std::numbers::pi * freq * 3.0 * u / w) >= 0.0 ? 1.0 : 0.0;
        case 1: {  // spots on a square lattice
            const double period = 6.0 / freq;
            const double du = std::fmod(u, period) - period / 2.0;
            const double dv = std::fmod(v, period) - period / 2.0;
            return du * du + dv * dv < (period * 0.3) * (period * 0.3) ? 1.0 : 0.0;
        }
        default: {  // vertical gradient, repeated with the class frequency
            const double t = std::fmod(freq * v / h, 1.0);
            return t;
        }
    }
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Two octaves of bilinear value noise in [0, 1].
ImageGray value_noise(int width, int height, Rng& rng) {
    ImageGray out(width, height, 0.0);
    const std::array<int, 2> cells{8, 3};
    const std::array<double, 2> weights{0.5, 0.5};
    for (std::size_t o = 0; o < cells.size(); ++o) {
        const int cell = cells[o];
        const int gw = width / cell + 2;
        const int gh = height / cell + 2;
        std::vector<double> grid(static_cast<std::size_t>(gw * gh));
        for (auto& g : grid) g = rng.uniform();
        auto at = [&](int gx, int gy) { return grid[static_cast<std::size_t>(gy * gw + gx)]; };
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const int gx = x / cell;
                const int gy = y / cell;
                const double tx = smoothstep(static_cast<double>(x % cell) / cell);
                const double ty = smoothstep(static_cast<double>(y % cell) / cell);
                const double top = at(gx, gy) * (1 - tx) + at(gx + 1, gy) * tx;
                const double bot = at(gx, gy + 1) * (1 - tx) + at(gx + 1, gy + 1) * tx;
                out(x, y) += weights[o] * (top * (1 - ty) + bot * ty);
            }
        }
    }
    return out;
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Animal {
    std::size_t genus = 0;
    int w = 0;
    int h = 0;
    double cx = 0.0;
    double cy = 0.0;
};

struct FramePlan {
    std::optional<Animal> animal;
};

std::vector<FramePlan> plan_camera(const SyntheticConfig& cfg, Rng& rng) {
    std::vector<FramePlan> plans(static_cast<std::size_t>(cfg.frames_per_camera));
    std::optional<Animal> current;
    for (auto& plan : plans) {
        if (rng.uniform() >= cfg.p_animal) continue;
        if (!current || rng.uniform() < cfg.p_new_animal) {
            Animal a;
            a.genus = static_cast<std::size_t>(rng.index(cfg.genera.size()));
            a.w = cfg.blob_min + static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.blob_max - cfg.blob_min + 1)));
            a.h = cfg.blob_min + static_cast<int>(rng.index(static_cast<std::uint64_t>(cfg.blob_max - cfg.blob_min + 1)));
            a.cx = rng.uniform(a.w / 2.0, cfg.width - a.w / 2.0);
            a.cy = rng.uniform(a.h / 2.0, cfg.height - a.h / 2.0);
            current = a;
        } else {
            current->cx += rng.uniform(-cfg.step, cfg.step);
            current->cy += rng.uniform(-cfg.step, cfg.step);
        }
        current->cx = std::clamp(current->cx, current->w / 2.0, cfg.width - current->w / 2.0);
        current->cy = std::clamp(current->cy, current->h / 2.0, cfg.height - current->h / 2.0);
        plan.animal = current;
    }
    return plans;
}

bool inside_ellipse(const Animal& a, int x, int y) {
    const double dx = (x + 0.5 - a.cx) / (a.w / 2.0);
    const double dy = (y + 0.5 - a.cy) / (a.h / 2.0);
    return dx * dx + dy * dy <= 1.0;
}

}  // namespace

SyntheticDataset gen_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::vector<std::string> names = cfg.genera;
    names.emplace_back(kFalsePositiveName);
    SyntheticDataset data;
    data.manifest.label_set = LabelSet(names);
    data.manifest.seed = seed;
    const auto fp = *data.manifest.label_set.false_positive();

    for (int cam = 0; cam < cfg.cameras; ++cam) {
        const std::string camera = fmt::format("cam{:02d}", cam + 1);
        Rng geometry(seed, "synthetic/geometry/" + camera);
        Rng background_rng(seed, "synthetic/background/" + camera);
        Rng appearance(seed, "synthetic/appearance/" + camera);

        const ImageGray noise = value_noise(cfg.width, cfg.height, background_rng);
        const Rgb tint{0.22 + 0.08 * background_rng.uniform(), 0.32 + 0.08 * background_rng.uniform(),
                       0.14 + 0.06 * background_rng.uniform()};
        const auto plans = plan_camera(cfg, geometry);

        for (std::size_t f = 0; f < plans.size(); ++f) {
            const double gain = 1.0 + appearance.uniform(-cfg.illumination_jitter, cfg.illumination_jitter);
            std::array<ImageGray, 3> planes;
            for (std::size_t c = 0; c < 3; ++c) {
                planes[c] = ImageGray(cfg.width, cfg.height);
                for (int y = 0; y < cfg.height; ++y) {
                    for (int x = 0; x < cfg.width; ++x) planes[c](x, y) = tint[c] + 0.30 * noise(x, y);
                }
            }
            SampleRecord rec;
            rec.camera_id = camera;
            rec.frame_index = static_cast<int>(f);
            rec.image_path = fmt::format("{}/frame_{:04d}.png", camera, f);
            if (const auto& a = plans[f].animal) {
                const Palette pal = class_palette(a->genus);
                const int x0 = static_cast<int>(std::floor(a->cx - a->w / 2.0));
                const int y0 = static_cast<int>(std::floor(a->cy - a->h / 2.0));
                int min_x = cfg.width, min_y = cfg.height, max_x = -1, max_y = -1;
                for (int y = std::max(0, y0); y <= std::min(cfg.height - 1, y0 + a->h); ++y) {
                    for (int x = std::max(0, x0); x <= std::min(cfg.width - 1, x0 + a->w); ++x) {
                        if (!inside_ellipse(*a, x, y)) continue;
                        const double t = class_texture(a->genus, x - (a->cx - a->w / 2.0), y - (a->cy - a->h / 2.0),
                                                       a->w, a->h);
                        for (std::size_t c = 0; c < 3; ++c) planes[c](x, y) = pal.dark[c] + t * (pal.light[c] - pal.dark[c]);
                        min_x = std::min(min_x, x);
                        min_y = std::min(min_y, y);
                        max_x = std::max(max_x, x);
                        max_y = std::max(max_y, y);
                    }
                }
                rec.label = data.manifest.label_set.at(cfg.genera[a->genus]);
                rec.gt_box = BoundingBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
            } else {
                rec.label = fp;
            }
            for (auto& p : planes) {
                for (auto& v : p.data()) {
                    const double n = cfg.noise_sigma > 0.0 ? cfg.noise_sigma * appearance.normal() : 0.0;
                    v = quantize(v * gain + n);
                }
            }
            data.frames.emplace_back(std::move(planes[0]), std::move(planes[1]), std::move(planes[2]));
            data.manifest.records.push_back(std::move(rec));
        }
    }
    data.manifest.canonicalize();
    return data;
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data) {
    if (data.frames.size() != data.manifest.records.size()) throw Error("write_synthetic: frame count mismatch");
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < data.frames.size(); ++i) {
        const auto path = dir / data.manifest.records[i].image_path;
        std::filesystem::create_directories(path.parent_path());
        write_image(path, data.frames[i]);
    }
    DatasetManifest m = data.manifest;
    m.base_dir = dir;
    save_manifest(dir / "manifest.jsonl", m);
}

}  // namespace camtrap
