#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "camtrap/core.hpp"
#include "camtrap/image.hpp"
#include "camtrap/regions.hpp"

namespace camtrap {

// Scene parameters of the synthetic camera-trap generator.
struct SyntheticConfig {
    int width = 80;
    int height = 60;
    int cameras = 5;
    int frames_per_camera = 120;
    std::vector<std::string> genera{"Alpha", "Beta", "Gamma"};
    double p_animal = 0.75;       // chance that a frame contains an animal
    double p_new_animal = 0.15;   // chance that an animal frame starts a new individual
    int blob_min = 14;            // side range of the animal's elliptical extent
    int blob_max = 20;
    double step = 4.0;            // random-walk step in pixels
    double illumination_jitter = 0.08;  // per-frame gain drawn from [1 - j, 1 + j]
    double noise_sigma = 0.004;
    double min_area_fraction = kDefaultMinAreaFraction;

    void validate() const;
};

// Frames are parallel to manifest.records, which are in canonical order.
struct SyntheticDataset {
    std::vector<ImageColor> frames;
    DatasetManifest manifest;
};

// Every camera has a fixed value-noise background; each frame holds at most
// one animal drawn as an ellipse with a class-specific texture (stripes,
// spots or a gradient, at a class-specific frequency) that moves by a random
// walk. Frames without an animal carry the FP label. Geometry, background and
// per-frame appearance use separate random streams, so illumination and noise
// settings never move a box. Pixel values are multiples of 1/255 so the
// dataset survives a round trip through 8-bit PNG.
SyntheticDataset gen_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

// Writes <dir>/<camera>/frame_NNNN.png and <dir>/manifest.jsonl.
void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data);

}  // namespace camtrap
