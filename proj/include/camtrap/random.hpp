#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace camtrap {

// Derives an independent stream seed from the manifest seed and an
// operation name, so every stage can be re-run alone and still see the
// same random numbers.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view op_name);

// Thin wrapper over mt19937_64 with distribution helpers whose output does
// not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::string_view op_name) : engine_(derive_seed(seed, op_name)) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer on [0, n); unbiased by rejection.
    std::uint64_t index(std::uint64_t n);

    // Standard normal via Box-Muller (one value per call, no caching).
    double normal();

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace camtrap
