#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gem/error.hpp"

namespace gem {

/// Row-major single-channel raster.
template <typename T>
struct Plane {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int64_t h, int64_t w, T fill = T{}) : height(h), width(w), data(static_cast<size_t>(h * w), fill) {}

    [[nodiscard]] int64_t size() const { return height * width; }
    [[nodiscard]] bool empty() const { return data.empty(); }

    T& at(int64_t y, int64_t x) { return data[static_cast<size_t>(y * width + x)]; }
    const T& at(int64_t y, int64_t x) const { return data[static_cast<size_t>(y * width + x)]; }

    [[nodiscard]] std::span<const T> view() const { return data; }

    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Binary mask, values in {0, 1}.
using BinaryMask = Plane<uint8_t>;
/// Per-pixel probability map, values in [0, 1].
using ProbabilityMap = Plane<float>;

/// Interleaved HxWx3 image with values in [0, 1].
struct Image {
    int64_t height = 0;
    int64_t width = 0;
    std::vector<float> data;

    Image() = default;
    Image(int64_t h, int64_t w) : height(h), width(w), data(static_cast<size_t>(h * w * 3), 0.0f) {}

    float& at(int64_t y, int64_t x, int c) { return data[static_cast<size_t>((y * width + x) * 3 + c)]; }
    float at(int64_t y, int64_t x, int c) const { return data[static_cast<size_t>((y * width + x) * 3 + c)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

template <typename A, typename B>
void require_same_shape(const Plane<A>& a, const Plane<B>& b, const char* what) {
    if (a.height != b.height || a.width != b.width) {
        throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.height) + "x" +
                             std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                             std::to_string(b.width));
    }
}

}  // namespace gem
