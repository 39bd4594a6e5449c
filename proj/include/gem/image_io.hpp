#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gem/grid.hpp"

namespace gem::io {

Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);

/// Reads a single-channel mask and scales 0..255 to [0, 1] without thresholding.
Plane<float> read_mask_values(const std::filesystem::path& path);
/// Reads a mask and binarizes it at 128.
BinaryMask read_mask(const std::filesystem::path& path);
/// Writes {0, 255} single-channel PNG.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
void write_probability(const std::filesystem::path& path, const ProbabilityMap& prob);

std::vector<uint8_t> encode_png(const Image& image);
std::vector<uint8_t> encode_png(const BinaryMask& mask);
Image decode_png_image(const std::vector<uint8_t>& bytes);
BinaryMask decode_png_mask(const std::vector<uint8_t>& bytes);

Image resize_bilinear(const Image& image, int64_t height, int64_t width);
BinaryMask resize_nearest(const BinaryMask& mask, int64_t height, int64_t width);
ProbabilityMap resize_bilinear(const ProbabilityMap& prob, int64_t height, int64_t width);

/// Alpha-blends a red tint over mask pixels.
Image overlay(const Image& image, const BinaryMask& mask, float alpha = 0.5f);

}  // namespace gem::io
