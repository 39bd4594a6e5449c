#pragma once

#include <array>
#include <vector>

#include "gem/grid.hpp"

namespace gem {

enum class TargetMode {
    Components,  ///< one target per 4-connected glass component
    SingleMask,  ///< the whole glass mask is one target
};

enum class SmallComponentPolicy { Merge, Drop };

struct TargetOptions {
    TargetMode mode = TargetMode::Components;
    /// Components below this pixel count are merged into the nearest large one, or dropped.
    int64_t min_component_px = 16;
    SmallComponentPolicy small = SmallComponentPolicy::Merge;
};

/// Normalized (cx, cy, w, h) box.
using Box = std::array<double, 4>;

struct Target {
    BinaryMask mask;
    Box box;
};

/// 4-connected components in raster order of their first pixel.
std::vector<BinaryMask> connected_components(const BinaryMask& mask);

/// Tight box of the foreground pixels, normalized by the mask size. Pixel (x, y) covers
/// [x, x+1) x [y, y+1).
Box tight_box(const BinaryMask& mask);

/// Empty input yields no targets.
std::vector<Target> build_targets(const BinaryMask& gt, const TargetOptions& options = {});

}  // namespace gem
