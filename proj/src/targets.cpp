#include "gem/targets.hpp"

#include <limits>
#include <queue>

namespace gem {

std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
    std::vector<BinaryMask> components;
    std::vector<int32_t> label(static_cast<size_t>(mask.size()), -1);
    const int64_t dy[4] = {-1, 1, 0, 0};
    const int64_t dx[4] = {0, 0, -1, 1};
    for (int64_t y = 0; y < mask.height; ++y) {
        for (int64_t x = 0; x < mask.width; ++x) {
            if (!mask.at(y, x) || label[y * mask.width + x] >= 0) {
                continue;
            }
            const auto id = static_cast<int32_t>(components.size());
            BinaryMask comp(mask.height, mask.width);
            std::queue<std::pair<int64_t, int64_t>> frontier;
            frontier.emplace(y, x);
            label[y * mask.width + x] = id;
            while (!frontier.empty()) {
                auto [cy, cx] = frontier.front();
                frontier.pop();
                comp.at(cy, cx) = 1;
                for (int k = 0; k < 4; ++k) {
                    const auto ny = cy + dy[k];
                    const auto nx = cx + dx[k];
                    if (ny < 0 || nx < 0 || ny >= mask.height || nx >= mask.width) {
                        continue;
                    }
                    auto& l = label[ny * mask.width + nx];
                    if (mask.at(ny, nx) && l < 0) {
                        l = id;
                        frontier.emplace(ny, nx);
                    }
                }
            }
            components.push_back(std::move(comp));
        }
    }
    return components;
}

Box tight_box(const BinaryMask& mask) {
    int64_t x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    for (int64_t y = 0; y < mask.height; ++y) {
        for (int64_t x = 0; x < mask.width; ++x) {
            if (mask.at(y, x)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    }
    if (x1 < 0) {
        return {0.0, 0.0, 0.0, 0.0};
    }
    const double w = static_cast<double>(mask.width);
    const double h = static_cast<double>(mask.height);
    const double bw = static_cast<double>(x1 + 1 - x0);
    const double bh = static_cast<double>(y1 + 1 - y0);
    return {(static_cast<double>(x0) + bw / 2.0) / w, (static_cast<double>(y0) + bh / 2.0) / h, bw / w, bh / h};
}

namespace {

int64_t pixel_count(const BinaryMask& m) {
    int64_t n = 0;
    for (auto v : m.data) {
        n += v ? 1 : 0;
    }
    return n;
}

}  // namespace

std::vector<Target> build_targets(const BinaryMask& gt, const TargetOptions& options) {
    std::vector<Target> targets;
    if (options.mode == TargetMode::SingleMask) {
        if (pixel_count(gt) > 0) {
            BinaryMask mask = gt;
            for (auto& v : mask.data) {
                v = v ? 1 : 0;
            }
            targets.push_back({mask, tight_box(mask)});
        }
        return targets;
    }

    auto components = connected_components(gt);
    std::vector<BinaryMask> large, small;
    for (auto& c : components) {
        (pixel_count(c) >= options.min_component_px ? large : small).push_back(std::move(c));
    }
    if (options.small == SmallComponentPolicy::Merge && !large.empty()) {
        for (const auto& s : small) {
            double cy = 0, cx = 0;
            int64_t n = 0;
            for (int64_t y = 0; y < s.height; ++y) {
                for (int64_t x = 0; x < s.width; ++x) {
                    if (s.at(y, x)) {
                        cy += static_cast<double>(y);
                        cx += static_cast<double>(x);
                        ++n;
                    }
                }
            }
            cy /= static_cast<double>(n);
            cx /= static_cast<double>(n);
            size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (size_t i = 0; i < large.size(); ++i) {
                for (int64_t y = 0; y < large[i].height; ++y) {
                    for (int64_t x = 0; x < large[i].width; ++x) {
                        if (!large[i].at(y, x)) {
                            continue;
                        }
                        const double d = (cy - y) * (cy - y) + (cx - x) * (cx - x);
                        if (d < best_d) {
                            best_d = d;
                            best = i;
                        }
                    }
                }
            }
            for (int64_t i = 0; i < s.size(); ++i) {
                large[best].data[i] |= s.data[i];
            }
        }
    }
    for (auto& m : large) {
        auto box = tight_box(m);
        targets.push_back({std::move(m), box});
    }
    return targets;
}

}  // namespace gem
