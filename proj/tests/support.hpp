#pragma once

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gem/datagen/backend.hpp"
#include "gem/datagen/manifest.hpp"
#include "gem/harness/config.hpp"
#include "gem/image_io.hpp"

namespace gem::test {

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("gem_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

inline BinaryMask rect_mask(int64_t h, int64_t w, int64_t y0, int64_t x0, int64_t y1, int64_t x1) {
    BinaryMask m(h, w);
    for (int64_t y = y0; y < y1; ++y) {
        for (int64_t x = x0; x < x1; ++x) {
            m.at(y, x) = 1;
        }
    }
    return m;
}

/// One or two random rectangles covering roughly 10-50% of the image.
inline BinaryMask random_glass_mask(int64_t size, std::mt19937_64& rng) {
    std::uniform_int_distribution<int64_t> extent(size / 4, size * 3 / 5);
    BinaryMask m(size, size);
    const int parts = 1 + static_cast<int>(rng() % 2);
    for (int p = 0; p < parts; ++p) {
        const auto h = extent(rng), w = extent(rng);
        const auto y0 = static_cast<int64_t>(rng() % static_cast<uint64_t>(size - h));
        const auto x0 = static_cast<int64_t>(rng() % static_cast<uint64_t>(size - w));
        for (int64_t y = y0; y < y0 + h; ++y) {
            for (int64_t x = x0; x < x0 + w; ++x) {
                m.at(y, x) = 1;
            }
        }
    }
    return m;
}

/// Writes `n` stub-generated pairs and their manifest under `dir`.
inline datagen::DatasetManifest stub_dataset(const std::filesystem::path& dir, int n, int64_t size, uint64_t seed,
                                             datagen::Split split = datagen::Split::Train) {
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "masks");
    std::mt19937_64 rng(seed);
    datagen::ProceduralBackend backend;
    datagen::DatasetManifest m;
    m.scale_tag = "1x";
    m.base_dir = dir;
    for (int i = 0; i < n; ++i) {
        const auto mask = random_glass_mask(size, rng);
        const auto name = "pair" + std::to_string(i) + ".png";
        io::write_image(dir / "images" / name, backend.generate(mask, "a photo of glass", seed + i, size));
        io::write_mask(dir / "masks" / name, mask);
        datagen::ManifestEntry e;
        e.image_path = "images/" + name;
        e.mask_path = "masks/" + name;
        e.provenance = datagen::Provenance::Synthetic;
        e.prompt = "a photo of glass";
        e.seed = seed + i;
        e.split = split;
        m.entries.push_back(e);
    }
    m.write(dir / "manifest.jsonl");
    return m;
}

inline std::filesystem::path config_path(const std::string& name) {
    return std::filesystem::path(GEM_SOURCE_DIR) / "configs" / name;
}

inline harness::Config micro_config(const std::vector<std::string>& overrides = {}) {
    return harness::load_config({config_path("gem_micro.json")}, overrides);
}

}  // namespace gem::test
