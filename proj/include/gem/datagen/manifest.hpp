#pragma once

// Dataset manifests are JSON-lines files. The first line is a header
//   {"format":"gem-manifest","version":1,"scale_tag":"1x","count":N}
// followed by one record per pair with fields in this fixed order:
//   {"image_path":..., "mask_path":..., "provenance":"real"|"synthetic",
//    "prompt":..., "seed":..., "split":"train"|"val"}
// Relative paths resolve against the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gem::datagen {

enum class Provenance { Real, Synthetic };
enum class Split { Train, Val };

std::string to_string(Provenance p);
std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
    std::string image_path;
    std::string mask_path;
    Provenance provenance = Provenance::Real;
    std::string prompt;
    uint64_t seed = 0;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::string scale_tag;
    std::vector<ManifestEntry> entries;
    /// Directory relative paths are resolved against.
    std::filesystem::path base_dir;

    [[nodiscard]] size_t count() const { return entries.size(); }
    [[nodiscard]] std::filesystem::path resolve(const std::string& path) const;

    static DatasetManifest read(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;
};

/// Pairs `<images>/<stem>.*` with `<masks>/<stem>.png` into a real-data manifest.
DatasetManifest index_directory(const std::filesystem::path& images, const std::filesystem::path& masks, Split split);

/// Throws DataError naming the first missing file or invalid pair.
void check_manifest(const DatasetManifest& manifest, bool validate_pairs);

}  // namespace gem::datagen
