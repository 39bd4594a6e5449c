#include "gem/datagen/manifest.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gem/datagen/pipeline.hpp"
#include "gem/error.hpp"
#include "gem/image_io.hpp"

namespace gem::datagen {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Provenance p) {
    return p == Provenance::Real ? "real" : "synthetic";
}

std::string to_string(Split s) {
    return s == Split::Train ? "train" : "val";
}

Split parse_split(const std::string& s) {
    if (s == "train") {
        return Split::Train;
    }
    if (s == "val" || s == "validation") {
        return Split::Val;
    }
    throw DataError("unknown split '" + s + "'");
}

namespace {

Provenance parse_provenance(const std::string& s) {
    if (s == "real") {
        return Provenance::Real;
    }
    if (s == "synthetic") {
        return Provenance::Synthetic;
    }
    throw DataError("unknown provenance '" + s + "'");
}

}  // namespace

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open manifest " + path.string());
    }
    DatasetManifest manifest;
    manifest.base_dir = path.parent_path();
    std::string line;
    size_t line_no = 0;
    int64_t declared = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            auto rec = nlohmann::json::parse(line);
            if (line_no == 1 && rec.contains("format")) {
                if (rec.at("format") != "gem-manifest") {
                    throw DataError(path.string() + ": not a gem manifest");
                }
                manifest.scale_tag = rec.value("scale_tag", "");
                declared = rec.value("count", int64_t{-1});
                continue;
            }
            ManifestEntry e;
            e.image_path = rec.at("image_path").get<std::string>();
            e.mask_path = rec.at("mask_path").get<std::string>();
            e.provenance = parse_provenance(rec.at("provenance").get<std::string>());
            e.prompt = rec.value("prompt", "");
            e.seed = rec.value("seed", uint64_t{0});
            e.split = parse_split(rec.value("split", "train"));
            manifest.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    if (declared >= 0 && static_cast<size_t>(declared) != manifest.entries.size()) {
        throw DataError(path.string() + ": header declares " + std::to_string(declared) + " entries, found " +
                        std::to_string(manifest.entries.size()));
    }
    return manifest;
}

void DatasetManifest::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write manifest " + path.string());
    }
    ordered_json header;
    header["format"] = "gem-manifest";
    header["version"] = 1;
    header["scale_tag"] = scale_tag;
    header["count"] = entries.size();
    out << header.dump() << '\n';
    for (const auto& e : entries) {
        ordered_json rec;
        rec["image_path"] = e.image_path;
        rec["mask_path"] = e.mask_path;
        rec["provenance"] = to_string(e.provenance);
        rec["prompt"] = e.prompt;
        rec["seed"] = e.seed;
        rec["split"] = to_string(e.split);
        out << rec.dump() << '\n';
    }
}

DatasetManifest index_directory(const std::filesystem::path& images, const std::filesystem::path& masks, Split split) {
    if (!std::filesystem::is_directory(images) || !std::filesystem::is_directory(masks)) {
        throw IoError("image or mask directory missing");
    }
    DatasetManifest manifest;
    manifest.scale_tag = "real";
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(images)) {
        if (entry.is_regular_file()) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& img : files) {
        auto mask = masks / (img.stem().string() + ".png");
        if (!std::filesystem::exists(mask)) {
            continue;
        }
        ManifestEntry e;
        e.image_path = std::filesystem::absolute(img).string();
        e.mask_path = std::filesystem::absolute(mask).string();
        e.provenance = Provenance::Real;
        e.split = split;
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

void check_manifest(const DatasetManifest& manifest, bool validate_pairs) {
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        const auto image = manifest.resolve(e.image_path);
        const auto mask = manifest.resolve(e.mask_path);
        for (const auto& p : {image, mask}) {
            if (!std::filesystem::exists(p)) {
                throw DataError("manifest entry " + std::to_string(i) + ": missing file " + p.string());
            }
        }
        if (validate_pairs) {
            auto violations = validate_pair(io::read_image(image), io::read_mask_values(mask));
            if (!violations.empty()) {
                throw DataError("manifest entry " + std::to_string(i) + " invalid: " + violations.front());
            }
        }
    }
}

}  // namespace gem::datagen
