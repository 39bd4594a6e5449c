#include "gem/datagen/jobs.hpp"

#include "gem/error.hpp"

namespace gem::datagen {

PromptMode parse_prompt_mode(const std::string& name) {
    if (name == "multiple") {
        return PromptMode::Multiple;
    }
    if (name == "single") {
        return PromptMode::Single;
    }
    throw ConfigError("unknown prompt mode '" + name + "' (expected multiple|single)");
}

const std::map<std::string, int64_t>& default_scale_counts() {
    static const std::map<std::string, int64_t> counts = {
        {"1x", 3912}, {"5x", 23467}, {"10x", 46933}, {"20x", 93865}};
    return counts;
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

uint64_t job_seed(const std::string& mask_id, size_t replica) {
    return splitmix64(fnv1a(mask_id) ^ splitmix64(static_cast<uint64_t>(replica)));
}

std::vector<GenerationJob> build_jobs(const std::vector<MaskRecord>& masks, const PromptBank& bank,
                                      const JobOptions& options) {
    if (masks.empty()) {
        throw DataError("build_jobs: empty mask set");
    }
    for (const auto& m : masks) {
        if (m.split == Split::Val) {
            throw LeakageError("validation-split mask '" + m.id + "' may not condition generation");
        }
    }
    bank.validate();
    int64_t count = options.count;
    if (count <= 0) {
        auto it = options.scale_counts.find(options.scale_tag);
        if (it == options.scale_counts.end()) {
            throw ConfigError("unknown scale tag '" + options.scale_tag + "'");
        }
        count = it->second;
    }

    std::vector<GenerationJob> jobs;
    jobs.reserve(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        const auto& mask = masks[static_cast<size_t>(i) % masks.size()];
        GenerationJob job;
        job.mask_id = mask.id;
        job.mask_path = mask.path;
        job.replica = static_cast<size_t>(i) / masks.size();
        job.seed = job_seed(mask.id, job.replica);
        const size_t prompt = options.prompt_mode == PromptMode::Multiple ? job.seed % kPromptCount : 0;
        job.prompt = bank.instantiate(prompt);
        job.target_size = options.target_size;
        jobs.push_back(std::move(job));
    }
    return jobs;
}

std::vector<MaskRecord> masks_from_manifest(const DatasetManifest& manifest) {
    std::vector<MaskRecord> out;
    for (const auto& e : manifest.entries) {
        MaskRecord r;
        r.id = std::filesystem::path(e.mask_path).stem().string();
        r.path = manifest.resolve(e.mask_path).string();
        r.split = e.split;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace gem::datagen
