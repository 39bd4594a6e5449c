#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gem/datagen/manifest.hpp"
#include "gem/datagen/prompt_bank.hpp"

namespace gem::datagen {

struct MaskRecord {
    std::string id;
    std::string path;
    Split split = Split::Train;
};

enum class PromptMode {
    Multiple,  ///< template chosen by seed mod 23
    Single,    ///< always the first template
};

PromptMode parse_prompt_mode(const std::string& name);

struct GenerationJob {
    std::string mask_id;
    std::string mask_path;
    size_t replica = 0;
    std::string prompt;
    uint64_t seed = 0;
    int64_t target_size = 384;
};

/// Pair counts per scale tag: 1x 3912, 5x 23467, 10x 46933, 20x 93865.
const std::map<std::string, int64_t>& default_scale_counts();

/// Deterministic seed of (mask id, replica index).
uint64_t job_seed(const std::string& mask_id, size_t replica);

struct JobOptions {
    std::string scale_tag = "1x";
    /// Overrides the scale's count when > 0.
    int64_t count = 0;
    std::map<std::string, int64_t> scale_counts = default_scale_counts();
    int64_t target_size = 384;
    PromptMode prompt_mode = PromptMode::Multiple;
};

/// Cycles masks round-robin until the scale count is reached. Throws LeakageError if any
/// mask belongs to the validation split, DataError on an empty mask set or unknown scale.
std::vector<GenerationJob> build_jobs(const std::vector<MaskRecord>& masks, const PromptBank& bank,
                                      const JobOptions& options);

/// Mask records from the train entries of a real-data manifest; val entries are kept so the
/// leakage guard can see them.
std::vector<MaskRecord> masks_from_manifest(const DatasetManifest& manifest);

}  // namespace gem::datagen
