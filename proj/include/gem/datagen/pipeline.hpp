#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "gem/datagen/backend.hpp"
#include "gem/datagen/jobs.hpp"
#include "gem/datagen/manifest.hpp"
#include "gem/grid.hpp"

namespace gem::datagen {

/// Returns human-readable violations; empty means the pair is usable.
/// Checks: equal dims, strictly binary mask, foreground fraction in (0, 0.95).
std::vector<std::string> validate_pair(const Image& image, const Plane<float>& mask);

struct FailureRecord {
    size_t job_index = 0;
    std::string mask_id;
    uint64_t seed = 0;
    std::string reason;
};

struct RunOptions {
    std::filesystem::path output_dir;
    int parallelism = 4;
    int retries = 2;
    std::chrono::milliseconds backoff{100};
};

struct GenerationResult {
    DatasetManifest manifest;
    std::vector<FailureRecord> failures;
};

/// Generates one image per job with up to `parallelism` workers. Transient failures are
/// retried with exponential backoff; exhausted or invalid jobs become failure records.
/// Writes images/, masks/, manifest.jsonl and failures.jsonl under output_dir; manifest
/// entries are in job order.
GenerationResult run_generation(const std::vector<GenerationJob>& jobs, GenerationBackend& backend,
                                const RunOptions& options, const std::string& scale_tag);

}  // namespace gem::datagen
