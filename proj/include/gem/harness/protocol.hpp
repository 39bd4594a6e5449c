#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gem/harness/benchmark.hpp"
#include "gem/metrics.hpp"

namespace gem::harness {

/// Supervised benchmark run: train on one split, score the other, time inference.
struct ResultsTableOptions {
    std::vector<std::filesystem::path> config_files;
    std::vector<std::string> overrides;
    std::filesystem::path train_manifest;
    std::filesystem::path val_manifest;
    std::filesystem::path output_dir;
    std::string method = "GEM-Tiny";
    int fps_trials = 10;
};

struct ResultsTable {
    metrics::MetricsReport report;
    FpsReport fps;
    std::filesystem::path checkpoint;
    /// Header and method row, e.g. "GEM-Tiny | 0.770 | 0.865 | 0.032 | 8.21 | 16.09".
    std::vector<std::string> table;
};

/// Writes train/, results.txt and results.json under output_dir. Throws ConfigError / DataError.
ResultsTable run_results_table(const ResultsTableOptions& options);

std::string format_results_row(const std::string& method, const metrics::ImageMetrics& m, double fps);

}  // namespace gem::harness
