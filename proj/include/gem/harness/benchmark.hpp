#pragma once

#include <string>
#include <vector>

#include "gem/model.hpp"

namespace gem::harness {

struct FpsReport {
    /// trials / summed forward time.
    double fps = 0.0;
    /// Mean and standard deviation of per-trial 1 / time.
    double mean_fps = 0.0;
    double stddev_fps = 0.0;
    int trials = 0;
    int warmup = 0;
    int64_t image_size = 0;
    std::string hardware;
    std::vector<double> seconds;
};

/// Times batch-1 forward passes on a fixed random image. Throws ParameterError when
/// trials < 10 or warmup < 3.
FpsReport benchmark_fps(GemModel& model, int64_t image_size, int trials = 10, int warmup = 3);

/// CPU model and thread count, e.g. "Intel(R) Xeon(R) ... x4 threads".
std::string hardware_string();

/// "GEM-Tiny | 16.09"
std::string format_fps_row(const std::string& name, const FpsReport& report);

}  // namespace gem::harness
