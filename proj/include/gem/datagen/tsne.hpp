#pragma once

#include <cstdint>
#include <array>
#include <vector>

namespace gem::datagen {

struct TsneOptions {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iterations = 250;
    uint64_t seed = 0;
};

/// Exact t-SNE of `points` (n rows of equal length) into 2-D. Throws ParameterError when
/// n - 1 < 3 * perplexity.
std::vector<std::array<double, 2>> tsne(const std::vector<std::vector<double>>& points, const TsneOptions& options);

}  // namespace gem::datagen
