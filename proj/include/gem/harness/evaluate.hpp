#pragma once

#include <filesystem>
#include <string>

#include "gem/datagen/manifest.hpp"
#include "gem/decoder.hpp"
#include "gem/harness/config.hpp"
#include "gem/metrics.hpp"
#include "gem/model.hpp"

namespace gem::harness {

/// Glass probability and mask at the image's own resolution.
SemanticPrediction predict(GemModel& model, const Image& image, double threshold = 0.5);

/// Scores every manifest pair. When `prediction_dir` is set, predicted masks are written there.
metrics::MetricsReport evaluate(GemModel& model, const datagen::DatasetManifest& manifest, const EvalConfig& config,
                                const std::filesystem::path& prediction_dir = {});

/// Evaluates a pretrain-stage checkpoint with no parameter updates. Throws ConfigError for
/// a finetune checkpoint.
metrics::MetricsReport zero_shot_eval(const std::filesystem::path& checkpoint, const datagen::DatasetManifest& manifest,
                                      const EvalConfig& config);

}  // namespace gem::harness
