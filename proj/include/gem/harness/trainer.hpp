#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <vector>

#include "gem/datagen/manifest.hpp"
#include "gem/harness/config.hpp"
#include "gem/harness/data.hpp"
#include "gem/losses.hpp"
#include "gem/model.hpp"

namespace gem::harness {

/// Seeds torch, builds the model at the configured precision and applies the backbone
/// initializer (random, or weights loaded from model.encoder.weights).
GemModel build_model(const Config& config);

/// Total loss of one batch, including the query-selection term when enabled.
LossResult batch_loss(GemModel& model, const Batch& batch, const Config& config);

struct StepRecord {
    int64_t step = 0;
    int64_t epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::map<std::string, double> terms;
};

struct TrainResult {
    GemModel model{nullptr};
    std::vector<StepRecord> log;
    /// Final checkpoint; empty when nothing was written.
    std::filesystem::path checkpoint;
};

struct TrainHooks {
    /// Write loss_log.jsonl and checkpoints under train.output_dir.
    bool write_files = true;
    std::function<void(const StepRecord&)> on_step;
};

/// Runs config.train.stage on `manifest`. AdamW with a reduced backbone learning rate and a
/// single step decay. A non-finite loss throws NumericError after writing nan_batch.json.
TrainResult train(const Config& config, const datagen::DatasetManifest& manifest, const TrainHooks& hooks = {});

/// Mean batch loss over the manifest without augmentation or parameter updates.
double evaluate_loss(GemModel& model, const datagen::DatasetManifest& manifest, const Config& config);

}  // namespace gem::harness
