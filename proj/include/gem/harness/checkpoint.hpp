#pragma once

// Checkpoints are safetensors files:
//   model.<name>                       parameters and buffers
//   optim.<name>.exp_avg / .exp_avg_sq AdamW moments (when saved with an optimizer)
// and metadata keys epoch, step, stage, config_hash, config (the resolved JSON document),
// optim.step.

#include <filesystem>
#include <string>

#include <torch/torch.h>

#include "gem/harness/config.hpp"
#include "gem/model.hpp"

namespace gem::harness {

struct CheckpointMeta {
    int64_t epoch = 0;
    int64_t step = 0;
    Stage stage = Stage::Pretrain;
    std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, GemModel& model, const Config& config,
                     const CheckpointMeta& meta, const torch::optim::AdamW* optimizer = nullptr);

struct LoadedCheckpoint {
    GemModel model{nullptr};
    Config config;
    CheckpointMeta meta;
};

/// Rebuilds the model from the embedded configuration. Throws IoError / LoadError.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint parameters into an existing model; every model tensor must be present
/// with the same shape.
CheckpointMeta load_model_state(const std::filesystem::path& path, GemModel& model);

/// Restores AdamW moments saved alongside `model`'s parameters.
void load_optimizer_state(const std::filesystem::path& path, GemModel& model, torch::optim::AdamW& optimizer);

}  // namespace gem::harness
