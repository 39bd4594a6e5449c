#pragma once

// Run configuration. Built-in defaults are patched by config files in order, then by
// "a.b.c=value" overrides. A file may name a base with "extends" (path relative to the
// file). "${NAME}" inside string values expands from the environment. Keys absent from the
// defaults are rejected.

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/datagen/jobs.hpp"
#include "gem/encoder.hpp"
#include "gem/losses.hpp"
#include "gem/metrics.hpp"
#include "gem/model.hpp"

namespace gem::harness {

enum class Stage { Pretrain, Finetune };
std::string to_string(Stage s);
Stage parse_stage(const std::string& s);

enum class BackboneInit { Random, Generic, Sam };
std::string to_string(BackboneInit b);
BackboneInit parse_backbone_init(const std::string& s);

struct EncoderInit {
    BackboneInit init = BackboneInit::Random;
    std::filesystem::path weights;
    WeightNaming naming = WeightNaming::Native;
    bool interpolate_pos_embed = true;
};

struct AugmentConfig {
    bool enabled = true;
    bool hflip = true;
    double scale_min = 0.8;
    double scale_max = 1.2;
};

struct TrainConfig {
    Stage stage = Stage::Pretrain;
    double lr = 2e-4;
    double weight_decay = 0.05;
    int64_t batch_size = 32;
    int64_t epochs_pretrain = 160;
    int64_t epochs_finetune = 80;
    /// Caps the run length when > 0.
    int64_t max_steps = 0;
    double backbone_lr_mult = 0.1;
    /// Step decay: lr *= lr_decay once lr_decay_at of the run has elapsed.
    double lr_decay_at = 0.9;
    double lr_decay = 0.1;
    /// 0 writes only the final checkpoint.
    int64_t checkpoint_every = 0;
    std::filesystem::path output_dir;
    std::filesystem::path manifest;
    std::filesystem::path init_checkpoint;
    AugmentConfig augment;
    int64_t prefetch = 2;
    uint64_t seed = 0;
    /// "float32" or "float64".
    std::string precision = "float32";

    [[nodiscard]] int64_t epochs() const { return stage == Stage::Pretrain ? epochs_pretrain : epochs_finetune; }
    [[nodiscard]] torch::Dtype dtype() const { return precision == "float64" ? torch::kFloat64 : torch::kFloat32; }
};

struct EvalConfig {
    double threshold = 0.5;
    metrics::Aggregation aggregation = metrics::Aggregation::PerImage;
    std::filesystem::path manifest;
};

struct DatagenConfig {
    datagen::JobOptions jobs;
    std::filesystem::path masks_manifest;
    std::filesystem::path output_dir;
    std::filesystem::path prompt_file;
    /// "stub" or "http".
    std::string backend = "stub";
    std::string endpoint;
    std::chrono::milliseconds timeout{60000};
    int retries = 2;
    std::chrono::milliseconds backoff{500};
    int parallelism = 4;
    std::string model_version;
};

struct CompareConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    uint64_t seed = 0;
    /// "encoder" or "http".
    std::string embedder = "encoder";
    std::string endpoint;
    std::chrono::milliseconds timeout{60000};
};

struct Config {
    nlohmann::json json;
    ModelConfig model;
    EncoderInit encoder_init;
    LossConfig loss;
    TrainConfig train;
    EvalConfig eval;
    DatagenConfig datagen;
    CompareConfig compare;

    /// 16 hex digits identifying the resolved configuration.
    [[nodiscard]] std::string hash() const;
};

nlohmann::json default_config_json();

/// Reads a config file, following "extends" chains.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Applies "a.b=value"; the value is parsed as JSON, falling back to a plain string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Defaults + files + overrides, environment-expanded. Throws ConfigError.
nlohmann::json resolve_config_json(const std::vector<std::filesystem::path>& files,
                                   const std::vector<std::string>& overrides = {});

/// Typed view of a resolved document. Throws ConfigError on unknown keys or bad values.
Config parse_config(const nlohmann::json& json);

Config load_config(const std::vector<std::filesystem::path>& files, const std::vector<std::string>& overrides = {});

}  // namespace gem::harness
