#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "gem/decoder.hpp"
#include "gem/dqs.hpp"
#include "gem/encoder.hpp"
#include "gem/pyramid.hpp"

namespace gem {

struct ModelConfig {
    EncoderConfig encoder;
    PyramidConfig pyramid;
    DqsConfig dqs;
    DecoderConfig decoder;
};

struct ModelOutput {
    FeaturePyramid pyramid;
    /// Present when query selection or its auxiliary loss is enabled.
    std::optional<ScoreVector> scores;
    /// Present when queries are initialized by selection.
    std::optional<SelectedQueries> selection;
    MaskPrediction prediction;
};

/// Encoder -> simple feature pyramid -> query selection -> mask decoder.
class GemModelImpl : public torch::nn::Module {
public:
    explicit GemModelImpl(const ModelConfig& cfg);

    /// images: (B, 3, H, W) in [0, 1].
    ModelOutput forward(const torch::Tensor& images);

    [[nodiscard]] const ModelConfig& config() const { return cfg_; }

    /// Parameters of the image encoder (scaled learning rate group).
    std::vector<torch::Tensor> backbone_parameters();
    std::vector<torch::Tensor> head_parameters();

    ImageEncoder encoder{nullptr};
    SimpleFeaturePyramid pyramid{nullptr};
    QuerySelector selector{nullptr};
    MaskDecoder decoder{nullptr};

private:
    ModelConfig cfg_;
    torch::nn::Embedding query_content_{nullptr}, query_pos_{nullptr};
};
TORCH_MODULE(GemModel);

}  // namespace gem
