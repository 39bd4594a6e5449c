#pragma once

#include <vector>

#include <torch/torch.h>

#include "gem/grid.hpp"
#include "gem/layers.hpp"
#include "gem/pyramid.hpp"

namespace gem {

struct DecoderConfig {
    int64_t num_layers = 6;
    int64_t num_queries = 100;
    int64_t num_heads = 8;
    int64_t ffn_dim = 1024;
    double dropout = 0.0;
};

struct LayerPrediction {
    torch::Tensor queries;       ///< (B, N, d) updated queries after this layer
    torch::Tensor mask_logits;   ///< (B, N, H2, W2) at C2 resolution
    torch::Tensor class_logits;  ///< (B, N, 2): glass, no-object
    torch::Tensor boxes;         ///< (B, N, 4) normalized cx, cy, w, h
};

/// One entry per decoder layer, last layer last.
struct MaskPrediction {
    std::vector<LayerPrediction> layers;
    [[nodiscard]] const LayerPrediction& final() const { return layers.back(); }
};

/// Dot product of every query with every C2 pixel embedding.
/// queries (B, N, d), c2 (B, d, H, W) -> (B, N, H, W).
torch::Tensor mask_logits(const torch::Tensor& queries, const torch::Tensor& c2);

class DecoderLayerImpl : public torch::nn::Module {
public:
    DecoderLayerImpl(int64_t dim, int64_t num_heads, int64_t ffn_dim, double dropout);
    /// Cross-attention to memory, self-attention, feed-forward; post-norm residuals.
    torch::Tensor forward(const torch::Tensor& queries, const torch::Tensor& query_pos, const torch::Tensor& memory,
                          const torch::Tensor& memory_pos);

private:
    MultiHeadAttention cross_attn_{nullptr}, self_attn_{nullptr};
    torch::nn::Linear ffn1_{nullptr}, ffn2_{nullptr};
    torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr}, norm3_{nullptr};
    torch::nn::Dropout drop_{nullptr};
};
TORCH_MODULE(DecoderLayer);

class MaskDecoderImpl : public torch::nn::Module {
public:
    MaskDecoderImpl(int64_t dim, const DecoderConfig& cfg);

    /// queries/query_pos: (B, N, d). Memory is the flattened C3, C4, C5 with sine
    /// position and learned level encodings; C2 is the pixel embedding map.
    MaskPrediction forward(const torch::Tensor& queries, const torch::Tensor& query_pos, const FeaturePyramid& pyramid);

    [[nodiscard]] const DecoderConfig& config() const { return cfg_; }

private:
    LayerPrediction predict(const torch::Tensor& queries, const torch::Tensor& c2);

    int64_t dim_;
    DecoderConfig cfg_;
    std::vector<DecoderLayer> layers_;
    torch::Tensor level_embed_;
    torch::nn::Linear class_head_{nullptr};
    Mlp box_head_{nullptr};
};
TORCH_MODULE(MaskDecoder);

struct SemanticPrediction {
    ProbabilityMap probability;
    BinaryMask mask;
};

/// Per-pixel glass probability = max over queries of p(glass) * sigmoid(mask logit),
/// bilinearly resized to out_height x out_width, binarized at `threshold` (>=).
/// Uses the final layer of image `batch_index`.
SemanticPrediction predict_semantic(const MaskPrediction& pred, int64_t batch_index, int64_t out_height,
                                    int64_t out_width, double threshold = 0.5);

/// Same reduction on a single layer, kept as a tensor: (B, H2, W2).
torch::Tensor semantic_probability(const LayerPrediction& layer);

}  // namespace gem
