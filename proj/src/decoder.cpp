#include "gem/decoder.hpp"

#include "gem/error.hpp"

namespace gem {

namespace F = torch::nn::functional;

torch::Tensor mask_logits(const torch::Tensor& queries, const torch::Tensor& c2) {
    if (queries.size(-1) != c2.size(1)) {
        throw DimensionError("query dim " + std::to_string(queries.size(-1)) + " != pixel embedding dim " +
                             std::to_string(c2.size(1)));
    }
    return torch::einsum("bnd,bdhw->bnhw", {queries, c2});
}

DecoderLayerImpl::DecoderLayerImpl(int64_t dim, int64_t num_heads, int64_t ffn_dim, double dropout) {
    cross_attn_ = register_module("cross_attn", MultiHeadAttention(dim, num_heads));
    self_attn_ = register_module("self_attn", MultiHeadAttention(dim, num_heads));
    ffn1_ = register_module("ffn1", torch::nn::Linear(dim, ffn_dim));
    ffn2_ = register_module("ffn2", torch::nn::Linear(ffn_dim, dim));
    norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    norm3_ = register_module("norm3", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    drop_ = register_module("dropout", torch::nn::Dropout(dropout));
}

torch::Tensor DecoderLayerImpl::forward(const torch::Tensor& queries, const torch::Tensor& query_pos,
                                        const torch::Tensor& memory, const torch::Tensor& memory_pos) {
    auto q = norm1_(queries + drop_(cross_attn_(queries + query_pos, memory + memory_pos, memory)));
    auto qp = q + query_pos;
    q = norm2_(q + drop_(self_attn_(qp, qp, q)));
    return norm3_(q + drop_(ffn2_(drop_(torch::relu(ffn1_(q))))));
}

MaskDecoderImpl::MaskDecoderImpl(int64_t dim, const DecoderConfig& cfg) : dim_(dim), cfg_(cfg) {
    if (cfg_.num_layers < 1) {
        throw DimensionError("decoder needs at least one layer");
    }
    for (int64_t i = 0; i < cfg_.num_layers; ++i) {
        layers_.push_back(
            register_module("layer" + std::to_string(i), DecoderLayer(dim, cfg_.num_heads, cfg_.ffn_dim, cfg_.dropout)));
    }
    level_embed_ = register_parameter("level_embed", torch::randn({3, dim}) * 0.02);
    class_head_ = register_module("class_head", torch::nn::Linear(dim, 2));
    box_head_ = register_module("box_head", Mlp(dim, dim, 4, 3));
}

LayerPrediction MaskDecoderImpl::predict(const torch::Tensor& queries, const torch::Tensor& c2) {
    LayerPrediction out;
    out.queries = queries;
    out.mask_logits = mask_logits(queries, c2);
    out.class_logits = class_head_(queries);
    out.boxes = torch::sigmoid(box_head_(queries));
    return out;
}

MaskPrediction MaskDecoderImpl::forward(const torch::Tensor& queries, const torch::Tensor& query_pos,
                                        const FeaturePyramid& pyramid) {
    check_pyramid(pyramid);
    if (queries.size(-1) != dim_ || pyramid.c2.size(1) != dim_) {
        throw DimensionError("decoder dim " + std::to_string(dim_) + " does not match queries/pyramid");
    }
    std::vector<torch::Tensor> tokens, positions;
    const torch::Tensor* levels[3] = {&pyramid.c3, &pyramid.c4, &pyramid.c5};
    for (int l = 0; l < 3; ++l) {
        const auto& level = *levels[l];
        tokens.push_back(level.flatten(2).transpose(1, 2));
        auto pos = grid_sine_embed(level.size(2), level.size(3), dim_, level.options()) + level_embed_[l];
        positions.push_back(pos.unsqueeze(0).expand({level.size(0), -1, -1}));
    }
    const auto memory = torch::cat(tokens, 1);
    const auto memory_pos = torch::cat(positions, 1);

    MaskPrediction out;
    auto q = queries;
    for (auto& layer : layers_) {
        q = layer(q, query_pos, memory, memory_pos);
        out.layers.push_back(predict(q, pyramid.c2));
    }
    return out;
}

torch::Tensor semantic_probability(const LayerPrediction& layer) {
    auto glass = torch::softmax(layer.class_logits, -1).select(-1, 0);  // B N
    auto masks = torch::sigmoid(layer.mask_logits);                       // B N H W
    return std::get<0>((masks * glass.unsqueeze(-1).unsqueeze(-1)).max(1));
}

SemanticPrediction predict_semantic(const MaskPrediction& pred, int64_t batch_index, int64_t out_height,
                                    int64_t out_width, double threshold) {
    torch::NoGradGuard no_grad;
    auto prob = semantic_probability(pred.final())
                    .slice(0, batch_index, batch_index + 1)
                    .unsqueeze(1)
                    .to(torch::kFloat32);
    if (prob.size(2) != out_height || prob.size(3) != out_width) {
        prob = F::interpolate(prob, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{out_height, out_width})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
    }
    prob = prob.clamp(0.0, 1.0).reshape({-1}).to(torch::kCPU).contiguous();
    SemanticPrediction out{ProbabilityMap(out_height, out_width), BinaryMask(out_height, out_width)};
    const float* src = prob.data_ptr<float>();
    std::copy(src, src + out.probability.size(), out.probability.data.begin());
    for (int64_t i = 0; i < out.mask.size(); ++i) {
        out.mask.data[i] = out.probability.data[i] >= threshold ? 1 : 0;
    }
    return out;
}

}  // namespace gem
