#include "gem/model.hpp"

#include <unordered_set>

#include "gem/error.hpp"

namespace gem {

GemModelImpl::GemModelImpl(const ModelConfig& cfg) : cfg_(cfg) {
    const auto d = cfg_.pyramid.dim;
    encoder = register_module("encoder", ImageEncoder(cfg_.encoder));
    pyramid = register_module("pyramid", SimpleFeaturePyramid(cfg_.encoder.out_channels(), cfg_.pyramid));
    if (cfg_.dqs.enabled || cfg_.dqs.extra_loss) {
        selector = register_module("selector", QuerySelector(d));
    }
    if (!cfg_.dqs.enabled) {
        query_content_ = register_module("query_content", torch::nn::Embedding(cfg_.decoder.num_queries, d));
        query_pos_ = register_module("query_pos", torch::nn::Embedding(cfg_.decoder.num_queries, d));
    }
    decoder = register_module("decoder", MaskDecoder(d, cfg_.decoder));
}

ModelOutput GemModelImpl::forward(const torch::Tensor& images) {
    ModelOutput out;
    out.pyramid = pyramid(encoder(images));
    const auto& p = out.pyramid;
    const auto batch = images.size(0);
    const auto n = cfg_.decoder.num_queries;

    torch::Tensor queries, query_pos;
    if (!selector.is_empty()) {
        auto f = selector->aggregate(p.c3, p.c4, p.c5);
        out.scores = selector->classify(f);
        if (cfg_.dqs.enabled) {
            auto sel = select_topk(*out.scores, f, n, cfg_.dqs.ranking);
            const auto w = out.scores->width;
            const auto h = out.scores->height;
            auto pos = sel.positions.to(f.scalar_type());
            auto xs = (torch::remainder(pos, static_cast<double>(w)) + 0.5) / static_cast<double>(w);
            auto ys = (torch::floor(pos / static_cast<double>(w)) + 0.5) / static_cast<double>(h);
            query_pos = sine_embed(torch::stack({xs, ys}, -1), f.size(1));
            queries = sel.embeddings;
            out.selection = std::move(sel);
        }
    }
    if (!cfg_.dqs.enabled) {
        queries = query_content_->weight.unsqueeze(0).expand({batch, n, -1});
        query_pos = query_pos_->weight.unsqueeze(0).expand({batch, n, -1});
    }
    out.prediction = decoder(queries, query_pos, p);
    return out;
}

std::vector<torch::Tensor> GemModelImpl::backbone_parameters() {
    return encoder->parameters();
}

std::vector<torch::Tensor> GemModelImpl::head_parameters() {
    std::unordered_set<const void*> backbone;
    for (const auto& t : encoder->parameters()) {
        backbone.insert(t.unsafeGetTensorImpl());
    }
    std::vector<torch::Tensor> out;
    for (const auto& t : parameters()) {
        if (!backbone.contains(t.unsafeGetTensorImpl())) {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace gem
