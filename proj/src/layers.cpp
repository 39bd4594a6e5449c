#include "gem/layers.hpp"

#include <cmath>
#include <numbers>

#include "gem/error.hpp"

namespace gem {

namespace F = torch::nn::functional;

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps) : eps_(eps) {
    weight = register_parameter("weight", torch::ones({channels}));
    bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
    auto mean = x.mean(1, true);
    auto var = (x - mean).pow(2).mean(1, true);
    auto y = (x - mean) / torch::sqrt(var + eps_);
    return y * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1});
}

Norm2dKind parse_norm2d(const std::string& name) {
    if (name == "group") {
        return Norm2dKind::Group;
    }
    if (name == "layer") {
        return Norm2dKind::Layer;
    }
    throw ConfigError("unknown norm kind '" + name + "' (expected group|layer)");
}

torch::nn::AnyModule make_norm2d(Norm2dKind kind, int64_t channels) {
    if (kind == Norm2dKind::Layer) {
        return torch::nn::AnyModule(LayerNorm2d(channels));
    }
    int64_t groups = std::min<int64_t>(32, channels);
    while (channels % groups != 0) {
        --groups;
    }
    return torch::nn::AnyModule(torch::nn::GroupNorm(torch::nn::GroupNormOptions(groups, channels)));
}

torch::Tensor split_heads(const torch::Tensor& x, int64_t num_heads) {
    const auto b = x.size(0);
    const auto n = x.size(1);
    return x.view({b, n, num_heads, x.size(2) / num_heads}).transpose(1, 2);
}

torch::Tensor merge_heads(const torch::Tensor& x) {
    const auto b = x.size(0);
    const auto n = x.size(2);
    return x.transpose(1, 2).reshape({b, n, x.size(1) * x.size(3)});
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int64_t dim, int64_t num_heads) : num_heads_(num_heads) {
    if (dim % num_heads != 0) {
        throw DimensionError("attention dim " + std::to_string(dim) + " not divisible by heads " +
                             std::to_string(num_heads));
    }
    q_proj = register_module("q_proj", torch::nn::Linear(dim, dim));
    k_proj = register_module("k_proj", torch::nn::Linear(dim, dim));
    v_proj = register_module("v_proj", torch::nn::Linear(dim, dim));
    out_proj = register_module("out_proj", torch::nn::Linear(dim, dim));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& key,
                                              const torch::Tensor& value) {
    auto q = split_heads(q_proj(query), num_heads_);
    auto k = split_heads(k_proj(key), num_heads_);
    auto v = split_heads(v_proj(value), num_heads_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(-1)));
    auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) * scale, -1);
    return out_proj(merge_heads(torch::matmul(attn, v)));
}

MlpImpl::MlpImpl(int64_t in_dim, int64_t hidden_dim, int64_t out_dim, int64_t num_layers) {
    for (int64_t i = 0; i < num_layers; ++i) {
        const int64_t a = i == 0 ? in_dim : hidden_dim;
        const int64_t b = i == num_layers - 1 ? out_dim : hidden_dim;
        layers_.push_back(register_module("fc" + std::to_string(i), torch::nn::Linear(a, b)));
    }
}

torch::Tensor MlpImpl::forward(torch::Tensor x) {
    for (size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i](x);
        if (i + 1 < layers_.size()) {
            x = torch::relu(x);
        }
    }
    return x;
}

torch::Tensor sine_embed(const torch::Tensor& coords, int64_t dim, double temperature) {
    if (dim % 4 != 0) {
        throw DimensionError("sine embedding dim must be divisible by 4, got " + std::to_string(dim));
    }
    const int64_t half = dim / 2;
    auto opts = coords.options();
    auto idx = torch::arange(half, opts);
    auto freq = torch::pow(temperature, 2.0 * torch::floor(idx / 2.0) / static_cast<double>(half));
    auto scaled = coords * (2.0 * std::numbers::pi);
    auto embed_axis = [&](const torch::Tensor& c) {
        auto v = c.unsqueeze(-1) / freq;  // (..., half)
        auto even = torch::sin(v.index({torch::indexing::Ellipsis, torch::indexing::Slice(0, torch::indexing::None, 2)}));
        auto odd = torch::cos(v.index({torch::indexing::Ellipsis, torch::indexing::Slice(1, torch::indexing::None, 2)}));
        return torch::stack({even, odd}, -1).flatten(-2);
    };
    auto ex = embed_axis(scaled.select(-1, 0));
    auto ey = embed_axis(scaled.select(-1, 1));
    return torch::cat({ey, ex}, -1);
}

torch::Tensor grid_sine_embed(int64_t h, int64_t w, int64_t dim, const torch::TensorOptions& options) {
    auto ys = (torch::arange(h, options) + 0.5) / static_cast<double>(h);
    auto xs = (torch::arange(w, options) + 0.5) / static_cast<double>(w);
    auto grid = torch::meshgrid({ys, xs}, "ij");
    auto coords = torch::stack({grid[1].reshape({-1}), grid[0].reshape({-1})}, -1);
    return sine_embed(coords, dim);
}

}  // namespace gem
