#pragma once

// Small building blocks shared by the model modules.

#include <string>

#include <torch/torch.h>

namespace gem {

/// LayerNorm over the channel axis of an NCHW tensor (per pixel).
class LayerNorm2dImpl : public torch::nn::Module {
public:
    explicit LayerNorm2dImpl(int64_t channels, double eps = 1e-6);
    torch::Tensor forward(const torch::Tensor& x);

    torch::Tensor weight;
    torch::Tensor bias;

private:
    double eps_;
};
TORCH_MODULE(LayerNorm2d);

enum class Norm2dKind { Group, Layer };

Norm2dKind parse_norm2d(const std::string& name);

/// GroupNorm with the largest group count <= 32 that divides `channels`, or LayerNorm2d.
torch::nn::AnyModule make_norm2d(Norm2dKind kind, int64_t channels);

/// Plain multi-head scaled dot-product attention with separate q/k/v projections.
class MultiHeadAttentionImpl : public torch::nn::Module {
public:
    MultiHeadAttentionImpl(int64_t dim, int64_t num_heads);
    /// query: (B, Nq, D); key/value: (B, Nk, D)
    torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& key, const torch::Tensor& value);

    torch::nn::Linear q_proj{nullptr}, k_proj{nullptr}, v_proj{nullptr}, out_proj{nullptr};

private:
    int64_t num_heads_;
};
TORCH_MODULE(MultiHeadAttention);

/// Feed-forward stack of `num_layers` linears with ReLU between them.
class MlpImpl : public torch::nn::Module {
public:
    MlpImpl(int64_t in_dim, int64_t hidden_dim, int64_t out_dim, int64_t num_layers);
    torch::Tensor forward(torch::Tensor x);

private:
    std::vector<torch::nn::Linear> layers_;
};
TORCH_MODULE(Mlp);

/// Splits heads: (B, N, H*Dh) -> (B, H, N, Dh).
torch::Tensor split_heads(const torch::Tensor& x, int64_t num_heads);
torch::Tensor merge_heads(const torch::Tensor& x);

/// Sinusoidal embedding of normalized (x, y) coordinates in [0, 1].
/// coords: (..., 2) with x first. Returns (..., dim); dim must be divisible by 4.
torch::Tensor sine_embed(const torch::Tensor& coords, int64_t dim, double temperature = 10000.0);

/// Sine embedding for every cell of an h x w grid, evaluated at cell centers. Returns (h*w, dim).
torch::Tensor grid_sine_embed(int64_t h, int64_t w, int64_t dim, const torch::TensorOptions& options);

}  // namespace gem
