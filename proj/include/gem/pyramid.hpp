#pragma once

#include <torch/torch.h>

#include "gem/layers.hpp"

namespace gem {

struct PyramidConfig {
    int64_t dim = 256;
    Norm2dKind norm = Norm2dKind::Group;
};

/// Four NCHW maps at 4x, 2x, 1x and 0.5x the encoder grid, all with the same channel count.
struct FeaturePyramid {
    torch::Tensor c2, c3, c4, c5;
};

/// Builds C2..C5 from the single encoder map: two stacked stride-2 deconvolutions,
/// one stride-2 deconvolution, identity and stride-2 max pooling, each followed by a
/// 1x1 projection and normalization to the common width.
class SimpleFeaturePyramidImpl : public torch::nn::Module {
public:
    SimpleFeaturePyramidImpl(int64_t in_channels, const PyramidConfig& cfg);

    /// f16: (B, in_channels, h, w) with h and w even.
    FeaturePyramid forward(const torch::Tensor& f16);

    // Scale branches before their projections.
    torch::Tensor upsample4(const torch::Tensor& f16);
    torch::Tensor upsample2(const torch::Tensor& f16);
    static torch::Tensor downsample2(const torch::Tensor& f16);

    [[nodiscard]] int64_t dim() const { return cfg_.dim; }

private:
    PyramidConfig cfg_;
    int64_t in_channels_;
    torch::nn::ConvTranspose2d up4_a_{nullptr}, up4_b_{nullptr}, up2_{nullptr};
    torch::nn::AnyModule up4_norm_;
    torch::nn::Conv2d proj_[4] = {nullptr, nullptr, nullptr, nullptr};
    torch::nn::AnyModule norm_[4];
};
TORCH_MODULE(SimpleFeaturePyramid);

/// Throws DimensionError unless the pyramid has exact 2x ratios and a shared channel count.
void check_pyramid(const FeaturePyramid& p);

}  // namespace gem
