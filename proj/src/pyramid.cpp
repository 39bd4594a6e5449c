#include "gem/pyramid.hpp"

#include <sstream>

#include "gem/error.hpp"

namespace gem {

namespace F = torch::nn::functional;

SimpleFeaturePyramidImpl::SimpleFeaturePyramidImpl(int64_t in_channels, const PyramidConfig& cfg)
    : cfg_(cfg), in_channels_(in_channels) {
    if (in_channels % 4 != 0) {
        throw DimensionError("pyramid input channels must be divisible by 4, got " + std::to_string(in_channels));
    }
    const int64_t half = in_channels / 2;
    const int64_t quarter = in_channels / 4;
    using Deconv = torch::nn::ConvTranspose2d;
    using DeconvOpts = torch::nn::ConvTranspose2dOptions;
    up4_a_ = register_module("up4_a", Deconv(DeconvOpts(in_channels, half, 2).stride(2)));
    up4_norm_ = make_norm2d(cfg_.norm, half);
    register_module("up4_norm", up4_norm_.ptr());
    up4_b_ = register_module("up4_b", Deconv(DeconvOpts(half, quarter, 2).stride(2)));
    up2_ = register_module("up2", Deconv(DeconvOpts(in_channels, half, 2).stride(2)));

    const int64_t branch_channels[4] = {quarter, half, in_channels, in_channels};
    for (int i = 0; i < 4; ++i) {
        const auto name = "c" + std::to_string(i + 2);
        proj_[i] = register_module(name + "_proj",
                                   torch::nn::Conv2d(torch::nn::Conv2dOptions(branch_channels[i], cfg_.dim, 1)));
        norm_[i] = make_norm2d(cfg_.norm, cfg_.dim);
        register_module(name + "_norm", norm_[i].ptr());
    }
}

torch::Tensor SimpleFeaturePyramidImpl::upsample4(const torch::Tensor& f16) {
    return up4_b_(torch::gelu(up4_norm_.forward(up4_a_(f16))));
}

torch::Tensor SimpleFeaturePyramidImpl::upsample2(const torch::Tensor& f16) {
    return up2_(f16);
}

torch::Tensor SimpleFeaturePyramidImpl::downsample2(const torch::Tensor& f16) {
    return F::max_pool2d(f16, F::MaxPool2dFuncOptions(2).stride(2));
}

FeaturePyramid SimpleFeaturePyramidImpl::forward(const torch::Tensor& f16) {
    if (f16.dim() != 4 || f16.size(1) != in_channels_) {
        throw DimensionError("pyramid expects (B, " + std::to_string(in_channels_) + ", h, w) input");
    }
    if (f16.size(2) % 2 != 0 || f16.size(3) % 2 != 0) {
        std::ostringstream msg;
        msg << "pyramid needs an even encoder grid, got " << f16.size(2) << "x" << f16.size(3);
        throw DimensionError(msg.str());
    }
    const torch::Tensor branches[4] = {upsample4(f16), upsample2(f16), f16, downsample2(f16)};
    torch::Tensor out[4];
    for (int i = 0; i < 4; ++i) {
        out[i] = norm_[i].forward(proj_[i](branches[i]));
    }
    return {out[0], out[1], out[2], out[3]};
}

void check_pyramid(const FeaturePyramid& p) {
    const torch::Tensor* levels[4] = {&p.c2, &p.c3, &p.c4, &p.c5};
    for (int i = 0; i < 4; ++i) {
        if (levels[i]->dim() != 4 || levels[i]->size(1) != p.c2.size(1)) {
            throw DimensionError("pyramid levels must share a channel count");
        }
    }
    for (int i = 0; i + 1 < 4; ++i) {
        for (int axis = 2; axis < 4; ++axis) {
            if (levels[i]->size(axis) != 2 * levels[i + 1]->size(axis)) {
                throw DimensionError("pyramid levels must have exact 2x spatial ratios");
            }
        }
    }
}

}  // namespace gem
