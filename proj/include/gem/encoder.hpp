#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace gem {

struct EncoderConfig {
    int64_t image_size = 384;
    int64_t patch_size = 16;
    int64_t embed_dim = 192;
    int64_t depth = 4;
    int64_t num_heads = 3;
    double mlp_ratio = 4.0;
    /// Keep SAM's two-conv neck after the transformer blocks. Off by default.
    bool keep_neck = false;
    int64_t neck_dim = 256;

    /// Throws DimensionError on an inconsistent configuration.
    void validate() const;
    [[nodiscard]] int64_t grid_size() const { return image_size / patch_size; }
    [[nodiscard]] int64_t out_channels() const { return keep_neck ? neck_dim : embed_dim; }
};

class EncoderBlockImpl : public torch::nn::Module {
public:
    EncoderBlockImpl(int64_t dim, int64_t num_heads, double mlp_ratio);
    torch::Tensor forward(const torch::Tensor& x);

private:
    int64_t num_heads_;
    torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
    torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(EncoderBlock);

/// Plain ViT: patchify, learned absolute position grid, pre-norm blocks.
/// Output keeps a single 1/patch_size scale.
class ImageEncoderImpl : public torch::nn::Module {
public:
    explicit ImageEncoderImpl(const EncoderConfig& cfg);

    /// images: (B, 3, H, W) with values in [0, 1]. Returns (B, C, H/p, W/p).
    torch::Tensor forward(const torch::Tensor& images);

    [[nodiscard]] const EncoderConfig& config() const { return cfg_; }

    /// (1, grid, grid, embed_dim), channels-last as in SAM checkpoints.
    torch::Tensor pos_embed;

private:
    EncoderConfig cfg_;
    torch::nn::Conv2d patch_proj_{nullptr};
    std::vector<EncoderBlock> blocks_;
    torch::nn::Sequential neck_{nullptr};
    torch::Tensor pixel_mean_, pixel_std_;
};
TORCH_MODULE(ImageEncoder);

/// Key naming of an external weight file.
enum class WeightNaming {
    Native,  ///< this library's own parameter names
    Sam,     ///< SAM image encoder ("image_encoder.blocks.0.mlp.lin1.weight", ...)
    Timm,    ///< generic ImageNet ViT ("blocks.0.mlp.fc1.weight", pos_embed with a cls token)
};

WeightNaming parse_weight_naming(const std::string& name);

struct LoadReport {
    std::vector<std::string> loaded;
    /// External keys recognised but intentionally unused (relative position tables, prompt decoder, ...).
    std::vector<std::string> ignored;
};

/// Overwrites every encoder parameter from `path`. Throws LoadError naming every missing,
/// unexpected or wrong-shaped key; IoError when the file is absent. Position grids of a
/// different size are bilinearly resampled when `interpolate_pos_embed` is set.
LoadReport load_encoder_weights(ImageEncoder& encoder, const std::filesystem::path& path,
                                WeightNaming naming = WeightNaming::Native, bool interpolate_pos_embed = true);

/// Builds an encoder from `cfg` and loads its weights.
ImageEncoder load_pretrained(const std::filesystem::path& path, const EncoderConfig& cfg,
                             WeightNaming naming = WeightNaming::Native);

/// Writes encoder parameters under the given naming (the inverse of the load remap).
void save_encoder_weights(ImageEncoder& encoder, const std::filesystem::path& path,
                          WeightNaming naming = WeightNaming::Native);

}  // namespace gem
