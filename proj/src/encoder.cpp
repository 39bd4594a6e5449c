#include "gem/encoder.hpp"

#include <map>
#include <optional>
#include <regex>
#include <sstream>

#include "gem/error.hpp"
#include "gem/layers.hpp"
#include "gem/safetensors.hpp"

namespace gem {

namespace F = torch::nn::functional;

void EncoderConfig::validate() const {
    if (patch_size <= 0 || image_size <= 0 || image_size % patch_size != 0) {
        throw DimensionError("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
                             std::to_string(patch_size));
    }
    if (num_heads <= 0 || embed_dim % num_heads != 0) {
        throw DimensionError("embed_dim " + std::to_string(embed_dim) + " not divisible by num_heads " +
                             std::to_string(num_heads));
    }
    if (depth < 0) {
        throw DimensionError("negative encoder depth");
    }
}

EncoderBlockImpl::EncoderBlockImpl(int64_t dim, int64_t num_heads, double mlp_ratio) : num_heads_(num_heads) {
    const auto hidden = static_cast<int64_t>(static_cast<double>(dim) * mlp_ratio);
    norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)));
    auto attn = register_module("attn", std::make_shared<torch::nn::Module>());
    qkv_ = attn->register_module("qkv", torch::nn::Linear(dim, 3 * dim));
    proj_ = attn->register_module("proj", torch::nn::Linear(dim, dim));
    norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)));
    auto mlp = register_module("mlp", std::make_shared<torch::nn::Module>());
    fc1_ = mlp->register_module("fc1", torch::nn::Linear(dim, hidden));
    fc2_ = mlp->register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& x) {
    const auto b = x.size(0);
    const auto n = x.size(1);
    const auto d = x.size(2);
    auto qkv = qkv_(norm1_(x)).view({b, n, 3, num_heads_, d / num_heads_}).permute({2, 0, 3, 1, 4});
    auto q = qkv[0];
    auto k = qkv[1];
    auto v = qkv[2];
    const double scale = 1.0 / std::sqrt(static_cast<double>(d / num_heads_));
    auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) * scale, -1);
    auto y = x + proj_(merge_heads(torch::matmul(attn, v)));
    return y + fc2_(torch::gelu(fc1_(norm2_(y))));
}

namespace {

torch::Tensor resample_grid(const torch::Tensor& pos, int64_t gh, int64_t gw) {
    if (pos.size(1) == gh && pos.size(2) == gw) {
        return pos;
    }
    auto chw = pos.permute({0, 3, 1, 2});
    auto out = F::interpolate(chw, F::InterpolateFuncOptions()
                                       .size(std::vector<int64_t>{gh, gw})
                                       .mode(torch::kBilinear)
                                       .align_corners(false));
    return out.permute({0, 2, 3, 1});
}

}  // namespace

ImageEncoderImpl::ImageEncoderImpl(const EncoderConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto d = cfg_.embed_dim;
    auto patch = register_module("patch_embed", std::make_shared<torch::nn::Module>());
    patch_proj_ = patch->register_module(
        "proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, d, cfg_.patch_size).stride(cfg_.patch_size)));
    const auto g = cfg_.grid_size();
    pos_embed = register_parameter("pos_embed", torch::randn({1, g, g, d}) * 0.02);
    auto blocks = register_module("blocks", std::make_shared<torch::nn::Module>());
    for (int64_t i = 0; i < cfg_.depth; ++i) {
        blocks_.push_back(blocks->register_module(std::to_string(i), EncoderBlock(d, cfg_.num_heads, cfg_.mlp_ratio)));
    }
    if (cfg_.keep_neck) {
        neck_ = register_module("neck", torch::nn::Sequential());
        auto conv1 = torch::nn::Conv2d(torch::nn::Conv2dOptions(d, cfg_.neck_dim, 1).bias(false));
        auto conv2 = torch::nn::Conv2d(torch::nn::Conv2dOptions(cfg_.neck_dim, cfg_.neck_dim, 3).padding(1).bias(false));
        neck_->push_back("conv1", conv1);
        neck_->push_back("norm1", LayerNorm2d(cfg_.neck_dim));
        neck_->push_back("conv2", conv2);
        neck_->push_back("norm2", LayerNorm2d(cfg_.neck_dim));
    }
    pixel_mean_ = register_buffer("pixel_mean", torch::tensor({0.485, 0.456, 0.406}).view({1, 3, 1, 1}));
    pixel_std_ = register_buffer("pixel_std", torch::tensor({0.229, 0.224, 0.225}).view({1, 3, 1, 1}));
}

torch::Tensor ImageEncoderImpl::forward(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 3) {
        throw DimensionError("encoder expects (B, 3, H, W) input");
    }
    const auto h = images.size(2);
    const auto w = images.size(3);
    if (h % cfg_.patch_size != 0 || w % cfg_.patch_size != 0) {
        std::ostringstream msg;
        msg << "input " << h << "x" << w << " not divisible by patch size " << cfg_.patch_size;
        throw DimensionError(msg.str());
    }
    if (!torch::isfinite(images).all().item<bool>()) {
        throw InputError("encoder input contains non-finite values");
    }
    auto x = (images - pixel_mean_) / pixel_std_;
    x = patch_proj_(x).permute({0, 2, 3, 1});  // B gh gw D
    const auto gh = x.size(1);
    const auto gw = x.size(2);
    x = x + resample_grid(pos_embed, gh, gw);
    x = x.reshape({x.size(0), gh * gw, cfg_.embed_dim});
    for (auto& block : blocks_) {
        x = block(x);
    }
    x = x.view({x.size(0), gh, gw, cfg_.embed_dim}).permute({0, 3, 1, 2});
    if (!neck_.is_empty()) {
        x = neck_->forward(x);
    }
    return x;
}

WeightNaming parse_weight_naming(const std::string& name) {
    if (name == "native") {
        return WeightNaming::Native;
    }
    if (name == "sam") {
        return WeightNaming::Sam;
    }
    if (name == "timm") {
        return WeightNaming::Timm;
    }
    throw ConfigError("unknown weight naming '" + name + "' (expected native|sam|timm)");
}

namespace {

struct RemapRule {
    std::regex pattern;
    std::string replacement;  // empty: ignore the key
};

// External -> internal key tables. A matched rule with an empty replacement marks
// the key as known-but-unused.
const std::vector<RemapRule>& sam_rules() {
    static const std::vector<RemapRule> rules = {
        {std::regex(R"(^image_encoder\.patch_embed\.proj\.(weight|bias)$)"), "patch_embed.proj.$1"},
        {std::regex(R"(^image_encoder\.pos_embed$)"), "pos_embed"},
        {std::regex(R"(^image_encoder\.blocks\.(\d+)\.(norm1|norm2)\.(weight|bias)$)"), "blocks.$1.$2.$3"},
        {std::regex(R"(^image_encoder\.blocks\.(\d+)\.attn\.(qkv|proj)\.(weight|bias)$)"), "blocks.$1.attn.$2.$3"},
        {std::regex(R"(^image_encoder\.blocks\.(\d+)\.attn\.rel_pos_[hw]$)"), ""},
        {std::regex(R"(^image_encoder\.blocks\.(\d+)\.mlp\.lin1\.(weight|bias)$)"), "blocks.$1.mlp.fc1.$2"},
        {std::regex(R"(^image_encoder\.blocks\.(\d+)\.mlp\.lin2\.(weight|bias)$)"), "blocks.$1.mlp.fc2.$2"},
        {std::regex(R"(^image_encoder\.neck\.0\.weight$)"), "neck.conv1.weight"},
        {std::regex(R"(^image_encoder\.neck\.1\.(weight|bias)$)"), "neck.norm1.$1"},
        {std::regex(R"(^image_encoder\.neck\.2\.weight$)"), "neck.conv2.weight"},
        {std::regex(R"(^image_encoder\.neck\.3\.(weight|bias)$)"), "neck.norm2.$1"},
        {std::regex(R"(^(prompt_encoder|mask_decoder)\..*$)"), ""},
        {std::regex(R"(^pixel_(mean|std)$)"), ""},
    };
    return rules;
}

const std::vector<RemapRule>& timm_rules() {
    static const std::vector<RemapRule> rules = {
        {std::regex(R"(^patch_embed\.proj\.(weight|bias)$)"), "patch_embed.proj.$1"},
        {std::regex(R"(^pos_embed$)"), "pos_embed"},
        {std::regex(R"(^blocks\.(\d+)\.(norm1|norm2)\.(weight|bias)$)"), "blocks.$1.$2.$3"},
        {std::regex(R"(^blocks\.(\d+)\.attn\.(qkv|proj)\.(weight|bias)$)"), "blocks.$1.attn.$2.$3"},
        {std::regex(R"(^blocks\.(\d+)\.mlp\.(fc1|fc2)\.(weight|bias)$)"), "blocks.$1.mlp.$2.$3"},
        {std::regex(R"(^(cls_token|dist_token|norm\.(weight|bias)|fc_norm\..*|head\..*|head_dist\..*)$)"), ""},
    };
    return rules;
}

// Returns the internal key, an empty string for ignored keys, nullopt for unknown keys.
std::optional<std::string> remap(WeightNaming naming, const std::string& key) {
    if (naming == WeightNaming::Native) {
        return key;
    }
    const auto& rules = naming == WeightNaming::Sam ? sam_rules() : timm_rules();
    for (const auto& rule : rules) {
        if (std::regex_match(key, rule.pattern)) {
            if (rule.replacement.empty()) {
                return std::string{};
            }
            return std::regex_replace(key, rule.pattern, rule.replacement);
        }
    }
    return std::nullopt;
}

std::string external_name(WeightNaming naming, const std::string& internal) {
    if (naming == WeightNaming::Native) {
        return internal;
    }
    static const std::vector<std::pair<std::regex, std::string>> to_sam = {
        {std::regex(R"(^blocks\.(\d+)\.mlp\.fc1\.(.*)$)"), "blocks.$1.mlp.lin1.$2"},
        {std::regex(R"(^blocks\.(\d+)\.mlp\.fc2\.(.*)$)"), "blocks.$1.mlp.lin2.$2"},
        {std::regex(R"(^neck\.conv1\.(.*)$)"), "neck.0.$1"},
        {std::regex(R"(^neck\.norm1\.(.*)$)"), "neck.1.$1"},
        {std::regex(R"(^neck\.conv2\.(.*)$)"), "neck.2.$1"},
        {std::regex(R"(^neck\.norm2\.(.*)$)"), "neck.3.$1"},
    };
    if (naming == WeightNaming::Timm) {
        return internal;
    }
    std::string name = internal;
    for (const auto& [pattern, replacement] : to_sam) {
        if (std::regex_match(name, pattern)) {
            name = std::regex_replace(name, pattern, replacement);
            break;
        }
    }
    return "image_encoder." + name;
}

// Converts an external position table to the internal (1, g, g, D) layout.
torch::Tensor to_internal_pos(const torch::Tensor& external, WeightNaming naming) {
    if (naming != WeightNaming::Timm) {
        return external;
    }
    // (1, [1 +] g*g, D)
    if (external.dim() != 3) {
        return external;
    }
    auto tokens = external;
    const auto n = tokens.size(1);
    auto g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (g * g != n) {
        tokens = tokens.slice(1, 1);
        g = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n - 1))));
    }
    if (g * g != tokens.size(1)) {
        return external;
    }
    return tokens.reshape({1, g, g, tokens.size(2)});
}

}  // namespace

LoadReport load_encoder_weights(ImageEncoder& encoder, const std::filesystem::path& path, WeightNaming naming,
                                bool interpolate_pos_embed) {
    if (!std::filesystem::exists(path)) {
        throw IoError("encoder weight file not found: " + path.string());
    }
    auto file = safetensors::load(path);

    auto params = encoder->named_parameters(true);
    std::map<std::string, torch::Tensor> incoming;
    LoadReport report;
    std::vector<std::string> unexpected, mismatched, missing;

    for (auto& [key, tensor] : file.tensors) {
        auto internal = remap(naming, key);
        if (!internal) {
            unexpected.push_back(key);
            continue;
        }
        if (internal->empty()) {
            report.ignored.push_back(key);
            continue;
        }
        if (internal->rfind("neck.", 0) == 0 && !encoder->config().keep_neck) {
            report.ignored.push_back(key);
            continue;
        }
        if (!params.contains(*internal)) {
            unexpected.push_back(key);
            continue;
        }
        incoming[*internal] = tensor;
    }

    for (const auto& item : params) {
        const auto& name = item.key();
        const auto& target = item.value();
        auto it = incoming.find(name);
        if (it == incoming.end()) {
            missing.push_back(name);
            continue;
        }
        auto src = it->second;
        if (name == "pos_embed") {
            src = to_internal_pos(src, naming);
            if (src.dim() == 4 && src.size(3) == target.size(3) && interpolate_pos_embed) {
                src = resample_grid(src.to(torch::kFloat64), target.size(1), target.size(2));
            }
        }
        if (src.sizes() != target.sizes()) {
            std::ostringstream msg;
            msg << name << " (expected " << target.sizes() << ", got " << src.sizes() << ")";
            mismatched.push_back(msg.str());
            continue;
        }
        it->second = src;
    }

    if (!unexpected.empty() || !mismatched.empty() || !missing.empty()) {
        std::ostringstream msg;
        msg << "encoder weights in " << path.string() << " do not match the configuration:";
        for (const auto& k : mismatched) {
            msg << "\n  shape mismatch: " << k;
        }
        for (const auto& k : missing) {
            msg << "\n  missing: " << k;
        }
        for (const auto& k : unexpected) {
            msg << "\n  unexpected: " << k;
        }
        throw LoadError(msg.str());
    }

    torch::NoGradGuard no_grad;
    for (auto& item : params) {
        auto& target = item.value();
        target.copy_(incoming.at(item.key()).to(target.scalar_type()));
        report.loaded.push_back(item.key());
    }
    return report;
}

ImageEncoder load_pretrained(const std::filesystem::path& path, const EncoderConfig& cfg, WeightNaming naming) {
    ImageEncoder encoder(cfg);
    load_encoder_weights(encoder, path, naming);
    return encoder;
}

void save_encoder_weights(ImageEncoder& encoder, const std::filesystem::path& path, WeightNaming naming) {
    safetensors::TensorFile file;
    for (const auto& item : encoder->named_parameters(true)) {
        auto tensor = item.value().detach().clone();
        if (item.key() == "pos_embed" && naming == WeightNaming::Timm) {
            const auto d = tensor.size(3);
            auto tokens = tensor.reshape({1, -1, d});
            tensor = torch::cat({torch::zeros({1, 1, d}, tokens.options()), tokens}, 1);
        }
        file.tensors[external_name(naming, item.key())] = tensor;
    }
    if (naming == WeightNaming::Timm) {
        file.tensors["cls_token"] = torch::zeros({1, 1, encoder->config().embed_dim});
    }
    file.metadata["format"] = "gem-encoder";
    safetensors::save(path, file);
}

}  // namespace gem
