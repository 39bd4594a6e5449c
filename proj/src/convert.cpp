#include "gem/convert.hpp"

#include <cstring>

#include "gem/error.hpp"

namespace gem {

torch::Tensor to_tensor(const Image& image) {
    auto hwc = torch::from_blob(const_cast<float*>(image.data.data()), {image.height, image.width, 3}, torch::kFloat32);
    return hwc.permute({2, 0, 1}).contiguous();
}

torch::Tensor to_tensor(const BinaryMask& mask) {
    auto t = torch::from_blob(const_cast<uint8_t*>(mask.data.data()), {mask.height, mask.width}, torch::kUInt8);
    return (t != 0).to(torch::kFloat32);
}

ProbabilityMap to_probability(const torch::Tensor& t) {
    if (t.dim() != 2) {
        throw DimensionError("expected a 2-D tensor");
    }
    auto c = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
    ProbabilityMap out(c.size(0), c.size(1));
    std::memcpy(out.data.data(), c.data_ptr<float>(), out.data.size() * sizeof(float));
    return out;
}

BinaryMask to_mask(const torch::Tensor& t) {
    if (t.dim() != 2) {
        throw DimensionError("expected a 2-D tensor");
    }
    auto c = (t.detach() != 0).to(torch::kCPU, torch::kUInt8).contiguous();
    BinaryMask out(c.size(0), c.size(1));
    std::memcpy(out.data.data(), c.data_ptr<uint8_t>(), out.data.size());
    return out;
}

}  // namespace gem
