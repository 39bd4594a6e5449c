#pragma once

#include <torch/torch.h>

#include "gem/grid.hpp"

namespace gem {

/// HWC image -> (3, H, W) float tensor.
torch::Tensor to_tensor(const Image& image);
/// Binary mask -> (H, W) float tensor of {0, 1}.
torch::Tensor to_tensor(const BinaryMask& mask);
/// (H, W) tensor -> probability plane.
ProbabilityMap to_probability(const torch::Tensor& t);
/// (H, W) tensor -> binary mask of the nonzero entries.
BinaryMask to_mask(const torch::Tensor& t);

}  // namespace gem
