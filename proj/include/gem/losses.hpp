#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "gem/decoder.hpp"
#include "gem/dqs.hpp"
#include "gem/matcher.hpp"
#include "gem/targets.hpp"

namespace gem {

struct LossWeights {
    double cls = 4.0;
    double l1 = 5.0;
    double giou = 2.0;
    double ce = 5.0;
    double dice = 5.0;

    /// Throws ConfigError on a negative weight.
    void validate() const;
};

enum class MaskDownsample { Area, Nearest };

struct LossConfig {
    LossWeights weights;
    /// Weight of the per-location query-selection BCE; only used when extra loss is on.
    double dqs_aux = 1.0;
    /// Cross-entropy weight of the no-object class.
    double no_object_weight = 0.1;
    double dice_eps = 1.0;
    /// Supervise every decoder layer, otherwise only the last.
    bool deep_supervision = true;
    MaskDownsample downsample = MaskDownsample::Area;
    TargetOptions targets;
};

/// Targets of one image resampled to the mask-loss resolution.
struct TargetTensors {
    torch::Tensor masks;  ///< (T, H2, W2) in [0, 1]
    torch::Tensor boxes;  ///< (T, 4) normalized cxcywh
    [[nodiscard]] int64_t count() const { return masks.size(0); }
};

TargetTensors to_target_tensors(const std::vector<Target>& targets, int64_t height, int64_t width,
                                MaskDownsample mode, const torch::TensorOptions& options);

/// Resamples a binary mask to (height, width), area-averaged or nearest.
torch::Tensor downsample_mask(const BinaryMask& mask, int64_t height, int64_t width, MaskDownsample mode,
                              const torch::TensorOptions& options);

// Loss primitives. `probs`/`targets` rows are flattened masks.
torch::Tensor box_cxcywh_to_xyxy(const torch::Tensor& boxes);
/// Pairwise generalized IoU of xyxy boxes: (A, 4) x (B, 4) -> (A, B).
torch::Tensor generalized_box_iou(const torch::Tensor& a, const torch::Tensor& b);
/// Row-wise dice loss 1 - (2 sum(p t) + eps) / (sum p + sum t + eps).
torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& targets, double eps);

/// (T, N) matching cost of one image in one layer:
/// w_cls * (-p_glass) + w_ce * BCE + w_dice * dice + w_l1 * |box - box*|_1 + w_giou * (1 - GIoU).
torch::Tensor matching_cost(const LayerPrediction& layer, int64_t batch_index, const TargetTensors& targets,
                            const LossConfig& cfg);

/// Hungarian assignment per image for one layer.
std::vector<Assignment> match_layer(const LayerPrediction& layer, const std::vector<TargetTensors>& targets,
                                    const LossConfig& cfg);

struct LossResult {
    torch::Tensor total;
    /// Weighted contributions summed over layers: cls, l1, giou, ce, dice, dqs_aux.
    std::map<std::string, double> terms;
    /// Unweighted-by-layer totals: per_layer[l] is the five-term loss of layer l.
    std::vector<double> per_layer;
};

/// Sum over supervised layers of the weighted five terms on matched pairs (unmatched queries
/// only contribute to the no-object classification), plus the optional query-selection BCE
/// against `dqs_targets` (B, h, w).
LossResult total_loss(const MaskPrediction& pred, const std::vector<TargetTensors>& targets, const LossConfig& cfg,
                      const ScoreVector* dqs_scores = nullptr, const torch::Tensor* dqs_targets = nullptr);

}  // namespace gem
