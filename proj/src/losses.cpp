#include "gem/losses.hpp"

#include "gem/error.hpp"

namespace gem {

namespace F = torch::nn::functional;

void LossWeights::validate() const {
    for (const double w : {cls, l1, giou, ce, dice}) {
        if (w < 0.0) {
            throw ConfigError("loss weights must be non-negative");
        }
    }
}

torch::Tensor downsample_mask(const BinaryMask& mask, int64_t height, int64_t width, MaskDownsample mode,
                              const torch::TensorOptions& options) {
    auto t = torch::from_blob(const_cast<uint8_t*>(mask.data.data()), {1, 1, mask.height, mask.width}, torch::kUInt8)
                 .to(options.dtype());
    if (mask.height == height && mask.width == width) {
        return t.view({height, width}).to(options.device());
    }
    auto opts = F::InterpolateFuncOptions().size(std::vector<int64_t>{height, width});
    auto out = mode == MaskDownsample::Area ? F::interpolate(t, opts.mode(torch::kArea))
                                            : F::interpolate(t, opts.mode(torch::kNearest));
    return out.view({height, width}).to(options.device());
}

TargetTensors to_target_tensors(const std::vector<Target>& targets, int64_t height, int64_t width,
                                MaskDownsample mode, const torch::TensorOptions& options) {
    TargetTensors out;
    if (targets.empty()) {
        out.masks = torch::zeros({0, height, width}, options);
        out.boxes = torch::zeros({0, 4}, options);
        return out;
    }
    std::vector<torch::Tensor> masks;
    auto boxes = torch::empty({static_cast<int64_t>(targets.size()), 4}, torch::TensorOptions().dtype(torch::kFloat64));
    for (size_t i = 0; i < targets.size(); ++i) {
        masks.push_back(downsample_mask(targets[i].mask, height, width, mode, options));
        for (int c = 0; c < 4; ++c) {
            boxes[static_cast<int64_t>(i)][c] = targets[i].box[c];
        }
    }
    out.masks = torch::stack(masks);
    out.boxes = boxes.to(options);
    return out;
}

torch::Tensor box_cxcywh_to_xyxy(const torch::Tensor& boxes) {
    auto c = boxes.unbind(-1);
    return torch::stack({c[0] - 0.5 * c[2], c[1] - 0.5 * c[3], c[0] + 0.5 * c[2], c[1] + 0.5 * c[3]}, -1);
}

torch::Tensor generalized_box_iou(const torch::Tensor& a, const torch::Tensor& b) {
    auto area_a = (a.select(1, 2) - a.select(1, 0)) * (a.select(1, 3) - a.select(1, 1));
    auto area_b = (b.select(1, 2) - b.select(1, 0)) * (b.select(1, 3) - b.select(1, 1));
    auto lt = torch::max(a.unsqueeze(1).slice(2, 0, 2), b.unsqueeze(0).slice(2, 0, 2));
    auto rb = torch::min(a.unsqueeze(1).slice(2, 2, 4), b.unsqueeze(0).slice(2, 2, 4));
    auto wh = (rb - lt).clamp_min(0.0);
    auto inter = wh.select(2, 0) * wh.select(2, 1);
    auto uni = area_a.unsqueeze(1) + area_b.unsqueeze(0) - inter;
    auto iou = inter / uni;
    auto hull_lt = torch::min(a.unsqueeze(1).slice(2, 0, 2), b.unsqueeze(0).slice(2, 0, 2));
    auto hull_rb = torch::max(a.unsqueeze(1).slice(2, 2, 4), b.unsqueeze(0).slice(2, 2, 4));
    auto hull_wh = (hull_rb - hull_lt).clamp_min(0.0);
    auto hull = hull_wh.select(2, 0) * hull_wh.select(2, 1);
    return iou - (hull - uni) / hull;
}

torch::Tensor dice_loss(const torch::Tensor& probs, const torch::Tensor& targets, double eps) {
    auto numer = 2.0 * (probs * targets).sum(-1);
    auto denom = probs.sum(-1) + targets.sum(-1);
    return 1.0 - (numer + eps) / (denom + eps);
}

torch::Tensor matching_cost(const LayerPrediction& layer, int64_t batch_index, const TargetTensors& targets,
                            const LossConfig& cfg) {
    torch::NoGradGuard no_grad;
    const auto& w = cfg.weights;
    auto logits = layer.mask_logits[batch_index].flatten(1);  // N P
    auto tgt = targets.masks.flatten(1).to(logits.scalar_type());
    const double pixels = static_cast<double>(logits.size(1));

    auto p_glass = torch::softmax(layer.class_logits[batch_index], -1).select(-1, 0);  // N
    auto cost_cls = -p_glass.unsqueeze(0);

    auto pos = F::softplus(-logits);
    auto neg = F::softplus(logits);
    auto cost_ce = (torch::matmul(tgt, pos.t()) + torch::matmul(1.0 - tgt, neg.t())) / pixels;

    auto sig = torch::sigmoid(logits);
    auto numer = 2.0 * torch::matmul(tgt, sig.t());
    auto denom = tgt.sum(-1).unsqueeze(1) + sig.sum(-1).unsqueeze(0);
    auto cost_dice = 1.0 - (numer + cfg.dice_eps) / (denom + cfg.dice_eps);

    auto out_boxes = layer.boxes[batch_index];
    auto tgt_boxes = targets.boxes.to(out_boxes.scalar_type());
    auto cost_l1 = torch::cdist(tgt_boxes, out_boxes, 1.0);
    auto cost_giou = 1.0 - generalized_box_iou(box_cxcywh_to_xyxy(tgt_boxes), box_cxcywh_to_xyxy(out_boxes));

    return w.cls * cost_cls + w.ce * cost_ce + w.dice * cost_dice + w.l1 * cost_l1 + w.giou * cost_giou;
}

std::vector<Assignment> match_layer(const LayerPrediction& layer, const std::vector<TargetTensors>& targets,
                                    const LossConfig& cfg) {
    std::vector<Assignment> out;
    const auto queries = layer.mask_logits.size(1);
    for (size_t b = 0; b < targets.size(); ++b) {
        const auto t = targets[b].count();
        if (t == 0) {
            out.emplace_back();
            continue;
        }
        auto cost = matching_cost(layer, static_cast<int64_t>(b), targets[b], cfg)
                        .to(torch::kCPU, torch::kFloat64)
                        .contiguous();
        std::span<const double> view(cost.data_ptr<double>(), static_cast<size_t>(cost.numel()));
        out.push_back(hungarian_match(view, t, queries));
    }
    return out;
}

LossResult total_loss(const MaskPrediction& pred, const std::vector<TargetTensors>& targets, const LossConfig& cfg,
                      const ScoreVector* dqs_scores, const torch::Tensor* dqs_targets) {
    cfg.weights.validate();
    const auto& w = cfg.weights;
    const auto& any_layer = pred.final();
    const auto batch = any_layer.mask_logits.size(0);
    const auto queries = any_layer.mask_logits.size(1);
    if (static_cast<int64_t>(targets.size()) != batch) {
        throw DimensionError("one target set per image is required");
    }
    int64_t num_targets = 0;
    for (const auto& t : targets) {
        num_targets += t.count();
    }
    const double norm = static_cast<double>(std::max<int64_t>(num_targets, 1));

    LossResult result;
    for (const char* key : {"cls", "l1", "giou", "ce", "dice", "dqs_aux"}) {
        result.terms[key] = 0.0;
    }
    auto total = torch::zeros({}, any_layer.mask_logits.options());
    const size_t first = cfg.deep_supervision ? 0 : pred.layers.size() - 1;

    for (size_t l = 0; l < pred.layers.size(); ++l) {
        const auto& layer = pred.layers[l];
        if (l < first) {
            result.per_layer.push_back(0.0);
            continue;
        }
        auto assignments = match_layer(layer, targets, cfg);

        auto classes = torch::ones({batch, queries}, torch::kInt64);
        std::vector<torch::Tensor> src_masks, tgt_masks, src_boxes, tgt_boxes;
        for (int64_t b = 0; b < batch; ++b) {
            const auto& a = assignments[static_cast<size_t>(b)];
            if (a.query_for_target.empty()) {
                continue;
            }
            auto q_idx = torch::tensor(a.query_for_target, torch::kInt64);
            for (const auto q : a.query_for_target) {
                classes[b][q] = 0;
            }
            q_idx = q_idx.to(layer.mask_logits.device());
            src_masks.push_back(layer.mask_logits[b].index_select(0, q_idx));
            src_boxes.push_back(layer.boxes[b].index_select(0, q_idx));
            tgt_masks.push_back(targets[static_cast<size_t>(b)].masks);
            tgt_boxes.push_back(targets[static_cast<size_t>(b)].boxes);
        }

        auto class_weight = torch::tensor({1.0, cfg.no_object_weight}, layer.class_logits.options());
        auto loss_cls = F::cross_entropy(layer.class_logits.reshape({-1, 2}),
                                         classes.reshape({-1}).to(layer.class_logits.device()),
                                         F::CrossEntropyFuncOptions().weight(class_weight));

        auto zero = torch::zeros({}, layer.mask_logits.options());
        torch::Tensor loss_ce = zero, loss_dice = zero, loss_l1 = zero, loss_giou = zero;
        if (!src_masks.empty()) {
            auto sm = torch::cat(src_masks).flatten(1);
            auto tm = torch::cat(tgt_masks).flatten(1).to(sm.scalar_type());
            auto sb = torch::cat(src_boxes);
            auto tb = torch::cat(tgt_boxes).to(sb.scalar_type());
            loss_ce = F::binary_cross_entropy_with_logits(sm, tm, F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone))
                          .mean(1)
                          .sum() /
                      norm;
            loss_dice = dice_loss(torch::sigmoid(sm), tm, cfg.dice_eps).sum() / norm;
            loss_l1 = (sb - tb).abs().sum() / norm;
            auto giou = generalized_box_iou(box_cxcywh_to_xyxy(sb), box_cxcywh_to_xyxy(tb)).diagonal();
            loss_giou = (1.0 - giou).sum() / norm;
        }

        auto layer_loss = w.cls * loss_cls + w.ce * loss_ce + w.dice * loss_dice + w.l1 * loss_l1 + w.giou * loss_giou;
        total = total + layer_loss;
        result.per_layer.push_back(layer_loss.item<double>());
        result.terms["cls"] += w.cls * loss_cls.item<double>();
        result.terms["ce"] += w.ce * loss_ce.item<double>();
        result.terms["dice"] += w.dice * loss_dice.item<double>();
        result.terms["l1"] += w.l1 * loss_l1.item<double>();
        result.terms["giou"] += w.giou * loss_giou.item<double>();
    }

    if (dqs_scores != nullptr && dqs_targets != nullptr) {
        auto z = dqs_scores->logits.select(1, 0) - dqs_scores->logits.select(1, 1);
        auto aux = F::binary_cross_entropy_with_logits(z, dqs_targets->to(z.scalar_type()));
        total = total + cfg.dqs_aux * aux;
        result.terms["dqs_aux"] = cfg.dqs_aux * aux.item<double>();
    }

    if (!std::isfinite(total.item<double>())) {
        throw NumericError("loss is not finite");
    }
    result.total = total;
    return result;
}

}  // namespace gem
