#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

#include "gem/pyramid.hpp"

namespace gem {

/// How the 2hw confidence scores are ranked when picking query locations.
enum class QueryRanking {
    AllScores,       ///< rank foreground and background scores together, dedup by location
    ForegroundOnly,  ///< rank the foreground block only
};

struct DqsConfig {
    /// Initialize decoder queries from selected features (otherwise learned embeddings).
    bool enabled = true;
    /// Per-location BCE on the classifier output.
    bool extra_loss = true;
    QueryRanking ranking = QueryRanking::AllScores;
};

/// Per-location two-class confidences.
struct ScoreVector {
    /// (B, 2hw): all foreground scores, then all background scores, each row-major over h x w.
    torch::Tensor scores;
    /// (B, 2, h, w) raw classifier logits, channel 0 foreground.
    torch::Tensor logits;
    int64_t height = 0;
    int64_t width = 0;
};

struct SelectedQueries {
    torch::Tensor embeddings;  ///< (B, k, d)
    torch::Tensor positions;   ///< (B, k) int64 flat indices into h x w
    torch::Tensor scores;      ///< (B, k) the score that selected each location
};

class QuerySelectorImpl : public torch::nn::Module {
public:
    explicit QuerySelectorImpl(int64_t dim);

    /// f = proj(avgpool2(C3)) + C4 + proj(upsample2(C5)) at C4 resolution.
    torch::Tensor aggregate(const torch::Tensor& c3, const torch::Tensor& c4, const torch::Tensor& c5);
    /// Two-class softmax of a 1x1 linear head over every location of f.
    ScoreVector classify(const torch::Tensor& f);

    torch::nn::Conv2d down_proj{nullptr}, up_proj{nullptr}, classifier{nullptr};

private:
    int64_t dim_;
};
TORCH_MODULE(QuerySelector);

/// Ranking core for one image. `scores` holds 2*hw entries in ScoreVector layout.
/// Entries are visited in descending score order (ties: lower flat index first, so the
/// foreground block precedes the background block) and each location is taken the first
/// time one of its entries is reached. Throws CapacityError when k > hw.
std::vector<int64_t> rank_locations(std::span<const double> scores, int64_t k, QueryRanking ranking);

/// Gathers the features of the top-k locations of every image. Gradients flow into `f`.
SelectedQueries select_topk(const ScoreVector& s, const torch::Tensor& f, int64_t k,
                            QueryRanking ranking = QueryRanking::AllScores);

}  // namespace gem
