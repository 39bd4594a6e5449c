#include "gem/dqs.hpp"

#include <algorithm>
#include <numeric>

#include "gem/error.hpp"

namespace gem {

namespace F = torch::nn::functional;

QuerySelectorImpl::QuerySelectorImpl(int64_t dim) : dim_(dim) {
    down_proj = register_module("down_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 1)));
    up_proj = register_module("up_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 1)));
    classifier = register_module("classifier", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, 2, 1)));
}

torch::Tensor QuerySelectorImpl::aggregate(const torch::Tensor& c3, const torch::Tensor& c4, const torch::Tensor& c5) {
    for (const auto* t : {&c3, &c4, &c5}) {
        if (t->dim() != 4 || t->size(1) != dim_) {
            throw DimensionError("query selection expects " + std::to_string(dim_) + "-channel pyramid levels");
        }
    }
    const auto h = c4.size(2);
    const auto w = c4.size(3);
    if (c3.size(2) != 2 * h || c3.size(3) != 2 * w || 2 * c5.size(2) != h || 2 * c5.size(3) != w) {
        throw DimensionError("C3/C4/C5 violate the pyramid shape contract");
    }
    auto down = F::avg_pool2d(c3, F::AvgPool2dFuncOptions(2).stride(2));
    auto up = F::interpolate(c5, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{h, w})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
    return down_proj(down) + c4 + up_proj(up);
}

ScoreVector QuerySelectorImpl::classify(const torch::Tensor& f) {
    if (!torch::isfinite(f).all().item<bool>()) {
        throw NumericError("aggregated feature contains non-finite values");
    }
    ScoreVector out;
    out.logits = classifier(f);
    out.height = f.size(2);
    out.width = f.size(3);
    out.scores = torch::softmax(out.logits, 1).flatten(1);
    return out;
}

std::vector<int64_t> rank_locations(std::span<const double> scores, int64_t k, QueryRanking ranking) {
    const auto hw = static_cast<int64_t>(scores.size() / 2);
    if (k > hw) {
        throw CapacityError("cannot select " + std::to_string(k) + " queries from " + std::to_string(hw) +
                            " locations");
    }
    const auto entries = ranking == QueryRanking::AllScores ? 2 * hw : hw;
    std::vector<int64_t> order(static_cast<size_t>(entries));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return scores[a] > scores[b]; });

    std::vector<int64_t> picked;
    picked.reserve(static_cast<size_t>(k));
    std::vector<bool> taken(static_cast<size_t>(hw), false);
    for (const auto entry : order) {
        if (static_cast<int64_t>(picked.size()) == k) {
            break;
        }
        const auto location = entry % hw;
        if (!taken[location]) {
            taken[location] = true;
            picked.push_back(location);
        }
    }
    return picked;
}

SelectedQueries select_topk(const ScoreVector& s, const torch::Tensor& f, int64_t k, QueryRanking ranking) {
    const auto batch = f.size(0);
    const auto d = f.size(1);
    const auto hw = s.height * s.width;
    if (k > hw) {
        throw CapacityError("cannot select " + std::to_string(k) + " queries from " + std::to_string(hw) +
                            " locations");
    }
    auto cpu_scores = s.scores.detach().to(torch::kCPU, torch::kFloat64).contiguous();
    auto positions = torch::empty({batch, k}, torch::kInt64);
    auto chosen_scores = torch::empty({batch, k}, torch::kFloat64);
    for (int64_t b = 0; b < batch; ++b) {
        std::span<const double> row(cpu_scores[b].data_ptr<double>(), static_cast<size_t>(2 * hw));
        auto picked = rank_locations(row, k, ranking);
        for (int64_t i = 0; i < k; ++i) {
            const auto loc = picked[static_cast<size_t>(i)];
            positions[b][i] = loc;
            const double best = ranking == QueryRanking::AllScores ? std::max(row[loc], row[loc + hw]) : row[loc];
            chosen_scores[b][i] = best;
        }
    }
    positions = positions.to(f.device());
    auto flat = f.flatten(2);  // B d hw
    auto index = positions.unsqueeze(1).expand({batch, d, k});
    SelectedQueries out;
    out.embeddings = flat.gather(2, index).transpose(1, 2);
    out.positions = positions;
    out.scores = chosen_scores.to(s.scores.options());
    return out;
}

}  // namespace gem
