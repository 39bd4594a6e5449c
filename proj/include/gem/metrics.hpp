#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gem/grid.hpp"

namespace gem::metrics {

/// Saliency-literature F-measure weighting.
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kThreshold = 0.5;

struct Confusion {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    Confusion& operator+=(const Confusion& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt);
BinaryMask binarize(const ProbabilityMap& prob, double threshold = kThreshold);

// Formulas on a confusion matrix; the mask overloads below route through these.
double iou(const Confusion& c);
double f_beta(const Confusion& c, double beta_squared = kBetaSquared);
double ber(const Confusion& c);

/// |P ∩ G| / |P ∪ G|; 1 when both masks are empty.
double iou(const BinaryMask& pred, const BinaryMask& gt);
/// (1 + β²) P R / (β² P + R) after binarizing at 0.5; 0 when degenerate, 1 when both are empty.
double f_beta(const ProbabilityMap& pred, const BinaryMask& gt, double beta_squared = kBetaSquared);
/// Mean absolute difference.
double mae(const ProbabilityMap& pred, const BinaryMask& gt);
double mae(const ProbabilityMap& a, const ProbabilityMap& b);
/// 100 (1 - (TPR + TNR) / 2). When gt has a single class only the present class's rate is used.
double ber(const BinaryMask& pred, const BinaryMask& gt);

struct ImageMetrics {
    double iou = 0.0;
    double f_beta = 0.0;
    double mae = 0.0;
    double ber = 0.0;
};

enum class Aggregation {
    PerImage,  ///< unweighted mean of per-image values
    Pooled,    ///< metrics of the summed confusion matrix / pixel-weighted MAE
};

Aggregation parse_aggregation(const std::string& name);

struct MetricsReport {
    std::vector<ImageMetrics> per_image;
    ImageMetrics mean;
    Aggregation aggregation = Aggregation::PerImage;
};

/// Streaming evaluator; add() one image at a time.
class Accumulator {
public:
    explicit Accumulator(Aggregation aggregation = Aggregation::PerImage, double threshold = kThreshold);
    ImageMetrics add(const ProbabilityMap& pred, const BinaryMask& gt);
    [[nodiscard]] MetricsReport finish() const;

private:
    Aggregation aggregation_;
    double threshold_;
    std::vector<ImageMetrics> per_image_;
    Confusion pooled_;
    double abs_error_sum_ = 0.0;
    int64_t pixels_ = 0;
};

/// Throws DimensionError when counts or shapes differ.
MetricsReport evaluate_dataset(std::span<const ProbabilityMap> predictions, std::span<const BinaryMask> gts,
                               Aggregation aggregation = Aggregation::PerImage);

/// "name | 0.770 | 0.865 | 0.032 | 8.21"
std::string format_row(const std::string& name, const ImageMetrics& m);
/// "Zero-Shot | S-GSD-1x | 0.703 | 0.819 | 0.215 | 10.79"
std::string format_transfer_row(const std::string& paradigm, const std::string& dataset, const ImageMetrics& m);
std::string table_header();

nlohmann::json to_json(const MetricsReport& report);
/// Tab-delimited per-image table followed by a "mean" row.
std::string to_delimited(const MetricsReport& report);

}  // namespace gem::metrics
