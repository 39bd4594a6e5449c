#include "gem/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace gem::metrics {

Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred, gt, "confusion");
    Confusion c;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0;
        const bool g = gt.data[i] != 0;
        if (p && g) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (g) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

BinaryMask binarize(const ProbabilityMap& prob, double threshold) {
    BinaryMask out(prob.height, prob.width);
    for (size_t i = 0; i < prob.data.size(); ++i) {
        out.data[i] = prob.data[i] >= threshold ? 1 : 0;
    }
    return out;
}

double iou(const Confusion& c) {
    const auto uni = c.tp + c.fp + c.fn;
    return uni == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(uni);
}

double f_beta(const Confusion& c, double beta_squared) {
    if (c.tp + c.fp + c.fn == 0) {
        return 1.0;
    }
    const double precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    const double recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double denom = beta_squared * precision + recall;
    if (denom <= 0.0) {
        return 0.0;
    }
    return (1.0 + beta_squared) * precision * recall / denom;
}

double ber(const Confusion& c) {
    const auto pos = c.tp + c.fn;
    const auto neg = c.tn + c.fp;
    if (pos == 0 && neg == 0) {
        return 0.0;
    }
    if (pos == 0) {
        return 100.0 * (1.0 - static_cast<double>(c.tn) / static_cast<double>(neg));
    }
    if (neg == 0) {
        return 100.0 * (1.0 - static_cast<double>(c.tp) / static_cast<double>(pos));
    }
    const double tpr = static_cast<double>(c.tp) / static_cast<double>(pos);
    const double tnr = static_cast<double>(c.tn) / static_cast<double>(neg);
    return 100.0 * (1.0 - 0.5 * (tpr + tnr));
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
    return iou(confusion(pred, gt));
}

double f_beta(const ProbabilityMap& pred, const BinaryMask& gt, double beta_squared) {
    require_same_shape(pred, gt, "f_beta");
    return f_beta(confusion(binarize(pred), gt), beta_squared);
}

double mae(const ProbabilityMap& pred, const BinaryMask& gt) {
    require_same_shape(pred, gt, "mae");
    if (pred.data.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        sum += std::abs(static_cast<double>(pred.data[i]) - (gt.data[i] ? 1.0 : 0.0));
    }
    return sum / static_cast<double>(pred.data.size());
}

double mae(const ProbabilityMap& a, const ProbabilityMap& b) {
    require_same_shape(a, b, "mae");
    if (a.data.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        sum += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    }
    return sum / static_cast<double>(a.data.size());
}

double ber(const BinaryMask& pred, const BinaryMask& gt) {
    return ber(confusion(pred, gt));
}

Aggregation parse_aggregation(const std::string& name) {
    if (name == "per_image") {
        return Aggregation::PerImage;
    }
    if (name == "pooled") {
        return Aggregation::Pooled;
    }
    throw ConfigError("unknown aggregation '" + name + "' (expected per_image|pooled)");
}

Accumulator::Accumulator(Aggregation aggregation, double threshold)
    : aggregation_(aggregation), threshold_(threshold) {}

ImageMetrics Accumulator::add(const ProbabilityMap& pred, const BinaryMask& gt) {
    require_same_shape(pred, gt, "evaluate");
    const auto c = confusion(binarize(pred, threshold_), gt);
    ImageMetrics m{iou(c), f_beta(c), mae(pred, gt), ber(c)};
    per_image_.push_back(m);
    pooled_ += c;
    abs_error_sum_ += m.mae * static_cast<double>(pred.size());
    pixels_ += pred.size();
    return m;
}

MetricsReport Accumulator::finish() const {
    MetricsReport report;
    report.per_image = per_image_;
    report.aggregation = aggregation_;
    if (per_image_.empty()) {
        return report;
    }
    if (aggregation_ == Aggregation::Pooled) {
        report.mean = {iou(pooled_), f_beta(pooled_), abs_error_sum_ / static_cast<double>(pixels_), ber(pooled_)};
        return report;
    }
    for (const auto& m : per_image_) {
        report.mean.iou += m.iou;
        report.mean.f_beta += m.f_beta;
        report.mean.mae += m.mae;
        report.mean.ber += m.ber;
    }
    const double n = static_cast<double>(per_image_.size());
    report.mean.iou /= n;
    report.mean.f_beta /= n;
    report.mean.mae /= n;
    report.mean.ber /= n;
    return report;
}

MetricsReport evaluate_dataset(std::span<const ProbabilityMap> predictions, std::span<const BinaryMask> gts,
                               Aggregation aggregation) {
    if (predictions.size() != gts.size()) {
        throw DimensionError("evaluate_dataset: " + std::to_string(predictions.size()) + " predictions vs " +
                             std::to_string(gts.size()) + " ground truths");
    }
    Accumulator acc(aggregation);
    for (size_t i = 0; i < predictions.size(); ++i) {
        acc.add(predictions[i], gts[i]);
    }
    return acc.finish();
}

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

std::string metric_columns(const ImageMetrics& m) {
    return fmt("%.3f", m.iou) + " | " + fmt("%.3f", m.f_beta) + " | " + fmt("%.3f", m.mae) + " | " + fmt("%.2f", m.ber);
}

}  // namespace

std::string format_row(const std::string& name, const ImageMetrics& m) {
    return name + " | " + metric_columns(m);
}

std::string format_transfer_row(const std::string& paradigm, const std::string& dataset, const ImageMetrics& m) {
    return paradigm + " | " + dataset + " | " + metric_columns(m);
}

std::string table_header() {
    return "Method | IoU | Fbeta | MAE | BER";
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : report.per_image) {
        per.push_back({{"iou", m.iou}, {"f_beta", m.f_beta}, {"mae", m.mae}, {"ber", m.ber}});
    }
    return {{"aggregation", report.aggregation == Aggregation::PerImage ? "per_image" : "pooled"},
            {"count", report.per_image.size()},
            {"iou", report.mean.iou},
            {"f_beta", report.mean.f_beta},
            {"mae", report.mean.mae},
            {"ber", report.mean.ber},
            {"per_image", per}};
}

std::string to_delimited(const MetricsReport& report) {
    std::ostringstream out;
    out << "image\tiou\tf_beta\tmae\tber\n";
    for (size_t i = 0; i < report.per_image.size(); ++i) {
        const auto& m = report.per_image[i];
        out << i << '\t' << fmt("%.6f", m.iou) << '\t' << fmt("%.6f", m.f_beta) << '\t' << fmt("%.6f", m.mae) << '\t'
            << fmt("%.4f", m.ber) << '\n';
    }
    out << "mean\t" << fmt("%.6f", report.mean.iou) << '\t' << fmt("%.6f", report.mean.f_beta) << '\t'
        << fmt("%.6f", report.mean.mae) << '\t' << fmt("%.4f", report.mean.ber) << '\n';
    return out.str();
}

}  // namespace gem::metrics
