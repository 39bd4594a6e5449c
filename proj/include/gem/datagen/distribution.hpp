#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gem/datagen/manifest.hpp"
#include "gem/datagen/tsne.hpp"
#include "gem/encoder.hpp"
#include "gem/grid.hpp"

namespace gem::datagen {

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<double> embed(const Image& image) = 0;
};

/// Mean-pooled features of this library's image encoder (fallback when no CLIP service is set).
class EncoderEmbedder final : public EmbeddingBackend {
public:
    explicit EncoderEmbedder(ImageEncoder encoder);
    std::vector<double> embed(const Image& image) override;

private:
    ImageEncoder encoder_;
};

/// POST {endpoint}/embed with multipart field "image" (PNG); response JSON {"embedding": [...]}.
class HttpEmbedder final : public EmbeddingBackend {
public:
    HttpEmbedder(std::string endpoint, std::chrono::milliseconds timeout);
    std::vector<double> embed(const Image& image) override;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
};

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    std::string label;
};

struct DistributionComparison {
    std::vector<ScatterPoint> points;
};

/// Embeds every image of both manifests and reduces the embeddings jointly to 2-D.
DistributionComparison compare_distributions(const DatasetManifest& a, const std::string& label_a,
                                             const DatasetManifest& b, const std::string& label_b,
                                             EmbeddingBackend& embedder, const TsneOptions& options);

/// Mean Euclidean distance between all pairs of points carrying `label`.
double mean_pairwise_spread(const DistributionComparison& cmp, const std::string& label);

void write_scatter_csv(const std::filesystem::path& path, const DistributionComparison& cmp);
void write_scatter_svg(const std::filesystem::path& path, const DistributionComparison& cmp);

}  // namespace gem::datagen
