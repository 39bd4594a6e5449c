#include "gem/datagen/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gem/convert.hpp"
#include "gem/datagen/backend.hpp"
#include "gem/error.hpp"
#include "gem/image_io.hpp"

namespace gem::datagen {

EncoderEmbedder::EncoderEmbedder(ImageEncoder encoder) : encoder_(std::move(encoder)) { encoder_->eval(); }

std::vector<double> EncoderEmbedder::embed(const Image& image) {
    const auto size = encoder_->config().image_size;
    const auto resized = io::resize_bilinear(image, size, size);
    torch::NoGradGuard no_grad;
    auto features = encoder_->forward(to_tensor(resized).unsqueeze(0));
    auto pooled = features.mean({2, 3}).squeeze(0).to(torch::kFloat64).contiguous();
    const auto* p = pooled.data_ptr<double>();
    return {p, p + pooled.numel()};
}

HttpEmbedder::HttpEmbedder(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    if (endpoint_.empty()) {
        throw ConfigError("embedding endpoint is empty");
    }
}

std::vector<double> HttpEmbedder::embed(const Image& image) {
    const auto [host, prefix] = split_endpoint(endpoint_);
    httplib::Client client(host);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    const auto png = io::encode_png(image);
    httplib::MultipartFormDataItems items = {{"image", std::string(png.begin(), png.end()), "image.png", "image/png"}};
    auto res = client.Post(prefix + "/embed", items);
    if (!res) {
        throw BackendError("embedding request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("embedding service returned " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("malformed embedding response: ") + e.what());
    }
}

DistributionComparison compare_distributions(const DatasetManifest& a, const std::string& label_a,
                                             const DatasetManifest& b, const std::string& label_b,
                                             EmbeddingBackend& embedder, const TsneOptions& options) {
    const double n = static_cast<double>(a.count() + b.count());
    if (n - 1.0 < 3.0 * options.perplexity) {
        throw ParameterError("perplexity " + std::to_string(options.perplexity) + " too large for " +
                             std::to_string(a.count() + b.count()) + " images; need n - 1 >= 3 * perplexity");
    }
    std::vector<std::vector<double>> embeddings;
    std::vector<std::string> labels;
    for (const auto& [manifest, label] : {std::pair{&a, &label_a}, std::pair{&b, &label_b}}) {
        for (const auto& e : manifest->entries) {
            embeddings.push_back(embedder.embed(io::read_image(manifest->resolve(e.image_path))));
            labels.push_back(*label);
        }
    }
    const auto coords = tsne(embeddings, options);
    DistributionComparison out;
    for (size_t i = 0; i < coords.size(); ++i) {
        out.points.push_back({coords[i][0], coords[i][1], labels[i]});
    }
    return out;
}

double mean_pairwise_spread(const DistributionComparison& cmp, const std::string& label) {
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < cmp.points.size(); ++i) {
        if (cmp.points[i].label != label) {
            continue;
        }
        for (size_t j = i + 1; j < cmp.points.size(); ++j) {
            if (cmp.points[j].label == label) {
                sum += std::hypot(cmp.points[i].x - cmp.points[j].x, cmp.points[i].y - cmp.points[j].y);
                ++pairs;
            }
        }
    }
    return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

void write_scatter_csv(const std::filesystem::path& path, const DistributionComparison& cmp) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "x,y,label\n";
    for (const auto& p : cmp.points) {
        out << p.x << ',' << p.y << ',' << p.label << '\n';
    }
}

void write_scatter_svg(const std::filesystem::path& path, const DistributionComparison& cmp) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
    if (!cmp.points.empty()) {
        min_x = max_x = cmp.points[0].x;
        min_y = max_y = cmp.points[0].y;
        for (const auto& p : cmp.points) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    const double span_x = std::max(max_x - min_x, 1e-9), span_y = std::max(max_y - min_y, 1e-9);
    std::vector<std::string> labels;
    for (const auto& p : cmp.points) {
        if (std::find(labels.begin(), labels.end(), p.label) == labels.end()) {
            labels.push_back(p.label);
        }
    }
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"540\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& p : cmp.points) {
        const auto idx = std::find(labels.begin(), labels.end(), p.label) - labels.begin();
        out << "<circle cx=\"" << 10 + 500 * (p.x - min_x) / span_x << "\" cy=\"" << 10 + 500 * (p.y - min_y) / span_y
            << "\" r=\"3\" fill=\"" << palette[idx % 4] << "\" fill-opacity=\"0.7\"/>\n";
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        out << "<text x=\"10\" y=\"" << 528 - 14 * static_cast<int>(labels.size() - 1 - i) << "\" fill=\"" << palette[i % 4]
            << "\" font-size=\"12\">" << labels[i] << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace gem::datagen
