#include "gem/harness/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gem/convert.hpp"
#include "gem/datagen/pipeline.hpp"
#include "gem/error.hpp"
#include "gem/image_io.hpp"

namespace gem::harness {

PairDataset::PairDataset(datagen::DatasetManifest manifest) : manifest_(std::move(manifest)) {
    if (manifest_.entries.empty()) {
        throw DataError("dataset manifest has no entries");
    }
}

Sample PairDataset::load(size_t index) const {
    const auto& e = manifest_.entries.at(index);
    Sample s;
    try {
        s.image = io::read_image(manifest_.resolve(e.image_path));
        s.mask = io::read_mask(manifest_.resolve(e.mask_path));
    } catch (const IoError& err) {
        throw DataError("entry " + std::to_string(index) + ": " + err.what());
    }
    if (s.image.height != s.mask.height || s.image.width != s.mask.width) {
        throw DataError("entry " + std::to_string(index) + ": image and mask sizes differ (" + e.image_path + ")");
    }
    s.index = index;
    return s;
}

namespace {

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Sample prepare(const Sample& sample, int64_t size, const AugmentConfig& augment, std::mt19937_64* rng) {
    Sample out;
    out.index = sample.index;
    if (!augment.enabled || rng == nullptr) {
        out.image = io::resize_bilinear(sample.image, size, size);
        out.mask = io::resize_nearest(sample.mask, size, size);
        return out;
    }
    const bool flip = augment.hflip && uniform(*rng) < 0.5;
    const double scale = augment.scale_min + (augment.scale_max - augment.scale_min) * uniform(*rng);
    const auto scaled = std::max<int64_t>(1, std::llround(static_cast<double>(size) * scale));
    const auto image = io::resize_bilinear(sample.image, scaled, scaled);
    const auto mask = io::resize_nearest(sample.mask, scaled, scaled);
    // Crop offset when scaled > size, pad offset when smaller.
    const auto slack = std::abs(scaled - size);
    const auto oy = static_cast<int64_t>(uniform(*rng) * static_cast<double>(slack + 1));
    const auto ox = static_cast<int64_t>(uniform(*rng) * static_cast<double>(slack + 1));

    out.image = Image(size, size);
    out.mask = BinaryMask(size, size);
    for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
            const auto sy = scaled >= size ? y + oy : y - oy;
            auto sx = scaled >= size ? x + ox : x - ox;
            if (sy < 0 || sx < 0 || sy >= scaled || sx >= scaled) {
                continue;
            }
            if (flip) {
                sx = scaled - 1 - sx;
            }
            for (int c = 0; c < 3; ++c) {
                out.image.at(y, x, c) = image.at(sy, sx, c);
            }
            out.mask.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

Batch collate(const std::vector<Sample>& samples, torch::Dtype dtype) {
    Batch b;
    std::vector<torch::Tensor> images;
    for (const auto& s : samples) {
        images.push_back(to_tensor(s.image));
        b.masks.push_back(s.mask);
        b.ids.push_back(s.index);
    }
    b.images = torch::stack(images).to(dtype);
    return b;
}

BatchLoader::BatchLoader(const PairDataset& dataset, int64_t batch_size, int64_t steps, int64_t image_size,
                         AugmentConfig augment, uint64_t seed, size_t prefetch, torch::Dtype dtype)
    : queue_(prefetch) {
    producer_ = std::jthread([this, &dataset, batch_size, steps, image_size, augment, seed, dtype](std::stop_token stop) {
        std::mt19937_64 order_rng(seed);
        std::mt19937_64 aug_rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::vector<size_t> order;
        size_t cursor = 0;
        for (int64_t step = 0; step < steps && !stop.stop_requested(); ++step) {
            auto item = std::make_unique<Item>();
            try {
                std::vector<Sample> samples;
                for (int64_t i = 0; i < batch_size; ++i) {
                    if (cursor == order.size()) {
                        order.resize(dataset.size());
                        std::iota(order.begin(), order.end(), size_t{0});
                        // Fisher-Yates on raw engine output keeps the order library-independent.
                        for (size_t j = order.size(); j > 1; --j) {
                            std::swap(order[j - 1], order[order_rng() % j]);
                        }
                        cursor = 0;
                    }
                    samples.push_back(prepare(dataset.load(order[cursor++]), image_size, augment, &aug_rng));
                }
                item->batch = collate(samples, dtype);
            } catch (...) {
                item->error = std::current_exception();
            }
            const bool failed = item->error != nullptr;
            if (!queue_.push(std::move(item)) || failed) {
                break;
            }
        }
        queue_.close();
    });
}

BatchLoader::~BatchLoader() {
    producer_.request_stop();
    queue_.close();
}

std::optional<Batch> BatchLoader::next() {
    auto item = queue_.pop();
    if (!item) {
        return std::nullopt;
    }
    if ((*item)->error) {
        std::rethrow_exception((*item)->error);
    }
    return std::move((*item)->batch);
}

}  // namespace gem::harness
