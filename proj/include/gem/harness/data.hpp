#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include <torch/torch.h>

#include "gem/datagen/manifest.hpp"
#include "gem/grid.hpp"
#include "gem/harness/config.hpp"

namespace gem::harness {

struct Sample {
    Image image;
    BinaryMask mask;
    size_t index = 0;
};

struct Batch {
    torch::Tensor images;  ///< (B, 3, S, S)
    std::vector<BinaryMask> masks;
    std::vector<size_t> ids;
};

/// Reads manifest pairs. Throws DataError on a missing or mismatched pair.
class PairDataset {
public:
    explicit PairDataset(datagen::DatasetManifest manifest);
    [[nodiscard]] size_t size() const { return manifest_.count(); }
    [[nodiscard]] Sample load(size_t index) const;
    [[nodiscard]] const datagen::DatasetManifest& manifest() const { return manifest_; }

private:
    datagen::DatasetManifest manifest_;
};

/// Resize to size x size; with augmentation also a horizontal flip, a scale jitter and a
/// crop (or zero pad) back to size x size.
Sample prepare(const Sample& sample, int64_t size, const AugmentConfig& augment, std::mt19937_64* rng);

Batch collate(const std::vector<Sample>& samples, torch::Dtype dtype);

/// Bounded blocking queue; close() wakes waiting consumers.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(size_t capacity) : capacity_(capacity) {}

    bool push(T value) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) {
            return false;
        }
        items_.push_back(std::move(value));
        not_empty_.notify_one();
        return true;
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) {
            return std::nullopt;
        }
        T value = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return value;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable not_empty_, not_full_;
};

/// Produces `steps` shuffled batches on a background thread. The order and augmentation
/// depend only on the seed. Errors raised while loading surface from next().
class BatchLoader {
public:
    BatchLoader(const PairDataset& dataset, int64_t batch_size, int64_t steps, int64_t image_size,
                AugmentConfig augment, uint64_t seed, size_t prefetch, torch::Dtype dtype);
    ~BatchLoader();
    BatchLoader(const BatchLoader&) = delete;
    BatchLoader& operator=(const BatchLoader&) = delete;

    /// nullopt after the last batch.
    std::optional<Batch> next();

private:
    struct Item {
        std::optional<Batch> batch;
        std::exception_ptr error;
    };
    BoundedQueue<std::unique_ptr<Item>> queue_;
    std::jthread producer_;
};

}  // namespace gem::harness
