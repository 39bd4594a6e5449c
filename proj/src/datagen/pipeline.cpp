#include "gem/datagen/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "gem/error.hpp"
#include "gem/image_io.hpp"

namespace gem::datagen {

std::vector<std::string> validate_pair(const Image& image, const Plane<float>& mask) {
    std::vector<std::string> violations;
    if (image.height != mask.height || image.width != mask.width) {
        violations.push_back("dimension mismatch: image " + std::to_string(image.height) + "x" +
                             std::to_string(image.width) + " vs mask " + std::to_string(mask.height) + "x" +
                             std::to_string(mask.width));
    }
    int64_t foreground = 0;
    bool binary = true;
    for (const float v : mask.data) {
        if (v == 1.0f) {
            ++foreground;
        } else if (v != 0.0f) {
            binary = false;
        }
    }
    if (!binary) {
        violations.emplace_back("non-binary mask values");
    }
    const double fraction = mask.data.empty() ? 0.0 : static_cast<double>(foreground) / static_cast<double>(mask.size());
    if (!(fraction > 0.0 && fraction < 0.95)) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "foreground fraction %.4f outside (0, 0.95)", fraction);
        violations.emplace_back(buf);
    }
    return violations;
}

namespace {

Plane<float> as_values(const BinaryMask& mask) {
    Plane<float> out(mask.height, mask.width);
    for (size_t i = 0; i < mask.data.size(); ++i) {
        out.data[i] = mask.data[i] ? 1.0f : 0.0f;
    }
    return out;
}

std::string stem_for(size_t index, const GenerationJob& job) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%07zu", index);
    return std::string(buf) + "_" + job.mask_id + "_r" + std::to_string(job.replica);
}

}  // namespace

GenerationResult run_generation(const std::vector<GenerationJob>& jobs, GenerationBackend& backend,
                                const RunOptions& options, const std::string& scale_tag) {
    const auto& out_dir = options.output_dir;
    std::filesystem::create_directories(out_dir / "images");
    std::filesystem::create_directories(out_dir / "masks");

    std::vector<std::optional<ManifestEntry>> entries(jobs.size());
    std::vector<std::optional<FailureRecord>> failures(jobs.size());
    std::atomic<size_t> next{0};

    auto worker = [&] {
        for (size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            auto fail = [&](std::string reason) { failures[i] = FailureRecord{i, job.mask_id, job.seed, std::move(reason)}; };
            BinaryMask mask;
            try {
                mask = io::resize_nearest(io::read_mask(job.mask_path), job.target_size, job.target_size);
            } catch (const Error& e) {
                fail(std::string("mask: ") + e.what());
                continue;
            }

            std::optional<Image> image;
            std::string last_error;
            for (int attempt = 0; attempt <= options.retries && !image; ++attempt) {
                if (attempt > 0) {
                    std::this_thread::sleep_for(options.backoff * (1 << (attempt - 1)));
                }
                try {
                    image = backend.generate(mask, job.prompt, job.seed, job.target_size);
                } catch (const TransientBackendError& e) {
                    last_error = e.what();
                } catch (const Error& e) {
                    last_error = e.what();
                    break;
                }
            }
            if (!image) {
                fail("backend: " + last_error);
                continue;
            }
            auto violations = validate_pair(*image, as_values(mask));
            if (!violations.empty()) {
                fail("validation: " + violations.front());
                continue;
            }
            const auto stem = stem_for(i, job);
            ManifestEntry e;
            e.image_path = "images/" + stem + ".png";
            e.mask_path = "masks/" + stem + ".png";
            e.provenance = Provenance::Synthetic;
            e.prompt = job.prompt;
            e.seed = job.seed;
            e.split = Split::Train;
            try {
                io::write_image(out_dir / e.image_path, *image);
                io::write_mask(out_dir / e.mask_path, mask);
            } catch (const Error& err) {
                fail(std::string("write: ") + err.what());
                continue;
            }
            entries[i] = std::move(e);
        }
    };

    const int workers = std::max(1, std::min<int>(options.parallelism, static_cast<int>(jobs.size())));
    {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }

    GenerationResult result;
    result.manifest.scale_tag = scale_tag;
    result.manifest.base_dir = out_dir;
    for (size_t i = 0; i < jobs.size(); ++i) {
        if (entries[i]) {
            result.manifest.entries.push_back(std::move(*entries[i]));
        }
        if (failures[i]) {
            result.failures.push_back(std::move(*failures[i]));
        }
    }
    result.manifest.write(out_dir / "manifest.jsonl");

    std::ofstream fail_out(out_dir / "failures.jsonl", std::ios::trunc);
    for (const auto& f : result.failures) {
        nlohmann::ordered_json rec;
        rec["job_index"] = f.job_index;
        rec["mask_id"] = f.mask_id;
        rec["seed"] = f.seed;
        rec["reason"] = f.reason;
        fail_out << rec.dump() << '\n';
    }
    return result;
}

}  // namespace gem::datagen
