#include "gem/datagen/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <httplib.h>

#include "gem/image_io.hpp"

namespace gem::datagen {
namespace {

uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t hash_bytes(const uint8_t* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// std::uniform_real_distribution is implementation-defined; map raw bits ourselves so
// images are identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace

Image ProceduralBackend::generate(const BinaryMask& mask_in, const std::string& prompt, uint64_t seed, int64_t size) {
    const BinaryMask mask = io::resize_nearest(mask_in, size, size);
    uint64_t h = mix(seed);
    h = hash_bytes(reinterpret_cast<const uint8_t*>(prompt.data()), prompt.size(), h);
    h = hash_bytes(mask.data.data(), mask.data.size(), h);
    Rng rng(mix(h));

    float c0[3], c1[3], tint[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(rng.uniform(0.1, 0.9));
        c1[c] = static_cast<float>(rng.uniform(0.1, 0.9));
    }
    tint[0] = static_cast<float>(rng.uniform(0.75, 1.0));
    tint[1] = static_cast<float>(rng.uniform(0.85, 1.0));
    tint[2] = static_cast<float>(rng.uniform(0.95, 1.0));
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double tex_freq = rng.uniform(1.0, 4.0);
    const double tex_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double alpha = rng.uniform(0.25, 0.5);
    const int64_t shift = static_cast<int64_t>(std::floor(rng.uniform(-3.0, 4.0)));
    const double streak_angle = rng.uniform(0.0, std::numbers::pi);
    const double streak_offset = rng.uniform(-0.3, 0.3);
    const double streak_width = rng.uniform(0.03, 0.06);

    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    auto background = [&](int64_t y, int64_t x, int c) {
        const double u = static_cast<double>(x) / static_cast<double>(size) - 0.5;
        const double v = static_cast<double>(y) / static_cast<double>(size) - 0.5;
        const double t = std::clamp(u * ca + v * sa + 0.5, 0.0, 1.0);
        const double tex = 0.05 * std::sin(2.0 * std::numbers::pi * tex_freq * (u - v) + tex_phase + c);
        return std::clamp((1.0 - t) * c0[c] + t * c1[c] + tex, 0.0, 1.0);
    };

    Image image(size, size);
    const double sc = std::cos(streak_angle);
    const double ss = std::sin(streak_angle);
    for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
            if (!mask.at(y, x)) {
                for (int c = 0; c < 3; ++c) {
                    image.at(y, x, c) = static_cast<float>(background(y, x, c));
                }
                continue;
            }
            // Glass: slightly displaced transmitted background, tinted, plus a specular streak.
            const int64_t sx = std::clamp<int64_t>(x + shift, 0, size - 1);
            const double u = static_cast<double>(x) / static_cast<double>(size) - 0.5;
            const double v = static_cast<double>(y) / static_cast<double>(size) - 0.5;
            const double d = std::abs(u * sc + v * ss - streak_offset);
            const double streak = d < streak_width ? 0.35 * (1.0 - d / streak_width) : 0.0;
            for (int c = 0; c < 3; ++c) {
                const double value = (1.0 - alpha) * background(y, sx, c) + alpha * tint[c] + streak;
                image.at(y, x, c) = static_cast<float>(std::clamp(value, 0.0, 1.0));
            }
        }
    }
    return image;
}

std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = endpoint.find('/', host_start);
    if (slash == std::string::npos) {
        return {endpoint, ""};
    }
    auto prefix = endpoint.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') {
        prefix.pop_back();
    }
    return {endpoint.substr(0, slash), prefix};
}

HttpBackend::HttpBackend(std::string endpoint, std::chrono::milliseconds timeout, std::string model_version)
    : endpoint_(std::move(endpoint)), timeout_(timeout), model_version_(std::move(model_version)) {
    if (endpoint_.empty()) {
        throw ConfigError("generation backend endpoint is empty");
    }
}

Image HttpBackend::generate(const BinaryMask& mask, const std::string& prompt, uint64_t seed, int64_t size) {
    const auto [host, prefix] = split_endpoint(endpoint_);
    httplib::Client client(host);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    const auto png = io::encode_png(mask);
    httplib::MultipartFormDataItems items = {
        {"mask", std::string(png.begin(), png.end()), "mask.png", "image/png"},
        {"prompt", prompt, "", ""},
        {"seed", std::to_string(seed), "", ""},
        {"size", std::to_string(size), "", ""},
        {"model_version", model_version_, "", ""},
    };
    auto res = client.Post(prefix + "/generate", items);
    if (!res) {
        throw TransientBackendError("generation request failed: " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw TransientBackendError("generation service returned " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw BackendError("generation service returned " + std::to_string(res->status) + ": " + res->body);
    }
    const std::vector<uint8_t> bytes(res->body.begin(), res->body.end());
    return io::decode_png_image(bytes);
}

}  // namespace gem::datagen
