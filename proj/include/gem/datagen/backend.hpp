#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "gem/grid.hpp"

namespace gem::datagen {

/// Mask-conditioned image generator. Implementations return an image of exactly
/// size x size and are deterministic for a fixed (mask, prompt, seed).
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual Image generate(const BinaryMask& mask, const std::string& prompt, uint64_t seed, int64_t size) = 0;
    /// Identifies the generator weights (e.g. a finetuned control model).
    [[nodiscard]] virtual std::string model_version() const = 0;
};

/// Thrown by backends for failures worth retrying.
class TransientBackendError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Procedural stand-in: gradient background, the mask region tinted with alpha in
/// [0.25, 0.5] and a specular streak across it. A pure function of its inputs.
class ProceduralBackend final : public GenerationBackend {
public:
    Image generate(const BinaryMask& mask, const std::string& prompt, uint64_t seed, int64_t size) override;
    [[nodiscard]] std::string model_version() const override { return "procedural-v1"; }
};

/// HTTP client for a diffusion service.
///
/// POST {endpoint}/generate, multipart/form-data:
///   mask           PNG, single channel, values {0, 255}
///   prompt         text
///   seed           decimal uint64
///   size           decimal int
///   model_version  text (may be empty)
/// 200 response body: PNG image of size x size. Timeouts and 5xx raise
/// TransientBackendError, other failures BackendError.
class HttpBackend final : public GenerationBackend {
public:
    HttpBackend(std::string endpoint, std::chrono::milliseconds timeout, std::string model_version = {});
    Image generate(const BinaryMask& mask, const std::string& prompt, uint64_t seed, int64_t size) override;
    [[nodiscard]] std::string model_version() const override { return model_version_; }

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
    std::string model_version_;
};

/// Splits "http://host:port/prefix" into scheme+host and path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint);

}  // namespace gem::datagen
