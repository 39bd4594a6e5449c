#pragma once

// Reader/writer for the safetensors container:
//   [u64 little-endian header length N][N bytes JSON header][raw tensor bytes]
// The header maps tensor names to {"dtype", "shape", "data_offsets": [begin, end]}
// (offsets relative to the start of the byte buffer) plus an optional
// "__metadata__" object of string -> string.

#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>

namespace gem::safetensors {

struct TensorFile {
    std::map<std::string, torch::Tensor> tensors;
    std::map<std::string, std::string> metadata;
};

/// Loads every tensor onto the CPU. F16/BF16/F32/F64/I64/I32/U8 are supported.
TensorFile load(const std::filesystem::path& path);

/// Writes tensors in key order; tensors are made contiguous and moved to CPU.
void save(const std::filesystem::path& path, const TensorFile& file);

}  // namespace gem::safetensors
