#include "gem/safetensors.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gem/error.hpp"

namespace gem::safetensors {
namespace {

using json = nlohmann::json;

struct DtypeName {
    torch::ScalarType type;
    const char* name;
};

constexpr DtypeName kDtypes[] = {
    {torch::kFloat64, "F64"}, {torch::kFloat32, "F32"}, {torch::kFloat16, "F16"}, {torch::kBFloat16, "BF16"},
    {torch::kInt64, "I64"},   {torch::kInt32, "I32"},   {torch::kUInt8, "U8"},
};

torch::ScalarType parse_dtype(const std::string& name, const std::string& key) {
    for (const auto& d : kDtypes) {
        if (name == d.name) {
            return d.type;
        }
    }
    throw LoadError("tensor '" + key + "': unsupported dtype " + name);
}

const char* dtype_name(torch::ScalarType type) {
    for (const auto& d : kDtypes) {
        if (type == d.type) {
            return d.name;
        }
    }
    throw Error(std::string("unsupported dtype for safetensors: ") + c10::toString(type));
}

}  // namespace

TensorFile load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open tensor file " + path.string());
    }
    uint64_t header_len = 0;
    uint8_t len_bytes[8];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 8)) {
        throw LoadError(path.string() + ": truncated header length");
    }
    for (int i = 7; i >= 0; --i) {
        header_len = (header_len << 8) | len_bytes[i];
    }
    const auto file_size = std::filesystem::file_size(path);
    if (header_len > file_size - 8) {
        throw LoadError(path.string() + ": header length exceeds file size");
    }
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    const uint64_t data_size = file_size - 8 - header_len;
    std::vector<char> buffer(data_size);
    in.read(buffer.data(), static_cast<std::streamsize>(data_size));
    if (!in) {
        throw LoadError(path.string() + ": truncated data section");
    }

    json doc;
    try {
        doc = json::parse(header);
    } catch (const json::parse_error& e) {
        throw LoadError(path.string() + ": malformed header: " + e.what());
    }

    TensorFile file;
    for (const auto& [key, entry] : doc.items()) {
        if (key == "__metadata__") {
            for (const auto& [mk, mv] : entry.items()) {
                file.metadata[mk] = mv.get<std::string>();
            }
            continue;
        }
        const auto type = parse_dtype(entry.at("dtype").get<std::string>(), key);
        const auto shape = entry.at("shape").get<std::vector<int64_t>>();
        const auto offsets = entry.at("data_offsets").get<std::vector<uint64_t>>();
        if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > data_size) {
            throw LoadError("tensor '" + key + "': invalid data offsets");
        }
        auto tensor = torch::empty(shape, torch::TensorOptions().dtype(type));
        const auto expected = static_cast<uint64_t>(tensor.numel()) * tensor.element_size();
        if (expected != offsets[1] - offsets[0]) {
            throw LoadError("tensor '" + key + "': byte size does not match shape");
        }
        std::memcpy(tensor.data_ptr(), buffer.data() + offsets[0], expected);
        file.tensors.emplace(key, std::move(tensor));
    }
    return file;
}

void save(const std::filesystem::path& path, const TensorFile& file) {
    json header = json::object();
    std::vector<torch::Tensor> ordered;
    uint64_t offset = 0;
    for (const auto& [key, tensor] : file.tensors) {
        auto t = tensor.detach().to(torch::kCPU).contiguous();
        const uint64_t bytes = static_cast<uint64_t>(t.numel()) * t.element_size();
        header[key] = {{"dtype", dtype_name(t.scalar_type())},
                       {"shape", t.sizes().vec()},
                       {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
        ordered.push_back(std::move(t));
    }
    if (!file.metadata.empty()) {
        header["__metadata__"] = file.metadata;
    }
    std::string text = header.dump();
    while ((text.size() + 8) % 8 != 0) {
        text.push_back(' ');
    }

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write tensor file " + path.string());
    }
    uint8_t len_bytes[8];
    uint64_t len = text.size();
    for (auto& b : len_bytes) {
        b = static_cast<uint8_t>(len & 0xff);
        len >>= 8;
    }
    out.write(reinterpret_cast<const char*>(len_bytes), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : ordered) {
        out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

}  // namespace gem::safetensors
