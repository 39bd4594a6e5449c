#include "gem/harness/checkpoint.hpp"

#include "gem/error.hpp"
#include "gem/safetensors.hpp"

namespace gem::harness {

void save_checkpoint(const std::filesystem::path& path, GemModel& model, const Config& config,
                     const CheckpointMeta& meta, const torch::optim::AdamW* optimizer) {
    safetensors::TensorFile file;
    for (const auto& p : model->named_parameters()) {
        file.tensors["model." + p.key()] = p.value().detach();
    }
    for (const auto& b : model->named_buffers()) {
        file.tensors["model." + b.key()] = b.value().detach();
    }
    int64_t optim_step = 0;
    if (optimizer != nullptr) {
        const auto& state = optimizer->state();
        for (const auto& p : model->named_parameters()) {
            const auto it = state.find(p.value().unsafeGetTensorImpl());
            if (it == state.end()) {
                continue;
            }
            const auto& s = static_cast<const torch::optim::AdamWParamState&>(*it->second);
            file.tensors["optim." + p.key() + ".exp_avg"] = s.exp_avg();
            file.tensors["optim." + p.key() + ".exp_avg_sq"] = s.exp_avg_sq();
            optim_step = s.step();
        }
    }
    file.metadata["epoch"] = std::to_string(meta.epoch);
    file.metadata["step"] = std::to_string(meta.step);
    file.metadata["stage"] = to_string(meta.stage);
    file.metadata["config_hash"] = meta.config_hash.empty() ? config.hash() : meta.config_hash;
    file.metadata["config"] = config.json.dump();
    file.metadata["optim.step"] = std::to_string(optim_step);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    safetensors::save(path, file);
}

namespace {

CheckpointMeta read_meta(const safetensors::TensorFile& file, const std::filesystem::path& path) {
    CheckpointMeta meta;
    try {
        meta.epoch = std::stoll(file.metadata.at("epoch"));
        meta.step = std::stoll(file.metadata.at("step"));
        meta.stage = parse_stage(file.metadata.at("stage"));
        meta.config_hash = file.metadata.at("config_hash");
    } catch (const std::exception& e) {
        throw LoadError("checkpoint " + path.string() + " lacks metadata: " + e.what());
    }
    return meta;
}

void copy_state(const safetensors::TensorFile& file, GemModel& model, const std::filesystem::path& path) {
    torch::NoGradGuard no_grad;
    std::vector<std::string> problems;
    auto copy = [&](const std::string& name, torch::Tensor& dst) {
        const auto it = file.tensors.find("model." + name);
        if (it == file.tensors.end()) {
            problems.push_back("missing " + name);
        } else if (it->second.sizes() != dst.sizes()) {
            problems.push_back("shape mismatch for " + name);
        } else {
            dst.copy_(it->second);
        }
    };
    for (auto& p : model->named_parameters()) {
        copy(p.key(), p.value());
    }
    for (auto& b : model->named_buffers()) {
        copy(b.key(), b.value());
    }
    if (!problems.empty()) {
        std::string msg = "checkpoint " + path.string() + " does not fit the model:";
        for (const auto& p : problems) {
            msg += "\n  " + p;
        }
        throw LoadError(msg);
    }
}

}  // namespace

CheckpointMeta load_model_state(const std::filesystem::path& path, GemModel& model) {
    const auto file = safetensors::load(path);
    copy_state(file, model, path);
    return read_meta(file, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const auto file = safetensors::load(path);
    LoadedCheckpoint out;
    out.meta = read_meta(file, path);
    const auto it = file.metadata.find("config");
    if (it == file.metadata.end()) {
        throw LoadError("checkpoint " + path.string() + " has no embedded config");
    }
    auto doc = nlohmann::json::parse(it->second);
    // Weights come from the checkpoint, not from the original initializer.
    doc["model"]["encoder"]["init"] = "random";
    doc["model"]["encoder"]["weights"] = "";
    out.config = parse_config(doc);
    out.config.json = nlohmann::json::parse(it->second);
    out.model = GemModel(out.config.model);
    // Dtype follows the stored tensors.
    out.model->to(file.tensors.begin()->second.scalar_type());
    copy_state(file, out.model, path);
    return out;
}

void load_optimizer_state(const std::filesystem::path& path, GemModel& model, torch::optim::AdamW& optimizer) {
    const auto file = safetensors::load(path);
    const auto step = std::stoll(file.metadata.at("optim.step"));
    auto& state = optimizer.state();
    for (const auto& p : model->named_parameters()) {
        const auto m = file.tensors.find("optim." + p.key() + ".exp_avg");
        const auto v = file.tensors.find("optim." + p.key() + ".exp_avg_sq");
        if (m == file.tensors.end() || v == file.tensors.end()) {
            continue;
        }
        auto s = std::make_unique<torch::optim::AdamWParamState>();
        s->step(step);
        s->exp_avg(m->second.clone());
        s->exp_avg_sq(v->second.clone());
        state[p.value().unsafeGetTensorImpl()] = std::move(s);
    }
}

}  // namespace gem::harness
