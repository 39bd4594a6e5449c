#include "gem/harness/trainer.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "gem/error.hpp"
#include "gem/harness/checkpoint.hpp"

namespace gem::harness {

GemModel build_model(const Config& config) {
    torch::manual_seed(config.train.seed);
    GemModel model(config.model);
    const auto& init = config.encoder_init;
    if (init.init != BackboneInit::Random) {
        load_encoder_weights(model->encoder, init.weights, init.naming, init.interpolate_pos_embed);
    }
    model->to(config.train.dtype());
    return model;
}

LossResult batch_loss(GemModel& model, const Batch& batch, const Config& config) {
    const auto out = model->forward(batch.images);
    const auto& c2 = out.pyramid.c2;
    const auto opts = torch::TensorOptions().dtype(c2.scalar_type());
    std::vector<TargetTensors> targets;
    for (const auto& mask : batch.masks) {
        targets.push_back(to_target_tensors(build_targets(mask, config.loss.targets), c2.size(2), c2.size(3),
                                            config.loss.downsample, opts));
    }
    if (config.model.dqs.extra_loss && out.scores) {
        std::vector<torch::Tensor> dqs;
        for (const auto& mask : batch.masks) {
            dqs.push_back(downsample_mask(mask, out.scores->height, out.scores->width, MaskDownsample::Area, opts));
        }
        const auto dqs_targets = torch::stack(dqs);
        return total_loss(out.prediction, targets, config.loss, &*out.scores, &dqs_targets);
    }
    return total_loss(out.prediction, targets, config.loss);
}

namespace {

int64_t total_steps(const Config& config, size_t dataset_size) {
    const auto per_epoch = (static_cast<int64_t>(dataset_size) + config.train.batch_size - 1) / config.train.batch_size;
    const auto steps = per_epoch * config.train.epochs();
    return config.train.max_steps > 0 ? std::min(steps, config.train.max_steps) : steps;
}

void write_nan_dump(const std::filesystem::path& dir, const StepRecord& rec, const Batch& batch,
                    const datagen::DatasetManifest& manifest, const std::string& what) {
    std::filesystem::create_directories(dir);
    nlohmann::ordered_json dump;
    dump["step"] = rec.step;
    dump["epoch"] = rec.epoch;
    dump["batch_ids"] = batch.ids;
    std::vector<std::string> images;
    for (const auto id : batch.ids) {
        images.push_back(manifest.entries[id].image_path);
    }
    dump["images"] = images;
    dump["error"] = what;
    std::ofstream(dir / "nan_batch.json") << dump.dump(2) << '\n';
}

}  // namespace

TrainResult train(const Config& config, const datagen::DatasetManifest& manifest, const TrainHooks& hooks) {
    const auto& tc = config.train;
    TrainResult result;
    result.model = build_model(config);
    auto& model = result.model;
    if (!tc.init_checkpoint.empty()) {
        load_model_state(tc.init_checkpoint, model);
    }
    model->train();

    const PairDataset dataset(manifest);
    const auto steps = total_steps(config, dataset.size());
    const auto per_epoch = (static_cast<int64_t>(dataset.size()) + tc.batch_size - 1) / tc.batch_size;
    const auto decay_step = static_cast<int64_t>(std::ceil(tc.lr_decay_at * static_cast<double>(steps)));

    std::vector<torch::optim::OptimizerParamGroup> groups;
    groups.emplace_back(model->backbone_parameters(),
                        std::make_unique<torch::optim::AdamWOptions>(
                            torch::optim::AdamWOptions(tc.lr * tc.backbone_lr_mult).weight_decay(tc.weight_decay)));
    groups.emplace_back(model->head_parameters(), std::make_unique<torch::optim::AdamWOptions>(
                                                      torch::optim::AdamWOptions(tc.lr).weight_decay(tc.weight_decay)));
    torch::optim::AdamW optimizer(groups, torch::optim::AdamWOptions(tc.lr).weight_decay(tc.weight_decay));

    const bool write = hooks.write_files && !tc.output_dir.empty();
    std::ofstream log_file;
    if (write) {
        std::filesystem::create_directories(tc.output_dir);
        log_file.open(tc.output_dir / "loss_log.jsonl", std::ios::trunc);
    }
    auto checkpoint = [&](int64_t step, int64_t epoch, const std::string& name) {
        const auto path = tc.output_dir / name;
        save_checkpoint(path, model, config, {epoch, step, tc.stage, config.hash()}, &optimizer);
        return path;
    };

    BatchLoader loader(dataset, tc.batch_size, steps, config.model.encoder.image_size, tc.augment, tc.seed,
                       static_cast<size_t>(tc.prefetch), tc.dtype());
    for (int64_t step = 0; step < steps; ++step) {
        auto batch = loader.next();
        if (!batch) {
            break;
        }
        const double factor = step >= decay_step ? tc.lr_decay : 1.0;
        optimizer.param_groups()[0].options().set_lr(tc.lr * tc.backbone_lr_mult * factor);
        optimizer.param_groups()[1].options().set_lr(tc.lr * factor);

        StepRecord rec;
        rec.step = step;
        rec.epoch = step / per_epoch;
        rec.lr = tc.lr * factor;
        LossResult loss;
        try {
            loss = batch_loss(model, *batch, config);
        } catch (const NumericError& e) {
            write_nan_dump(tc.output_dir, rec, *batch, manifest, e.what());
            std::string ids;
            for (const auto id : batch->ids) {
                ids += (ids.empty() ? "" : ",") + std::to_string(id);
            }
            throw NumericError("non-finite loss at step " + std::to_string(step) + " (batch ids " + ids +
                               "); details in " + (tc.output_dir / "nan_batch.json").string());
        }
        rec.loss = loss.total.item<double>();
        rec.terms = loss.terms;

        optimizer.zero_grad();
        if (loss.total.requires_grad()) {
            loss.total.backward();
        }
        optimizer.step();

        if (write) {
            nlohmann::ordered_json line;
            line["step"] = rec.step;
            line["epoch"] = rec.epoch;
            line["loss"] = rec.loss;
            line["lr"] = rec.lr;
            line["terms"] = rec.terms;
            log_file << line.dump() << '\n' << std::flush;
            if (tc.checkpoint_every > 0 && (step + 1) % tc.checkpoint_every == 0 && step + 1 < steps) {
                checkpoint(step + 1, rec.epoch, "checkpoint-" + std::to_string(step + 1) + ".safetensors");
            }
        }
        if (hooks.on_step) {
            hooks.on_step(rec);
        }
        result.log.push_back(std::move(rec));
    }
    if (write) {
        const auto epoch = result.log.empty() ? 0 : result.log.back().epoch + 1;
        result.checkpoint = checkpoint(static_cast<int64_t>(result.log.size()), epoch, "last.safetensors");
    }
    return result;
}

double evaluate_loss(GemModel& model, const datagen::DatasetManifest& manifest, const Config& config) {
    torch::NoGradGuard no_grad;
    const bool was_training = model->is_training();
    model->eval();
    const PairDataset dataset(manifest);
    const auto dtype = model->parameters().front().scalar_type();
    double sum = 0.0;
    int64_t batches = 0;
    for (size_t start = 0; start < dataset.size(); start += static_cast<size_t>(config.train.batch_size)) {
        std::vector<Sample> samples;
        for (size_t i = start; i < std::min(dataset.size(), start + static_cast<size_t>(config.train.batch_size)); ++i) {
            samples.push_back(prepare(dataset.load(i), config.model.encoder.image_size, {}, nullptr));
        }
        sum += batch_loss(model, collate(samples, dtype), config).total.item<double>();
        ++batches;
    }
    model->train(was_training);
    return sum / static_cast<double>(batches);
}

}  // namespace gem::harness
