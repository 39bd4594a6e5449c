#include "gem/harness/evaluate.hpp"

#include "gem/convert.hpp"
#include "gem/error.hpp"
#include "gem/harness/checkpoint.hpp"
#include "gem/harness/data.hpp"
#include "gem/image_io.hpp"

namespace gem::harness {

SemanticPrediction predict(GemModel& model, const Image& image, double threshold) {
    torch::NoGradGuard no_grad;
    model->eval();
    const auto size = model->config().encoder.image_size;
    const auto dtype = model->parameters().front().scalar_type();
    const auto input = to_tensor(io::resize_bilinear(image, size, size)).unsqueeze(0).to(dtype);
    const auto out = model->forward(input);
    return predict_semantic(out.prediction, 0, image.height, image.width, threshold);
}

metrics::MetricsReport evaluate(GemModel& model, const datagen::DatasetManifest& manifest, const EvalConfig& config,
                                const std::filesystem::path& prediction_dir) {
    const PairDataset dataset(manifest);
    if (!prediction_dir.empty()) {
        std::filesystem::create_directories(prediction_dir);
    }
    metrics::Accumulator acc(config.aggregation, config.threshold);
    for (size_t i = 0; i < dataset.size(); ++i) {
        const auto sample = dataset.load(i);
        const auto pred = predict(model, sample.image, config.threshold);
        acc.add(pred.probability, sample.mask);
        if (!prediction_dir.empty()) {
            const auto stem = std::filesystem::path(manifest.entries[i].image_path).stem().string();
            io::write_mask(prediction_dir / (stem + ".png"), pred.mask);
        }
    }
    return acc.finish();
}

metrics::MetricsReport zero_shot_eval(const std::filesystem::path& checkpoint, const datagen::DatasetManifest& manifest,
                                      const EvalConfig& config) {
    auto loaded = load_checkpoint(checkpoint);
    if (loaded.meta.stage != Stage::Pretrain) {
        throw ConfigError("zero-shot evaluation needs a pretrain-stage checkpoint; " + checkpoint.string() + " is " +
                          to_string(loaded.meta.stage));
    }
    return evaluate(loaded.model, manifest, config);
}

}  // namespace gem::harness
