#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gem/datagen/distribution.hpp"
#include "gem/datagen/pipeline.hpp"
#include "gem/datagen/prompt_bank.hpp"
#include "gem/error.hpp"
#include "gem/harness/benchmark.hpp"
#include "gem/harness/checkpoint.hpp"
#include "gem/harness/config.hpp"
#include "gem/harness/evaluate.hpp"
#include "gem/harness/protocol.hpp"
#include "gem/harness/trainer.hpp"
#include "gem/image_io.hpp"

namespace fs = std::filesystem;
using namespace gem;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumeric = 4 };

struct Common {
    std::vector<fs::path> configs;
    std::vector<std::string> sets;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", configs, "Config file; repeat to layer")->check(CLI::ExistingFile);
        app->add_option("-s,--set", sets, "Override, e.g. train.lr=1e-4");
    }
    harness::Config load(std::vector<std::string> extra = {}) const {
        auto all = sets;
        all.insert(all.end(), extra.begin(), extra.end());
        return harness::load_config(configs, all);
    }
};

int run_train(const Common& common, const std::string& manifest, const std::string& stage, const std::string& init,
              const std::string& out) {
    std::vector<std::string> extra;
    if (!stage.empty()) extra.push_back("train.stage=" + stage);
    if (!init.empty()) extra.push_back("train.init_checkpoint=" + init);
    if (!out.empty()) extra.push_back("train.output_dir=" + out);
    if (!manifest.empty()) extra.push_back("train.manifest=" + manifest);
    const auto cfg = common.load(extra);
    if (cfg.train.manifest.empty()) {
        throw ConfigError("no training manifest (use --manifest or train.manifest)");
    }
    auto data = datagen::DatasetManifest::read(cfg.train.manifest);
    datagen::check_manifest(data, false);
    harness::TrainHooks hooks;
    hooks.on_step = [](const harness::StepRecord& r) {
        std::cout << "step " << r.step << " epoch " << r.epoch << " loss " << r.loss << " lr " << r.lr << '\n';
    };
    const auto result = harness::train(cfg, data, hooks);
    std::cout << "checkpoint " << result.checkpoint.string() << '\n';
    return kOk;
}

int run_eval(const Common& common, const std::string& checkpoint, const std::string& manifest, bool zero_shot,
             const std::string& name, const std::string& paradigm, const std::string& json_out, const std::string& pred_dir) {
    auto cfg = common.load(manifest.empty() ? std::vector<std::string>{} : std::vector<std::string>{"eval.manifest=" + manifest});
    if (cfg.eval.manifest.empty()) {
        throw ConfigError("no evaluation manifest (use --manifest or eval.manifest)");
    }
    const auto data = datagen::DatasetManifest::read(cfg.eval.manifest);
    metrics::MetricsReport report;
    if (zero_shot) {
        report = harness::zero_shot_eval(checkpoint, data, cfg.eval);
    } else {
        auto loaded = harness::load_checkpoint(checkpoint);
        report = harness::evaluate(loaded.model, data, cfg.eval, pred_dir);
    }
    if (!paradigm.empty()) {
        std::cout << "Paradigm | Dataset | IoU | Fbeta | MAE | BER\n"
                  << metrics::format_transfer_row(paradigm, name, report.mean) << '\n';
    } else {
        std::cout << metrics::table_header() << '\n' << metrics::format_row(name, report.mean) << '\n';
    }
    if (!json_out.empty()) {
        std::ofstream(json_out) << metrics::to_json(report).dump(2) << '\n';
    }
    return kOk;
}

int run_predict(const std::string& checkpoint, const std::string& image_path, const std::string& out,
                const std::string& overlay_out, double threshold) {
    auto loaded = harness::load_checkpoint(checkpoint);
    const auto image = io::read_image(image_path);
    const auto pred = harness::predict(loaded.model, image, threshold);
    io::write_mask(out, pred.mask);
    if (!overlay_out.empty()) {
        io::write_image(overlay_out, io::overlay(image, pred.mask));
    }
    return kOk;
}

std::unique_ptr<datagen::GenerationBackend> make_backend(const harness::DatagenConfig& cfg) {
    if (cfg.backend == "http") {
        return std::make_unique<datagen::HttpBackend>(cfg.endpoint, cfg.timeout, cfg.model_version);
    }
    return std::make_unique<datagen::ProceduralBackend>();
}

int run_generate(const Common& common, const std::string& masks, const std::string& scale, const std::string& out,
                 const std::string& backend) {
    std::vector<std::string> extra;
    if (!masks.empty()) extra.push_back("datagen.masks_manifest=" + masks);
    if (!scale.empty()) extra.push_back("datagen.scale=" + scale);
    if (!out.empty()) extra.push_back("datagen.output_dir=" + out);
    if (!backend.empty()) extra.push_back("datagen.backend=" + backend);
    const auto cfg = common.load(extra).datagen;
    if (cfg.masks_manifest.empty()) {
        throw ConfigError("no mask manifest (use --masks or datagen.masks_manifest)");
    }
    const auto bank = cfg.prompt_file.empty() ? datagen::PromptBank::standard() : datagen::PromptBank::load(cfg.prompt_file);
    const auto records = datagen::masks_from_manifest(datagen::DatasetManifest::read(cfg.masks_manifest));
    const auto jobs = datagen::build_jobs(records, bank, cfg.jobs);
    auto gen = make_backend(cfg);
    const auto result = datagen::run_generation(jobs, *gen, {cfg.output_dir, cfg.parallelism, cfg.retries, cfg.backoff},
                                                cfg.jobs.scale_tag);
    std::cout << "generated " << result.manifest.count() << " of " << jobs.size() << " pairs ("
              << result.failures.size() << " failed) with " << gen->model_version() << " into "
              << cfg.output_dir.string() << '\n';
    return result.failures.empty() ? kOk : kData;
}

int run_compare(const Common& common, const std::string& a, const std::string& b, const std::string& label_a,
                const std::string& label_b, const std::string& out, const std::string& checkpoint) {
    const auto cfg = common.load();
    std::unique_ptr<datagen::EmbeddingBackend> embedder;
    if (cfg.compare.embedder == "http") {
        embedder = std::make_unique<datagen::HttpEmbedder>(cfg.compare.endpoint, cfg.compare.timeout);
    } else if (!checkpoint.empty()) {
        embedder = std::make_unique<datagen::EncoderEmbedder>(harness::load_checkpoint(checkpoint).model->encoder);
    } else {
        embedder = std::make_unique<datagen::EncoderEmbedder>(harness::build_model(cfg)->encoder);
    }
    datagen::TsneOptions opts;
    opts.perplexity = cfg.compare.perplexity;
    opts.iterations = cfg.compare.iterations;
    opts.seed = cfg.compare.seed;
    const auto cmp = datagen::compare_distributions(datagen::DatasetManifest::read(a), label_a,
                                                    datagen::DatasetManifest::read(b), label_b, *embedder, opts);
    datagen::write_scatter_csv(out + ".csv", cmp);
    datagen::write_scatter_svg(out + ".svg", cmp);
    std::cout << "spread " << label_a << " " << datagen::mean_pairwise_spread(cmp, label_a) << ", " << label_b << " "
              << datagen::mean_pairwise_spread(cmp, label_b) << '\n';
    return kOk;
}

int run_benchmark(const std::string& checkpoint, int64_t size, int trials, int warmup, const std::string& name) {
    auto loaded = harness::load_checkpoint(checkpoint);
    const auto r = harness::benchmark_fps(loaded.model, size > 0 ? size : loaded.config.model.encoder.image_size, trials, warmup);
    std::cout << harness::format_fps_row(name, r) << '\n'
              << "mean " << r.mean_fps << " stddev " << r.stddev_fps << " trials " << r.trials << " size "
              << r.image_size << " on " << r.hardware << '\n';
    return kOk;
}

int run_results_table(const Common& common, const std::string& train_manifest, const std::string& val_manifest,
               const std::string& out, const std::string& method) {
    harness::ResultsTableOptions opts;
    opts.config_files = common.configs;
    opts.overrides = common.sets;
    opts.train_manifest = train_manifest;
    opts.val_manifest = val_manifest;
    opts.output_dir = out;
    opts.method = method;
    const auto r = harness::run_results_table(opts);
    for (const auto& line : r.table) {
        std::cout << line << '\n';
    }
    std::cout << "fps on " << r.fps.hardware << ", report in " << (fs::path(out) / "results.json").string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Glass surface segmentation: training, evaluation and synthetic data generation"};
    app.require_subcommand(1);
    Common common;

    auto* train = app.add_subcommand("train", "Train (pretrain or finetune) on a manifest");
    common.attach(train);
    std::string manifest, stage, init, out;
    train->add_option("-m,--manifest", manifest, "Training manifest");
    train->add_option("--stage", stage, "pretrain|finetune");
    train->add_option("--init-checkpoint", init, "Warm start from a checkpoint");
    train->add_option("-o,--output-dir", out, "Run directory");

    auto* eval = app.add_subcommand("eval", "Score a checkpoint on a manifest");
    common.attach(eval);
    std::string checkpoint, name = "GEM", paradigm, json_out, pred_dir;
    bool zero_shot = false;
    eval->add_option("checkpoint", checkpoint)->required();
    eval->add_option("-m,--manifest", manifest, "Evaluation manifest");
    eval->add_flag("--zero-shot", zero_shot, "Require a pretrain-stage checkpoint");
    eval->add_option("--name", name, "Row label (method or dataset)");
    eval->add_option("--paradigm", paradigm, "Emit a transfer row, e.g. Zero-Shot");
    eval->add_option("--json", json_out, "Write the full report as JSON");
    eval->add_option("--predictions", pred_dir, "Write predicted masks here");

    auto* pred = app.add_subcommand("predict", "Segment one image");
    std::string image, overlay_out;
    double threshold = 0.5;
    pred->add_option("checkpoint", checkpoint)->required();
    pred->add_option("image", image)->required()->check(CLI::ExistingFile);
    pred->add_option("-o,--output", out, "Mask PNG")->required();
    pred->add_option("--overlay", overlay_out, "Overlay PNG");
    pred->add_option("--threshold", threshold);

    auto* gen = app.add_subcommand("generate-data", "Synthesize image/mask pairs from real masks");
    common.attach(gen);
    std::string masks, scale, backend;
    gen->add_option("--masks", masks, "Manifest whose masks condition generation");
    gen->add_option("--scale", scale, "1x|5x|10x|20x");
    gen->add_option("-o,--output-dir", out);
    gen->add_option("--backend", backend, "stub|http (endpoint from GEM_BACKEND_URL)");

    auto* cmp = app.add_subcommand("compare-distributions", "t-SNE scatter of two datasets");
    common.attach(cmp);
    std::string a, b, label_a = "real", label_b = "synthetic";
    cmp->add_option("a", a)->required();
    cmp->add_option("b", b)->required();
    cmp->add_option("--label-a", label_a);
    cmp->add_option("--label-b", label_b);
    cmp->add_option("-o,--output", out, "Output prefix for .csv and .svg")->required();
    cmp->add_option("--checkpoint", checkpoint, "Encoder to embed with");

    auto* bench = app.add_subcommand("benchmark", "Batch-1 forward throughput");
    int64_t size = 0;
    int trials = 10, warmup = 3;
    bench->add_option("checkpoint", checkpoint)->required();
    bench->add_option("--image-size", size);
    bench->add_option("--trials", trials);
    bench->add_option("--warmup", warmup);
    bench->add_option("--name", name);

    auto* index = app.add_subcommand("index-dataset", "Build a manifest from image and mask directories");
    std::string images_dir, masks_dir, split = "train";
    index->add_option("images", images_dir)->required()->check(CLI::ExistingDirectory);
    index->add_option("masks", masks_dir)->required()->check(CLI::ExistingDirectory);
    index->add_option("--split", split);
    index->add_option("-o,--output", out)->required();

    auto* results = app.add_subcommand("results-table", "Train on one manifest, score another, time inference");
    common.attach(results);
    std::string val_manifest, method = "GEM-Tiny";
    results->add_option("--train", manifest, "Training manifest")->required();
    results->add_option("--val", val_manifest, "Validation manifest")->required();
    results->add_option("-o,--output-dir", out)->required();
    results->add_option("--name", method, "Method label");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return run_train(common, manifest, stage, init, out);
        if (*eval) return run_eval(common, checkpoint, manifest, zero_shot, name, paradigm, json_out, pred_dir);
        if (*pred) return run_predict(checkpoint, image, out, overlay_out, threshold);
        if (*gen) return run_generate(common, masks, scale, out, backend);
        if (*cmp) return run_compare(common, a, b, label_a, label_b, out, checkpoint);
        if (*bench) return run_benchmark(checkpoint, size, trials, warmup, name);
        if (*results) return run_results_table(common, manifest, val_manifest, out, method);
        if (*index) {
            auto m = datagen::index_directory(images_dir, masks_dir, datagen::parse_split(split));
            m.write(out);
            std::cout << "indexed " << m.count() << " pairs into " << out << '\n';
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
    return kOther;
}
