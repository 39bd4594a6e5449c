#include "gem/harness/protocol.hpp"

#include <cstdio>
#include <fstream>

#include "gem/harness/config.hpp"
#include "gem/harness/evaluate.hpp"
#include "gem/harness/trainer.hpp"

namespace gem::harness {

std::string format_results_row(const std::string& method, const metrics::ImageMetrics& m, double fps) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fps);
    return metrics::format_row(method, m) + " | " + buf;
}

ResultsTable run_results_table(const ResultsTableOptions& options) {
    auto overrides = options.overrides;
    overrides.push_back("train.output_dir=" + (options.output_dir / "train").string());
    const auto config = load_config(options.config_files, overrides);

    const auto train_set = datagen::DatasetManifest::read(options.train_manifest);
    const auto val_set = datagen::DatasetManifest::read(options.val_manifest);
    datagen::check_manifest(train_set, false);
    datagen::check_manifest(val_set, false);

    ResultsTable out;
    auto run = train(config, train_set);
    out.checkpoint = run.checkpoint;
    out.report = evaluate(run.model, val_set, config.eval);
    out.fps = benchmark_fps(run.model, config.model.encoder.image_size, options.fps_trials);
    out.table = {metrics::table_header() + " | FPS", format_results_row(options.method, out.report.mean, out.fps.fps)};

    std::filesystem::create_directories(options.output_dir);
    std::ofstream text(options.output_dir / "results.txt");
    for (const auto& line : out.table) {
        text << line << '\n';
    }
    auto j = metrics::to_json(out.report);
    j["method"] = options.method;
    j["fps"] = out.fps.fps;
    j["fps_mean"] = out.fps.mean_fps;
    j["fps_stddev"] = out.fps.stddev_fps;
    j["hardware"] = out.fps.hardware;
    j["config_hash"] = config.hash();
    j["checkpoint"] = out.checkpoint.string();
    std::ofstream(options.output_dir / "results.json") << j.dump(2) << '\n';
    return out;
}

}  // namespace gem::harness
