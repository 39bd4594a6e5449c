#include "gem/harness/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "gem/error.hpp"

namespace gem::harness {

FpsReport benchmark_fps(GemModel& model, int64_t image_size, int trials, int warmup) {
    if (trials < 10 || warmup < 3) {
        throw ParameterError("benchmark needs trials >= 10 and warmup >= 3");
    }
    torch::NoGradGuard no_grad;
    model->eval();
    const auto dtype = model->parameters().front().scalar_type();
    auto gen = at::make_generator<at::CPUGeneratorImpl>(1234);
    const auto image = torch::rand({1, 3, image_size, image_size}, gen, torch::TensorOptions().dtype(dtype));
    for (int i = 0; i < warmup; ++i) {
        model->forward(image);
    }
    FpsReport r;
    r.trials = trials;
    r.warmup = warmup;
    r.image_size = image_size;
    r.hardware = hardware_string();
    double total = 0.0;
    for (int i = 0; i < trials; ++i) {
        const auto start = std::chrono::steady_clock::now();
        model->forward(image);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        r.seconds.push_back(dt.count());
        total += dt.count();
    }
    r.fps = trials / total;
    for (const auto s : r.seconds) {
        r.mean_fps += 1.0 / s;
    }
    r.mean_fps /= trials;
    for (const auto s : r.seconds) {
        r.stddev_fps += (1.0 / s - r.mean_fps) * (1.0 / s - r.mean_fps);
    }
    r.stddev_fps = std::sqrt(r.stddev_fps / (trials - 1));
    return r;
}

std::string hardware_string() {
    std::ifstream in("/proc/cpuinfo");
    std::string line, name = "unknown cpu";
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            name = line.substr(colon + 2);
            break;
        }
    }
    return name + " x" + std::to_string(at::get_num_threads()) + " threads";
}

std::string format_fps_row(const std::string& name, const FpsReport& report) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", report.fps);
    return name + " | " + buf;
}

}  // namespace gem::harness
