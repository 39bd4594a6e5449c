#include "gem/datagen/tsne.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "gem/error.hpp"

namespace gem::datagen {

namespace {

// Row i of the conditional affinity matrix, with the Gaussian bandwidth found by bisection so
// that the row entropy matches log(perplexity).
void conditional_row(const std::vector<double>& dist2, size_t n, size_t i, double perplexity, std::vector<double>& row) {
    const double target = std::log(perplexity);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200; ++iter) {
        double sum = 0.0, weighted = 0.0;
        for (size_t j = 0; j < n; ++j) {
            row[j] = j == i ? 0.0 : std::exp(-beta * dist2[i * n + j]);
            sum += row[j];
            weighted += row[j] * dist2[i * n + j];
        }
        if (sum <= 0.0) {
            sum = std::numeric_limits<double>::min();
        }
        const double entropy = std::log(sum) + beta * weighted / sum;
        for (size_t j = 0; j < n; ++j) {
            row[j] /= sum;
        }
        const double diff = entropy - target;
        if (std::abs(diff) < 1e-5) {
            break;
        }
        if (diff > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
}

}  // namespace

std::vector<std::array<double, 2>> tsne(const std::vector<std::vector<double>>& points, const TsneOptions& options) {
    const size_t n = points.size();
    if (options.perplexity <= 0.0 || static_cast<double>(n) - 1.0 < 3.0 * options.perplexity) {
        throw ParameterError("t-SNE needs at least 3 * perplexity + 1 points: got " + std::to_string(n) +
                             " points with perplexity " + std::to_string(options.perplexity) +
                             "; lower the perplexity or add images");
    }
    const size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) {
            throw DimensionError("t-SNE input rows differ in length");
        }
    }

    std::vector<double> dist2(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (size_t k = 0; k < dim; ++k) {
                const double d = points[i][k] - points[j][k];
                s += d * d;
            }
            dist2[i * n + j] = dist2[j * n + i] = s;
        }
    }

    std::vector<double> p(n * n, 0.0), row(n);
    for (size_t i = 0; i < n; ++i) {
        conditional_row(dist2, n, i, options.perplexity, row);
        for (size_t j = 0; j < n; ++j) {
            p[i * n + j] = row[j];
        }
    }
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double sym = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
            p[i * n + j] = p[j * n + i] = sym;
        }
    }

    std::mt19937_64 engine(options.seed);
    auto gaussian = [&] {
        // Box-Muller on raw bits for cross-platform reproducibility.
        const double u1 = (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    };
    std::vector<std::array<double, 2>> y(n), velocity(n, {0.0, 0.0}), gains(n, {1.0, 1.0});
    for (auto& yi : y) {
        yi = {1e-4 * gaussian(), 1e-4 * gaussian()};
    }

    std::vector<double> q(n * n);
    for (int iter = 0; iter < options.iterations; ++iter) {
        const double exaggeration = iter < options.exaggeration_iterations ? options.early_exaggeration : 1.0;
        const double momentum = iter < options.exaggeration_iterations ? 0.5 : 0.8;
        double qsum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                const double dx = y[i][0] - y[j][0];
                const double dy = y[i][1] - y[j][1];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = q[j * n + i] = v;
                qsum += 2.0 * v;
            }
        }
        for (size_t i = 0; i < n; ++i) {
            double g[2] = {0.0, 0.0};
            for (size_t j = 0; j < n; ++j) {
                if (i == j) {
                    continue;
                }
                const double w = q[i * n + j];
                const double coeff = 4.0 * (exaggeration * p[i * n + j] - w / qsum) * w;
                g[0] += coeff * (y[i][0] - y[j][0]);
                g[1] += coeff * (y[i][1] - y[j][1]);
            }
            for (int k = 0; k < 2; ++k) {
                const bool same_sign = (g[k] > 0) == (velocity[i][k] > 0);
                gains[i][k] = same_sign ? std::max(gains[i][k] * 0.8, 0.01) : gains[i][k] + 0.2;
                velocity[i][k] = momentum * velocity[i][k] - options.learning_rate * gains[i][k] * g[k];
            }
        }
        double mean[2] = {0.0, 0.0};
        for (size_t i = 0; i < n; ++i) {
            y[i][0] += velocity[i][0];
            y[i][1] += velocity[i][1];
            mean[0] += y[i][0];
            mean[1] += y[i][1];
        }
        for (auto& yi : y) {
            yi[0] -= mean[0] / static_cast<double>(n);
            yi[1] -= mean[1] / static_cast<double>(n);
        }
    }
    return y;
}

}  // namespace gem::datagen
