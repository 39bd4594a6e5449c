#include "doctest_gem.hpp"

#include "gem/error.hpp"
#include "gem/pyramid.hpp"

using namespace gem;

TEST_CASE("24x24 grid at d=256 gives 96/48/24/12 maps") {
    torch::manual_seed(0);
    SimpleFeaturePyramid p(192, PyramidConfig{});
    const auto out = p->forward(torch::randn({1, 192, 24, 24}));
    CHECK(out.c2.sizes() == torch::IntArrayRef({1, 256, 96, 96}));
    CHECK(out.c3.sizes() == torch::IntArrayRef({1, 256, 48, 48}));
    CHECK(out.c4.sizes() == torch::IntArrayRef({1, 256, 24, 24}));
    CHECK(out.c5.sizes() == torch::IntArrayRef({1, 256, 12, 12}));
    CHECK_NOTHROW(check_pyramid(out));
}

TEST_CASE("shape contract for even grids, both norms") {
    torch::manual_seed(0);
    for (const auto norm : {Norm2dKind::Group, Norm2dKind::Layer}) {
        SimpleFeaturePyramid p(16, PyramidConfig{24, norm});
        for (const auto& [h, w] : {std::pair{2, 2}, {4, 6}, {8, 2}, {10, 12}}) {
            const auto out = p->forward(torch::randn({2, 16, h, w}));
            CHECK(out.c2.sizes() == torch::IntArrayRef({2, 24, 4 * h, 4 * w}));
            CHECK(out.c3.sizes() == torch::IntArrayRef({2, 24, 2 * h, 2 * w}));
            CHECK(out.c4.sizes() == torch::IntArrayRef({2, 24, h, w}));
            CHECK(out.c5.sizes() == torch::IntArrayRef({2, 24, h / 2, w / 2}));
        }
    }
}

TEST_CASE("2x2 grid gives a 1x1 C5") {
    SimpleFeaturePyramid p(16, PyramidConfig{16, Norm2dKind::Group});
    CHECK(p->forward(torch::randn({1, 16, 2, 2})).c5.sizes() == torch::IntArrayRef({1, 16, 1, 1}));
}

TEST_CASE("odd grids are rejected") {
    SimpleFeaturePyramid p(16, PyramidConfig{16, Norm2dKind::Group});
    CHECK_THROWS_AS(p->forward(torch::randn({1, 16, 3, 4})), DimensionError);
    CHECK_THROWS_AS(p->forward(torch::randn({1, 16, 4, 5})), DimensionError);
}

TEST_CASE("max-pool branch of a constant map is constant") {
    const auto f = torch::full({1, 8, 6, 6}, 0.37);
    const auto c5 = SimpleFeaturePyramidImpl::downsample2(f);
    CHECK(c5.sizes() == torch::IntArrayRef({1, 8, 3, 3}));
    CHECK(torch::all(c5 == 0.37).item<bool>());
}

TEST_CASE("check_pyramid detects broken ratios and channel counts") {
    FeaturePyramid p{torch::zeros({1, 4, 16, 16}), torch::zeros({1, 4, 8, 8}), torch::zeros({1, 4, 4, 4}),
                     torch::zeros({1, 4, 2, 2})};
    CHECK_NOTHROW(check_pyramid(p));
    auto q = p;
    q.c3 = torch::zeros({1, 4, 6, 8});
    CHECK_THROWS_AS(check_pyramid(q), DimensionError);
    q = p;
    q.c5 = torch::zeros({1, 5, 2, 2});
    CHECK_THROWS_AS(check_pyramid(q), DimensionError);
}

TEST_CASE("gradient reaches the encoder map from every level") {
    torch::manual_seed(4);
    SimpleFeaturePyramid p(8, PyramidConfig{8, Norm2dKind::Group});
    p->to(torch::kFloat64);
    const auto f = torch::randn({1, 8, 4, 4}, torch::kFloat64);
    for (int level = 0; level < 4; ++level) {
        auto readout = [&](const torch::Tensor& x) {
            const auto out = p->forward(x);
            const torch::Tensor maps[] = {out.c2, out.c3, out.c4, out.c5};
            torch::manual_seed(100 + level);
            const auto w = torch::randn(maps[level].sizes(), torch::kFloat64);
            return (maps[level] * w).sum();
        };
        auto x = f.clone().requires_grad_(true);
        readout(x).backward();
        const auto grad = x.grad();
        CHECK(grad.abs().sum().item<double>() > 0.0);

        // Central differences on a handful of entries.
        torch::NoGradGuard no_grad;
        const double h = 1e-6;
        for (const int64_t idx : {0, 17, 63, 101, 127}) {
            auto plus = f.clone(), minus = f.clone();
            plus.view(-1)[idx] += h;
            minus.view(-1)[idx] -= h;
            const double numeric = (readout(plus).item<double>() - readout(minus).item<double>()) / (2 * h);
            const double analytic = grad.view(-1)[idx].item<double>();
            CHECK(std::abs(numeric - analytic) <= 1e-5 * std::max({1.0, std::abs(numeric), std::abs(analytic)}));
        }
    }
}
