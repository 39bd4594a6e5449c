// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "gem/convert.hpp"
#include "gem/datagen/jobs.hpp"
#include "gem/datagen/pipeline.hpp"
#include "gem/datagen/prompt_bank.hpp"
#include "gem/dqs.hpp"
#include "gem/error.hpp"
#include "gem/harness/checkpoint.hpp"
#include "gem/harness/evaluate.hpp"
#include "gem/harness/protocol.hpp"
#include "gem/harness/trainer.hpp"
#include "gem/matcher.hpp"
#include "gem/metrics.hpp"
#include "support.hpp"

using namespace gem;
using namespace gem::harness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

// 1 ----------------------------------------------------------------------------------------

Outcome shape_contracts() {
    const int64_t layers = 3, queries = 10;
    std::ostringstream detail;
    for (const int64_t size : {64, 128, 384}) {
        auto cfg = load_config({}, {"model.encoder.image_size=" + std::to_string(size), "model.encoder.embed_dim=32",
                                    "model.encoder.depth=1", "model.encoder.num_heads=2", "model.pyramid.dim=32",
                                    "model.decoder.num_layers=3", "model.decoder.num_queries=10",
                                    "model.decoder.num_heads=4", "model.decoder.ffn_dim=64", "train.precision=float64"});
        auto model = build_model(cfg);
        torch::NoGradGuard g;
        const auto out = model->forward(torch::rand({2, 3, size, size}, torch::kFloat64));
        const auto& p = out.pyramid;
        const auto expect = [&](const torch::Tensor& t, int64_t stride) {
            return t.sizes() == torch::IntArrayRef{2, 32, size / stride, size / stride};
        };
        if (!expect(p.c2, 4) || !expect(p.c3, 8) || !expect(p.c4, 16) || !expect(p.c5, 32)) {
            return {false, "pyramid strides wrong at " + std::to_string(size)};
        }
        if (static_cast<int64_t>(out.prediction.layers.size()) != layers) {
            return {false, "layer count wrong at " + std::to_string(size)};
        }
        double worst = 0.0;
        for (const auto& l : out.prediction.layers) {
            if (l.mask_logits.sizes() != torch::IntArrayRef{2, queries, size / 4, size / 4}) {
                return {false, "mask set not at C2 resolution at " + std::to_string(size)};
            }
            // Mask logit = <query, C2 pixel embedding>, summed elementwise.
            const auto literal = (l.queries.unsqueeze(-1).unsqueeze(-1) * p.c2.unsqueeze(1)).sum(2);
            worst = std::max(worst, (literal - l.mask_logits).abs().max().item<double>());
        }
        if (worst > 1e-9) {
            return {false, "mask logits differ from the inner product by " + fmt("%.3g", worst)};
        }
        detail << size << "->C2 " << size / 4 << " ";
    }
    return {true, detail.str() + "L=3 N=10, masks = <q, C2> to 1e-9"};
}

// 2 ----------------------------------------------------------------------------------------

std::vector<int64_t> sort_oracle(const std::vector<double>& scores, int64_t hw, int64_t k, bool fg_only) {
    std::vector<int64_t> order(static_cast<size_t>(fg_only ? hw : 2 * hw));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return scores[a] > scores[b]; });
    std::vector<int64_t> out;
    std::set<int64_t> seen;
    for (const auto i : order) {
        if (seen.insert(i % hw).second) {
            out.push_back(i % hw);
        }
        if (static_cast<int64_t>(out.size()) == k) {
            break;
        }
    }
    return out;
}

Outcome dqs_correctness() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int64_t> side(1, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto h = side(rng), w = side(rng), hw = h * w;
        const auto k = std::uniform_int_distribution<int64_t>(1, hw)(rng);
        std::vector<double> scores(static_cast<size_t>(2 * hw));
        const bool ties = trial % 2 == 0;
        for (auto& s : scores) {
            s = ties ? std::floor(u(rng) * 4.0) / 4.0 : u(rng);
        }
        for (const bool fg_only : {false, true}) {
            const auto ranking = fg_only ? QueryRanking::ForegroundOnly : QueryRanking::AllScores;
            const auto want = sort_oracle(scores, hw, k, fg_only);
            if (rank_locations(scores, k, ranking) != want) {
                return {false, "ranking differs from the sort oracle at trial " + std::to_string(trial)};
            }
            ScoreVector sv;
            sv.scores = torch::tensor(scores, torch::kFloat64).unsqueeze(0);
            sv.height = h;
            sv.width = w;
            const auto f = torch::randn({1, 3, h, w}, torch::kFloat64);
            const auto sel = select_topk(sv, f, k, ranking);
            for (int64_t i = 0; i < k; ++i) {
                const auto loc = want[static_cast<size_t>(i)];
                if (sel.positions[0][i].item<int64_t>() != loc ||
                    !torch::equal(sel.embeddings[0][i], f[0].flatten(1).select(1, loc))) {
                    return {false, "select_topk gather differs at trial " + std::to_string(trial)};
                }
            }
        }
    }
    torch::manual_seed(3);
    QuerySelector selector(16);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto s = selector->classify(torch::randn({2, 16, 5, 7}) * 10.0);
        const auto sums = s.scores.view({2, 2, 35}).sum(1).to(torch::kFloat64);
        worst = std::max(worst, (sums - 1.0).abs().max().item<double>());
    }
    if (worst > 1e-6) {
        return {false, "softmax row sum off by " + fmt("%.3g", worst)};
    }
    return {true, "1000 vectors x 2 rankings match the sort oracle; max |sum-1| = " + fmt("%.2g", worst)};
}

// 3 ----------------------------------------------------------------------------------------

double brute_force_min(const std::vector<double>& cost, int64_t t, int64_t q) {
    std::vector<int64_t> pick(static_cast<size_t>(t));
    std::vector<bool> used(static_cast<size_t>(q), false);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(int64_t)> rec = [&](int64_t row) {
        if (row == t) {
            double sum = 0.0;
            for (int64_t r = 0; r < t; ++r) {
                sum += cost[static_cast<size_t>(r * q + pick[r])];
            }
            best = std::min(best, sum);
            return;
        }
        for (int64_t c = 0; c < q; ++c) {
            if (!used[c]) {
                used[c] = true;
                pick[row] = c;
                rec(row + 1);
                used[c] = false;
            }
        }
    };
    rec(0);
    return best;
}

Outcome matching_optimality() {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 500; ++trial) {
        const auto t = std::uniform_int_distribution<int64_t>(1, 6)(rng);
        const auto q = std::uniform_int_distribution<int64_t>(t, 8)(rng);
        std::vector<double> cost(static_cast<size_t>(t * q));
        for (auto& c : cost) {
            c = trial % 3 == 0 ? static_cast<double>(rng() % 5) : std::uniform_real_distribution<double>(-2.0, 5.0)(rng);
        }
        const auto a = hungarian_match(cost, t, q);
        double sum = 0.0;
        std::set<int64_t> distinct;
        for (int64_t r = 0; r < t; ++r) {
            sum += cost[static_cast<size_t>(r * q + a.query_for_target[r])];
            distinct.insert(a.query_for_target[r]);
        }
        if (static_cast<int64_t>(distinct.size()) != t) {
            return {false, "assignment reuses a query at trial " + std::to_string(trial)};
        }
        if (sum != brute_force_min(cost, t, q)) {
            return {false, "cost differs from brute force at trial " + std::to_string(trial)};
        }
    }
    return {true, "500 matrices, T<=6, Q<=8, exact cost equality"};
}

// 4 ----------------------------------------------------------------------------------------

struct Oracle {
    double iou, f_beta, mae, ber;
};

Oracle metric_oracle(const ProbabilityMap& pred, const BinaryMask& gt) {
    double tp = 0, fp = 0, fn = 0, tn = 0, abs_sum = 0;
    for (int64_t y = 0; y < gt.height; ++y) {
        for (int64_t x = 0; x < gt.width; ++x) {
            const bool p = pred.at(y, x) >= 0.5;
            const bool g = gt.at(y, x) == 1;
            tp += p && g;
            fp += p && !g;
            fn += !p && g;
            tn += !p && !g;
            abs_sum += std::abs(pred.at(y, x) - (g ? 1.0 : 0.0));
        }
    }
    Oracle o{};
    o.iou = tp + fp + fn == 0 ? 1.0 : tp / (tp + fp + fn);
    if (tp + fp + fn == 0) {
        o.f_beta = 1.0;
    } else {
        const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        o.f_beta = prec + rec > 0 ? 1.3 * prec * rec / (0.3 * prec + rec) : 0.0;
    }
    o.mae = abs_sum / static_cast<double>(gt.size());
    if (tp + fn == 0) {
        o.ber = 100.0 * fp / (tn + fp);
    } else if (tn + fp == 0) {
        o.ber = 100.0 * fn / (tp + fn);
    } else {
        o.ber = 50.0 * (fn / (tp + fn) + fp / (tn + fp));
    }
    return o;
}

Outcome metric_oracle_check() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        ProbabilityMap pred(8, 8);
        BinaryMask gt(8, 8);
        const float density = u(rng);
        for (size_t i = 0; i < 64; ++i) {
            pred.data[i] = trial % 4 == 0 ? (u(rng) < 0.5f ? 0.0f : 1.0f) : u(rng);
            gt.data[i] = u(rng) < density ? 1 : 0;
        }
        const auto o = metric_oracle(pred, gt);
        const auto hard = metrics::binarize(pred);
        worst = std::max({worst, std::abs(metrics::iou(hard, gt) - o.iou), std::abs(metrics::f_beta(pred, gt) - o.f_beta),
                          std::abs(metrics::mae(pred, gt) - o.mae), std::abs(metrics::ber(hard, gt) - o.ber)});
    }
    if (worst > 1e-9) {
        return {false, "max deviation from the oracle " + fmt("%.3g", worst)};
    }
    auto gt = test::rect_mask(8, 8, 1, 1, 5, 4);
    BinaryMask complement(8, 8), disjoint(8, 8), all(8, 8, 1);
    for (size_t i = 0; i < 64; ++i) {
        complement.data[i] = 1 - gt.data[i];
    }
    disjoint.at(7, 7) = 1;
    const auto check = [&](const BinaryMask& p, double iou, double fb, double mae, double ber) {
        const auto prob = to_probability(to_tensor(p));
        return metrics::iou(p, gt) == iou && metrics::f_beta(prob, gt) == fb && metrics::mae(prob, gt) == mae &&
               metrics::ber(p, gt) == ber;
    };
    const double fg = 12.0 / 64.0;
    const bool limits = check(gt, 1.0, 1.0, 0.0, 0.0) && check(disjoint, 0.0, 0.0, 13.0 / 64.0, 50.0 + 50.0 / 52.0) &&
                        check(complement, 0.0, 0.0, 1.0, 100.0) &&
                        check(all, fg, 1.3 * fg / (0.3 * fg + 1.0), 52.0 / 64.0, 50.0);
    if (!limits) {
        return {false, "limit cases (perfect/disjoint/complement/all-positive) do not hold exactly"};
    }
    return {true, "1000 8x8 pairs, max deviation " + fmt("%.2g", worst) + "; 4 limit cases exact"};
}

// 5 ----------------------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto cfg = load_config(
        {}, {"model.encoder.image_size=16", "model.encoder.patch_size=4", "model.encoder.embed_dim=8",
             "model.encoder.depth=1", "model.encoder.num_heads=2", "model.pyramid.dim=8", "model.decoder.num_layers=2",
             "model.decoder.num_queries=3", "model.decoder.num_heads=2", "model.decoder.ffn_dim=16",
             "loss.targets.min_component_px=1", "train.precision=float64", "train.seed=5"});
    auto model = build_model(cfg);
    Sample s;
    s.image = Image(16, 16);
    std::mt19937_64 rng(6);
    for (auto& v : s.image.data) {
        v = static_cast<float>(rng() % 1000) / 1000.0f;
    }
    s.mask = test::rect_mask(16, 16, 2, 2, 8, 9);
    for (int64_t y = 11; y < 15; ++y) {
        for (int64_t x = 10; x < 15; ++x) {
            s.mask.at(y, x) = 1;
        }
    }
    const auto batch = collate({s}, torch::kFloat64);
    const auto loss = [&] { return batch_loss(model, batch, cfg).total.item<double>(); };

    model->zero_grad();
    batch_loss(model, batch, cfg).total.backward();
    const double h = 1e-5;
    double worst = 0.0;
    std::string where;
    int64_t count = 0;
    torch::NoGradGuard g;
    for (const auto& item : model->named_parameters()) {
        auto flat = item.value().view(-1);
        const auto grad = item.value().grad().view(-1);
        for (int64_t i = 0; i < flat.numel(); ++i) {
            const double orig = flat[i].item<double>();
            flat[i] = orig + h;
            const double up = loss();
            flat[i] = orig - h;
            const double down = loss();
            flat[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = grad[i].item<double>();
            const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            if (rel > worst) {
                worst = rel;
                where = item.key() + "[" + std::to_string(i) + "] a=" + fmt("%.6g", analytic) + " n=" + fmt("%.6g", numeric);
            }
            ++count;
        }
    }
    return {worst <= 1e-3, std::to_string(count) + " parameters, max relative error " + fmt("%.3g", worst) + " at " + where};
}

// 6 ----------------------------------------------------------------------------------------

Outcome overfit() {
    test::TempDir dir("acc_overfit");
    const auto m = test::stub_dataset(dir / "data", 4, 64, 21);
    const auto cfg = load_config({test::config_path("gem_micro.json")});
    const auto start = std::chrono::steady_clock::now();
    auto r = train(cfg, m, {false, {}});
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    const auto report = evaluate(r.model, m, cfg.eval);
    const bool ok = report.mean.iou > 0.95 && r.log.size() <= 200 && dt.count() < 300.0;
    return {ok, std::to_string(r.log.size()) + " steps in " + fmt("%.1f", dt.count()) + " s, training IoU " +
                    fmt("%.4f", report.mean.iou) + " (final loss " + fmt("%.4f", r.log.back().loss) + ")"};
}

// 7 ----------------------------------------------------------------------------------------

Outcome datagen_fidelity() {
    test::TempDir dir("acc_datagen");
    fs::create_directories(dir / "masks");
    std::mt19937_64 rng(7);
    std::vector<datagen::MaskRecord> masks;
    for (int i = 0; i < 3912; ++i) {
        const auto path = dir / "masks" / ("m" + std::to_string(i) + ".png");
        io::write_mask(path, test::random_glass_mask(64, rng));
        masks.push_back({"m" + std::to_string(i), path.string(), datagen::Split::Train});
    }
    const auto bank = datagen::PromptBank::standard();
    datagen::JobOptions opts;
    opts.target_size = 64;
    const auto jobs = datagen::build_jobs(masks, bank, opts);
    datagen::ProceduralBackend stub;
    const auto run = datagen::run_generation(jobs, stub, {dir / "s-gsd-1x", 4, 2, std::chrono::milliseconds(1)}, "1x");
    const auto reread = datagen::DatasetManifest::read(dir / "s-gsd-1x" / "manifest.jsonl");
    datagen::check_manifest(reread, true);
    if (jobs.size() != 3912 || reread.count() != 3912 || !run.failures.empty()) {
        return {false, "1x produced " + std::to_string(reread.count()) + " pairs, " + std::to_string(run.failures.size()) +
                           " failures"};
    }
    for (const auto& [tag, n] : std::vector<std::pair<std::string, size_t>>{{"5x", 23467}, {"10x", 46933}, {"20x", 93865}}) {
        opts.scale_tag = tag;
        if (datagen::build_jobs(masks, bank, opts).size() != n) {
            return {false, tag + " job count wrong"};
        }
    }
    auto leaky = masks;
    leaky[1234].split = datagen::Split::Val;
    try {
        (void)datagen::build_jobs(leaky, bank, {});
        return {false, "a validation mask was accepted"};
    } catch (const LeakageError&) {
    }
    const std::vector<datagen::GenerationJob> sample(jobs.begin(), jobs.begin() + 50);
    const auto again = datagen::run_generation(sample, stub, {dir / "again", 2, 0, std::chrono::milliseconds(1)}, "1x");
    for (size_t i = 0; i < sample.size(); ++i) {
        const auto a = io::read_image(reread.resolve(reread.entries[i].image_path));
        const auto b = io::read_image(again.manifest.resolve(again.manifest.entries[i].image_path));
        const auto direct = stub.generate(io::read_mask(sample[i].mask_path), sample[i].prompt, sample[i].seed, 64);
        if (a.data != b.data || direct.data != stub.generate(io::read_mask(sample[i].mask_path), sample[i].prompt,
                                                               sample[i].seed, 64).data) {
            return {false, "stub output not deterministic for job " + std::to_string(i)};
        }
    }
    return {true, "3912 validated pairs; 5x/10x/20x = 23467/46933/93865 jobs; leakage rejected; stub bit-deterministic"};
}

// 8 ----------------------------------------------------------------------------------------

Outcome ablation_matrix() {
    test::TempDir dir("acc_ablation");
    const auto m = test::stub_dataset(dir / "data", 4, 64, 31);
    std::ofstream(dir / "smoke.json") << R"({"train": {"max_steps": 5, "batch_size": 2}})";
    const auto micro = load_config({test::config_path("gem_micro.json")});
    auto donor = build_model(micro);
    {
        torch::NoGradGuard g;
        for (auto& p : donor->encoder->parameters()) {
            p.uniform_(-0.05, 0.05);
        }
    }
    save_encoder_weights(donor->encoder, dir / "sam_vit.safetensors", WeightNaming::Sam);
    save_encoder_weights(donor->encoder, dir / "imagenet_vit.safetensors", WeightNaming::Timm);
    ::setenv("GEM_SAM_WEIGHTS", (dir / "sam_vit.safetensors").c_str(), 1);
    ::setenv("GEM_GENERIC_WEIGHTS", (dir / "imagenet_vit.safetensors").c_str(), 1);
    const auto abl = [](const std::string& n) { return test::config_path("ablation/" + n + ".json"); };
    const auto mask_records = datagen::masks_from_manifest(m);
    int runs = 0;
    std::string problem;
    for (const auto* extra : {"extra_loss_on", "extra_loss_off"}) {
        for (const auto* dqs : {"dqs_on", "dqs_off"}) {
            for (const auto* backbone : {"backbone_random", "backbone_generic", "backbone_sam"}) {
                for (const auto* prompts : {"prompts_single", "prompts_multiple"}) {
                    const std::string name = std::string(extra) + "+" + dqs + "+" + backbone + "+" + prompts;
                    const auto cfg = load_config({test::config_path("gem_micro.json"), abl(extra), abl(dqs), abl(backbone),
                                                  abl(prompts), dir / "smoke.json"});
                    auto initial = build_model(cfg);
                    const bool pretrained = cfg.encoder_init.init != BackboneInit::Random;
                    const bool loaded = torch::equal(initial->encoder->parameters().front(), donor->encoder->parameters().front());
                    auto r = train(cfg, m, {false, {}});
                    const bool finite = r.log.size() == 5 && std::all_of(r.log.begin(), r.log.end(), [](const StepRecord& s) {
                                            return std::isfinite(s.loss);
                                        });
                    // Extra loss without DQS keeps the location classifier but not the query selection.
                    const bool has_classifier = !r.model->selector.is_empty();
                    const bool selects = r.model->forward(torch::rand({1, 3, 64, 64})).selection.has_value();
                    const bool aux = r.log.front().terms.count("dqs_aux") && r.log.front().terms.at("dqs_aux") > 0.0;
                    auto jobs_opts = cfg.datagen.jobs;
                    jobs_opts.count = 60;
                    std::set<std::string> prompt_set;
                    for (const auto& j : datagen::build_jobs(mask_records, datagen::PromptBank::standard(), jobs_opts)) {
                        prompt_set.insert(j.prompt);
                    }
                    const bool single = cfg.datagen.jobs.prompt_mode == datagen::PromptMode::Single;
                    if (!finite || loaded != pretrained || selects != cfg.model.dqs.enabled ||
                        has_classifier != (cfg.model.dqs.enabled || cfg.model.dqs.extra_loss) ||
                        aux != cfg.model.dqs.extra_loss || (prompt_set.size() == 1) != single) {
                        problem = name;
                    }
                    ++runs;
                }
            }
        }
    }
    ::unsetenv("GEM_SAM_WEIGHTS");
    ::unsetenv("GEM_GENERIC_WEIGHTS");
    if (!problem.empty()) {
        return {false, "configuration " + problem + " did not take effect"};
    }
    return {runs == 24, std::to_string(runs) + " file-only configurations x 5 steps, toggles verified"};
}

// 9 ----------------------------------------------------------------------------------------

Outcome determinism() {
    test::TempDir dir("acc_determinism");
    const auto m = test::stub_dataset(dir / "data", 4, 64, 41);
    const auto cfg = load_config({test::config_path("gem_micro.json")},
                                 {"train.max_steps=5", "train.output_dir=" + (dir / "run").string()});
    auto a = train(cfg, m);
    const auto b = train(cfg, m, {false, {}});
    for (size_t i = 0; i < 5; ++i) {
        if (a.log.at(i).loss != b.log.at(i).loss) {
            return {false, "loss " + std::to_string(i) + " differs between runs"};
        }
    }
    auto loaded = load_checkpoint(a.checkpoint);
    a.model->eval();
    loaded.model->eval();
    torch::NoGradGuard g;
    const auto x = torch::rand({2, 3, 64, 64});
    const auto p = a.model->forward(x);
    const auto q = loaded.model->forward(x);
    for (size_t l = 0; l < p.prediction.layers.size(); ++l) {
        const auto& u = p.prediction.layers[l];
        const auto& v = q.prediction.layers[l];
        if (!torch::equal(u.mask_logits, v.mask_logits) || !torch::equal(u.class_logits, v.class_logits) ||
            !torch::equal(u.boxes, v.boxes)) {
            return {false, "reloaded checkpoint output differs at layer " + std::to_string(l)};
        }
    }
    return {true, "5 losses bit-identical; checkpoint reload bit-exact on all layers"};
}

// 10 ---------------------------------------------------------------------------------------

struct ResultsInputs {
    std::string sam_weights, train_manifest, val_manifest, output_dir;
};

Outcome results_table_protocol(const std::optional<ResultsInputs>& real) {
    const std::regex row(R"(^\S+ \| \d\.\d{3} \| \d\.\d{3} \| \d\.\d{3} \| \d+\.\d{2} \| \d+\.\d{2}$)");
    ResultsTableOptions opts;
    std::optional<test::TempDir> scratch;
    if (real) {
        ::setenv("GEM_SAM_WEIGHTS", real->sam_weights.c_str(), 1);
        opts.config_files = {test::config_path("gem_tiny.json"), test::config_path("ablation/backbone_sam.json")};
        opts.train_manifest = real->train_manifest;
        opts.val_manifest = real->val_manifest;
        opts.output_dir = real->output_dir;
    } else {
        scratch.emplace("acc_results");
        const auto& dir = *scratch;
        test::stub_dataset(dir / "train", 8, 64, 51);
        test::stub_dataset(dir / "val", 4, 64, 52, datagen::Split::Val);
        auto donor = build_model(load_config({test::config_path("gem_micro.json")}));
        save_encoder_weights(donor->encoder, dir / "sam_vit.safetensors", WeightNaming::Sam);
        ::setenv("GEM_SAM_WEIGHTS", (dir / "sam_vit.safetensors").c_str(), 1);
        opts.config_files = {test::config_path("gem_micro.json"), test::config_path("ablation/backbone_sam.json")};
        opts.overrides = {"train.max_steps=20"};
        opts.train_manifest = dir / "train" / "manifest.jsonl";
        opts.val_manifest = dir / "val" / "manifest.jsonl";
        opts.output_dir = dir / "out";
        opts.method = "GEM-micro";
    }
    const auto r = run_results_table(opts);
    ::unsetenv("GEM_SAM_WEIGHTS");
    const bool ok = r.table.size() == 2 && std::regex_match(r.table[1], row) &&
                    fs::exists(opts.output_dir / "results.txt") && fs::exists(opts.output_dir / "results.json");
    const std::string mode = real ? "full protocol" : "stand-in (GEM_SAM_WEIGHTS / GEM_RESULTS_TRAIN / GEM_RESULTS_VAL unset: "
                                                      "stub data, stub SAM-format weights)";
    return {ok, mode + ": \"" + (r.table.empty() ? "" : r.table.back()) + "\""};
}

}  // namespace

int main() {
    std::optional<ResultsInputs> real;
    const char* sam = std::getenv("GEM_SAM_WEIGHTS");
    const char* tr = std::getenv("GEM_RESULTS_TRAIN");
    const char* va = std::getenv("GEM_RESULTS_VAL");
    if (sam && tr && va && *sam && *tr && *va) {
        const char* out = std::getenv("GEM_RESULTS_OUT");
        real = ResultsInputs{sam, tr, va, out && *out ? out : "results_run"};
    }
    ::unsetenv("GEM_SAM_WEIGHTS");

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"shape contracts", shape_contracts},
        {"DQS correctness", dqs_correctness},
        {"matching optimality", matching_optimality},
        {"metric oracle", metric_oracle_check},
        {"gradient fidelity", gradient_fidelity},
        {"overfit", overfit},
        {"datagen fidelity", datagen_fidelity},
        {"ablation reachability", ablation_matrix},
        {"determinism", determinism},
        {"results-table protocol", [&] { return results_table_protocol(real); }},
    };
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].first << ": " << o.detail << " ("
                  << fmt("%.1f", dt.count()) << " s)" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
