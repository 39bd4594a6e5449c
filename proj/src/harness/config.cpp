#include "gem/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>

#include "gem/error.hpp"

namespace gem::harness {

using nlohmann::json;

std::string to_string(Stage s) { return s == Stage::Pretrain ? "pretrain" : "finetune"; }

Stage parse_stage(const std::string& s) {
    if (s == "pretrain") {
        return Stage::Pretrain;
    }
    if (s == "finetune") {
        return Stage::Finetune;
    }
    throw ConfigError("unknown stage '" + s + "' (expected pretrain|finetune)");
}

std::string to_string(BackboneInit b) {
    switch (b) {
        case BackboneInit::Random: return "random";
        case BackboneInit::Generic: return "generic";
        case BackboneInit::Sam: return "sam";
    }
    return "random";
}

BackboneInit parse_backbone_init(const std::string& s) {
    if (s == "random") {
        return BackboneInit::Random;
    }
    if (s == "generic") {
        return BackboneInit::Generic;
    }
    if (s == "sam") {
        return BackboneInit::Sam;
    }
    throw ConfigError("unknown backbone init '" + s + "' (expected random|generic|sam)");
}

json default_config_json() {
    return json::parse(R"({
  "model": {
    "encoder": {
      "image_size": 384, "patch_size": 16, "embed_dim": 192, "depth": 4, "num_heads": 3,
      "mlp_ratio": 4.0, "keep_neck": false, "neck_dim": 256,
      "init": "random", "weights": "", "weights_format": "auto", "interpolate_pos_embed": true
    },
    "pyramid": {"dim": 256, "norm": "group"},
    "dqs": {"enabled": true, "extra_loss": true, "ranking": "all"},
    "decoder": {"num_layers": 6, "num_queries": 100, "num_heads": 8, "ffn_dim": 1024, "dropout": 0.0}
  },
  "loss": {
    "cls": 4.0, "l1": 5.0, "giou": 2.0, "ce": 5.0, "dice": 5.0,
    "dqs_aux": 1.0, "no_object_weight": 0.1, "dice_eps": 1.0, "deep_supervision": true,
    "mask_downsample": "area",
    "targets": {"mode": "components", "min_component_px": 16, "small_components": "merge"}
  },
  "train": {
    "stage": "pretrain", "lr": 2e-4, "weight_decay": 0.05, "batch_size": 32,
    "epochs_pretrain": 160, "epochs_finetune": 80, "max_steps": 0,
    "backbone_lr_mult": 0.1, "lr_decay_at": 0.9, "lr_decay": 0.1,
    "checkpoint_every": 0, "output_dir": "runs/default", "manifest": "", "init_checkpoint": "",
    "augment": {"enabled": true, "hflip": true, "scale_min": 0.8, "scale_max": 1.2},
    "prefetch": 2, "seed": 0, "precision": "float32"
  },
  "eval": {"threshold": 0.5, "aggregation": "per_image", "manifest": ""},
  "datagen": {
    "scale": "1x", "count": 0,
    "scale_counts": {"1x": 3912, "5x": 23467, "10x": 46933, "20x": 93865},
    "target_size": 384, "prompt_mode": "multiple", "prompt_file": "",
    "masks_manifest": "", "output_dir": "data/s-gsd",
    "backend": "stub", "endpoint": "${GEM_BACKEND_URL}", "timeout_ms": 60000,
    "retries": 2, "backoff_ms": 500, "parallelism": 4, "model_version": ""
  },
  "compare": {
    "perplexity": 30.0, "iterations": 1000, "seed": 0,
    "embedder": "encoder", "endpoint": "${GEM_EMBED_URL}", "timeout_ms": 60000
  }
})");
}

namespace {

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
}

void read_chain(const std::filesystem::path& path, std::vector<std::filesystem::path>& seen, json& out) {
    const auto canonical = std::filesystem::weakly_canonical(path);
    if (std::find(seen.begin(), seen.end(), canonical) != seen.end()) {
        throw ConfigError("config 'extends' cycle through " + path.string());
    }
    seen.push_back(canonical);
    auto doc = read_json(path);
    if (!doc.is_object()) {
        throw ConfigError("config " + path.string() + " is not a JSON object");
    }
    if (doc.contains("extends")) {
        const auto base = doc["extends"];
        doc.erase("extends");
        const auto bases = base.is_array() ? base : json::array({base});
        for (const auto& b : bases) {
            read_chain(path.parent_path() / b.get<std::string>(), seen, out);
        }
    }
    out.merge_patch(doc);
}

void check_keys(const json& doc, const json& reference, const std::string& prefix) {
    for (const auto& [key, value] : doc.items()) {
        const auto name = prefix.empty() ? key : prefix + "." + key;
        if (!reference.contains(key)) {
            throw ConfigError("unknown config key '" + name + "'");
        }
        const auto& ref = reference[key];
        if (ref.is_object() && key != "scale_counts") {
            if (!value.is_object()) {
                throw ConfigError("config key '" + name + "' must be an object");
            }
            check_keys(value, ref, name);
        }
    }
}

std::string expand_env(const std::string& s) {
    static const std::regex pattern(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), pattern);
    size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        out += s.substr(last, it->position() - last);
        if (const char* v = std::getenv((*it)[1].str().c_str())) {
            out += v;
        }
        last = it->position() + it->length();
    }
    return out + s.substr(last);
}

void expand_all(json& doc) {
    if (doc.is_string()) {
        doc = expand_env(doc.get<std::string>());
    } else if (doc.is_structured()) {
        for (auto& v : doc) {
            expand_all(v);
        }
    }
}

template <typename T>
T get(const json& doc, const char* section, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + section + "." + key + "': " + e.what());
    }
}

}  // namespace

json read_config_file(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> seen;
    json out = json::object();
    read_chain(path, seen, out);
    return out;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
    }
    const auto path = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &config;
    size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

json resolve_config_json(const std::vector<std::filesystem::path>& files, const std::vector<std::string>& overrides) {
    const auto defaults = default_config_json();
    json user = json::object();
    for (const auto& f : files) {
        user.merge_patch(read_config_file(f));
    }
    for (const auto& o : overrides) {
        apply_override(user, o);
    }
    check_keys(user, defaults, "");
    json merged = defaults;
    merged.merge_patch(user);
    expand_all(merged);
    return merged;
}

Config parse_config(const json& doc) {
    check_keys(doc, default_config_json(), "");
    Config c;
    c.json = doc;

    const auto& enc = doc.at("model").at("encoder");
    auto& e = c.model.encoder;
    e.image_size = get<int64_t>(enc, "model.encoder", "image_size");
    e.patch_size = get<int64_t>(enc, "model.encoder", "patch_size");
    e.embed_dim = get<int64_t>(enc, "model.encoder", "embed_dim");
    e.depth = get<int64_t>(enc, "model.encoder", "depth");
    e.num_heads = get<int64_t>(enc, "model.encoder", "num_heads");
    e.mlp_ratio = get<double>(enc, "model.encoder", "mlp_ratio");
    e.keep_neck = get<bool>(enc, "model.encoder", "keep_neck");
    e.neck_dim = get<int64_t>(enc, "model.encoder", "neck_dim");
    try {
        e.validate();
    } catch (const DimensionError& err) {
        throw ConfigError(std::string("model.encoder: ") + err.what());
    }
    c.encoder_init.init = parse_backbone_init(get<std::string>(enc, "model.encoder", "init"));
    c.encoder_init.weights = get<std::string>(enc, "model.encoder", "weights");
    const auto format = get<std::string>(enc, "model.encoder", "weights_format");
    if (format == "auto") {
        c.encoder_init.naming = c.encoder_init.init == BackboneInit::Sam       ? WeightNaming::Sam
                                : c.encoder_init.init == BackboneInit::Generic ? WeightNaming::Timm
                                                                               : WeightNaming::Native;
    } else {
        c.encoder_init.naming = parse_weight_naming(format);
    }
    c.encoder_init.interpolate_pos_embed = get<bool>(enc, "model.encoder", "interpolate_pos_embed");
    if (c.encoder_init.init != BackboneInit::Random && c.encoder_init.weights.empty()) {
        throw ConfigError("model.encoder.init '" + to_string(c.encoder_init.init) +
                          "' needs model.encoder.weights (e.g. via ${GEM_SAM_WEIGHTS} or ${GEM_GENERIC_WEIGHTS})");
    }

    const auto& pyr = doc.at("model").at("pyramid");
    c.model.pyramid.dim = get<int64_t>(pyr, "model.pyramid", "dim");
    c.model.pyramid.norm = parse_norm2d(get<std::string>(pyr, "model.pyramid", "norm"));

    const auto& dqs = doc.at("model").at("dqs");
    c.model.dqs.enabled = get<bool>(dqs, "model.dqs", "enabled");
    c.model.dqs.extra_loss = get<bool>(dqs, "model.dqs", "extra_loss");
    const auto ranking = get<std::string>(dqs, "model.dqs", "ranking");
    if (ranking == "all") {
        c.model.dqs.ranking = QueryRanking::AllScores;
    } else if (ranking == "foreground") {
        c.model.dqs.ranking = QueryRanking::ForegroundOnly;
    } else {
        throw ConfigError("model.dqs.ranking must be all|foreground, got '" + ranking + "'");
    }

    const auto& dec = doc.at("model").at("decoder");
    auto& d = c.model.decoder;
    d.num_layers = get<int64_t>(dec, "model.decoder", "num_layers");
    d.num_queries = get<int64_t>(dec, "model.decoder", "num_queries");
    d.num_heads = get<int64_t>(dec, "model.decoder", "num_heads");
    d.ffn_dim = get<int64_t>(dec, "model.decoder", "ffn_dim");
    d.dropout = get<double>(dec, "model.decoder", "dropout");
    if (d.num_layers < 1 || d.num_queries < 1 || d.num_heads < 1 || c.model.pyramid.dim % d.num_heads != 0) {
        throw ConfigError("model.decoder: layers and queries must be positive and heads must divide pyramid.dim");
    }

    const auto& loss = doc.at("loss");
    auto& w = c.loss.weights;
    w.cls = get<double>(loss, "loss", "cls");
    w.l1 = get<double>(loss, "loss", "l1");
    w.giou = get<double>(loss, "loss", "giou");
    w.ce = get<double>(loss, "loss", "ce");
    w.dice = get<double>(loss, "loss", "dice");
    w.validate();
    c.loss.dqs_aux = get<double>(loss, "loss", "dqs_aux");
    c.loss.no_object_weight = get<double>(loss, "loss", "no_object_weight");
    c.loss.dice_eps = get<double>(loss, "loss", "dice_eps");
    c.loss.deep_supervision = get<bool>(loss, "loss", "deep_supervision");
    const auto down = get<std::string>(loss, "loss", "mask_downsample");
    if (down != "area" && down != "nearest") {
        throw ConfigError("loss.mask_downsample must be area|nearest");
    }
    c.loss.downsample = down == "area" ? MaskDownsample::Area : MaskDownsample::Nearest;
    const auto& tgt = loss.at("targets");
    const auto mode = get<std::string>(tgt, "loss.targets", "mode");
    if (mode != "components" && mode != "single") {
        throw ConfigError("loss.targets.mode must be components|single");
    }
    c.loss.targets.mode = mode == "components" ? TargetMode::Components : TargetMode::SingleMask;
    c.loss.targets.min_component_px = get<int64_t>(tgt, "loss.targets", "min_component_px");
    const auto small = get<std::string>(tgt, "loss.targets", "small_components");
    if (small != "merge" && small != "drop") {
        throw ConfigError("loss.targets.small_components must be merge|drop");
    }
    c.loss.targets.small = small == "merge" ? SmallComponentPolicy::Merge : SmallComponentPolicy::Drop;

    const auto& tr = doc.at("train");
    auto& t = c.train;
    t.stage = parse_stage(get<std::string>(tr, "train", "stage"));
    t.lr = get<double>(tr, "train", "lr");
    t.weight_decay = get<double>(tr, "train", "weight_decay");
    t.batch_size = get<int64_t>(tr, "train", "batch_size");
    t.epochs_pretrain = get<int64_t>(tr, "train", "epochs_pretrain");
    t.epochs_finetune = get<int64_t>(tr, "train", "epochs_finetune");
    t.max_steps = get<int64_t>(tr, "train", "max_steps");
    t.backbone_lr_mult = get<double>(tr, "train", "backbone_lr_mult");
    t.lr_decay_at = get<double>(tr, "train", "lr_decay_at");
    t.lr_decay = get<double>(tr, "train", "lr_decay");
    t.checkpoint_every = get<int64_t>(tr, "train", "checkpoint_every");
    t.output_dir = get<std::string>(tr, "train", "output_dir");
    t.manifest = get<std::string>(tr, "train", "manifest");
    t.init_checkpoint = get<std::string>(tr, "train", "init_checkpoint");
    const auto& aug = tr.at("augment");
    t.augment.enabled = get<bool>(aug, "train.augment", "enabled");
    t.augment.hflip = get<bool>(aug, "train.augment", "hflip");
    t.augment.scale_min = get<double>(aug, "train.augment", "scale_min");
    t.augment.scale_max = get<double>(aug, "train.augment", "scale_max");
    t.prefetch = get<int64_t>(tr, "train", "prefetch");
    t.seed = get<uint64_t>(tr, "train", "seed");
    t.precision = get<std::string>(tr, "train", "precision");
    if (t.precision != "float32" && t.precision != "float64") {
        throw ConfigError("train.precision must be float32|float64");
    }
    if (t.batch_size < 1 || t.epochs_pretrain < 1 || t.epochs_finetune < 1 || t.lr <= 0.0 || t.weight_decay < 0.0 ||
        t.prefetch < 1 || t.augment.scale_min <= 0.0 || t.augment.scale_min > t.augment.scale_max) {
        throw ConfigError("train: batch_size, epochs, prefetch and lr must be positive; 0 < scale_min <= scale_max");
    }

    const auto& ev = doc.at("eval");
    c.eval.threshold = get<double>(ev, "eval", "threshold");
    c.eval.aggregation = metrics::parse_aggregation(get<std::string>(ev, "eval", "aggregation"));
    c.eval.manifest = get<std::string>(ev, "eval", "manifest");

    const auto& dg = doc.at("datagen");
    auto& g = c.datagen;
    g.jobs.scale_tag = get<std::string>(dg, "datagen", "scale");
    g.jobs.count = get<int64_t>(dg, "datagen", "count");
    g.jobs.scale_counts = get<std::map<std::string, int64_t>>(dg, "datagen", "scale_counts");
    g.jobs.target_size = get<int64_t>(dg, "datagen", "target_size");
    g.jobs.prompt_mode = datagen::parse_prompt_mode(get<std::string>(dg, "datagen", "prompt_mode"));
    g.prompt_file = get<std::string>(dg, "datagen", "prompt_file");
    g.masks_manifest = get<std::string>(dg, "datagen", "masks_manifest");
    g.output_dir = get<std::string>(dg, "datagen", "output_dir");
    g.backend = get<std::string>(dg, "datagen", "backend");
    if (g.backend != "stub" && g.backend != "http") {
        throw ConfigError("datagen.backend must be stub|http");
    }
    g.endpoint = get<std::string>(dg, "datagen", "endpoint");
    g.timeout = std::chrono::milliseconds(get<int64_t>(dg, "datagen", "timeout_ms"));
    g.retries = get<int>(dg, "datagen", "retries");
    g.backoff = std::chrono::milliseconds(get<int64_t>(dg, "datagen", "backoff_ms"));
    g.parallelism = get<int>(dg, "datagen", "parallelism");
    g.model_version = get<std::string>(dg, "datagen", "model_version");
    if (g.parallelism < 1 || g.retries < 0) {
        throw ConfigError("datagen: parallelism must be >= 1 and retries >= 0");
    }

    const auto& cmp = doc.at("compare");
    c.compare.perplexity = get<double>(cmp, "compare", "perplexity");
    c.compare.iterations = get<int>(cmp, "compare", "iterations");
    c.compare.seed = get<uint64_t>(cmp, "compare", "seed");
    c.compare.embedder = get<std::string>(cmp, "compare", "embedder");
    if (c.compare.embedder != "encoder" && c.compare.embedder != "http") {
        throw ConfigError("compare.embedder must be encoder|http");
    }
    c.compare.endpoint = get<std::string>(cmp, "compare", "endpoint");
    c.compare.timeout = std::chrono::milliseconds(get<int64_t>(cmp, "compare", "timeout_ms"));
    return c;
}

std::string Config::hash() const {
    uint64_t h = 1469598103934665603ULL;
    for (const unsigned char ch : json.dump()) {
        h = (h ^ ch) * 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Config load_config(const std::vector<std::filesystem::path>& files, const std::vector<std::string>& overrides) {
    return parse_config(resolve_config_json(files, overrides));
}

}  // namespace gem::harness
