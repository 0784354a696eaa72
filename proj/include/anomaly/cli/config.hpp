#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anomaly/core/error.hpp"
#include "anomaly/data/noise.hpp"
#include "anomaly/data/synthetic.hpp"
#include "anomaly/gan/dcgan.hpp"
#include "anomaly/metrics/csv.hpp"
#include "anomaly/pipelines/detector.hpp"

namespace anomaly::cli {

// ---------------------------------------------------------------- schema

struct KeyDef {
    std::string_view section;
    std::string_view key;
    std::string_view fallback;
    std::string_view help;
};

// Every key is unique across sections, so it doubles as a `--key value` flag.
inline constexpr KeyDef kSchema[] = {
    {"run", "model", "", "cnn, kd-cae, ni-cae or dcgan (required)"},
    {"run", "class", "", "class directory name (synthetic runs default to synthetic-<shape>)"},
    {"run", "seed", "0", "master seed for every random stream"},

    {"data", "source", "synthetic", "synthetic or dir"},
    {"data", "data-root", "", "dataset root for source = dir (falls back to ANOMALY_DATA_ROOT)"},
    {"data", "image-size", "128", "square side the images are resized to"},
    {"data", "grayscale", "true", "convert to one luminance channel"},
    {"data", "synth-shape", "disk", "synthetic object: disk or rect"},
    {"data", "synth-train", "100", "synthetic good training images"},
    {"data", "synth-test", "40", "synthetic test images"},
    {"data", "synth-defect-rate", "0.5", "fraction of synthetic test images with a defect"},
    {"data", "val-fraction", "0.2", "share of training images held out for validation"},

    {"train", "epochs", "50", "maximum training epochs"},
    {"train", "batch-size", "16", "mini-batch size"},
    {"train", "optimizer", "rmsprop", "rmsprop or sgd"},
    {"train", "learning-rate", "0.001", "optimizer step size"},
    {"train", "patience", "5", "early-stopping patience in epochs (0 = off)"},
    {"train", "steps", "2000", "dcgan generator steps"},

    {"model", "cnn-blocks", "5", "cnn conv/pool blocks"},
    {"model", "cnn-filters", "16", "cnn filters per conv"},
    {"model", "hidden-units", "64", "cnn hidden dense width"},
    {"model", "base-filters", "32", "kd-cae first encoder width"},
    {"model", "latent-extent", "8", "kd-cae bottleneck side"},
    {"model", "ni-filters", "128,64,16,8,4", "ni-cae encoder filter counts"},
    {"model", "bottleneck", "512", "ni-cae dense bottleneck width"},
    {"model", "latent-pool", "0", "average-pool the kd-cae latent to this length before the KDE (0 = off)"},
    {"model", "z-dim", "100", "dcgan latent size"},
    {"model", "gan-channels", "16", "dcgan base channel count"},
    {"model", "gan-k", "1", "discriminator updates per generator update"},
    {"model", "gan-lr-g", "0.0002", "generator learning rate"},
    {"model", "gan-lr-d", "0.0002", "discriminator learning rate"},

    {"threshold", "thresholds", "calibrate:95", "calibrate:<p> or fixed"},
    {"threshold", "recon-threshold", "0.005", "fixed reconstruction-error threshold"},
    {"threshold", "kde-threshold", "0", "fixed KDE log-density threshold"},
    {"threshold", "combine-rule", "or", "recon_only, kde_only, or, and"},
    {"threshold", "cutoff", "0.5", "cnn probability cutoff"},

    {"noise", "noise-train", "auto", "on, off or auto (on for ni-cae)"},
    {"noise", "noise-test", "off", "perturb test images at evaluation"},
    {"noise", "noise-fraction", "0.1", "share of eligible images perturbed"},
    {"noise", "noise-mean", "0", "gaussian noise mean"},
    {"noise", "noise-variance", "0.001", "gaussian noise variance"},

    {"output", "out", "", "run directory (default runs/<model>-<class>-<seed>)"},
    {"output", "histogram-bins", "20", "bins of the score histogram"},
    {"output", "diagnostics", "8", "test images written with reconstruction and SSIM maps"},
    {"output", "samples", "16", "images written by generate"},
};

inline const KeyDef* find_key(std::string_view key) {
    for (const auto& k : kSchema) {
        if (k.key == key) return &k;
    }
    return nullptr;
}

// ---------------------------------------------------------------- raw values

/// Key -> textual value, plus the warnings produced while collecting them.
struct ConfigValues {
    std::map<std::string, std::string, std::less<>> values;
    std::vector<std::string> warnings;

    void set(const std::string& key, const std::string& value, const std::string& origin) {
        if (!find_key(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
        values[key] = value;
    }
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

/// Line-oriented `key = value` with `[section]` headers and `#`/`;` comments.
/// A key must sit under its own section (or before any header). Repeated keys
/// keep the last value and add a warning.
inline void parse_config_text(std::string_view text, const std::string& origin, ConfigValues& out) {
    std::string section;
    std::map<std::string, std::size_t> seen;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        std::string line = trim(raw);
        if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line = trim(line.substr(3));
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            const bool known = std::any_of(std::begin(kSchema), std::end(kSchema),
                                           [&](const KeyDef& k) { return k.section == section; });
            if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const KeyDef* def = find_key(key);
        if (!def) throw ConfigError(where + ": unknown key '" + key + "'");
        if (!section.empty() && def->section != section) {
            throw ConfigError(where + ": key '" + key + "' belongs in [" + std::string(def->section) + "], not [" +
                              section + "]");
        }
        if (const auto it = seen.find(key); it != seen.end()) {
            out.warnings.push_back(where + ": duplicate key '" + key + "' (line " + std::to_string(it->second) +
                                   "); the last value wins");
        }
        seen[key] = lineno;
        out.values[key] = value;
    }
}

inline void parse_config_file(const std::filesystem::path& path, ConfigValues& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    parse_config_text(ss.str(), path.string(), out);
}

// ---------------------------------------------------------------- typed config

enum class ModelKind { cnn, kd_cae, ni_cae, dcgan };

inline std::string_view to_string(ModelKind m) {
    switch (m) {
        case ModelKind::cnn: return "cnn";
        case ModelKind::kd_cae: return "kd-cae";
        case ModelKind::ni_cae: return "ni-cae";
        case ModelKind::dcgan: return "dcgan";
    }
    return "cnn";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "cnn") return ModelKind::cnn;
    if (s == "kd-cae") return ModelKind::kd_cae;
    if (s == "ni-cae") return ModelKind::ni_cae;
    if (s == "dcgan") return ModelKind::dcgan;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected cnn, kd-cae, ni-cae or dcgan)");
}

struct RunConfig {
    ModelKind model = ModelKind::kd_cae;
    std::string class_name;
    std::uint64_t seed = 0;

    bool synthetic = true;
    std::filesystem::path data_root;
    std::size_t image_size = 128;
    bool grayscale = true;
    SyntheticSpec synth;
    double val_fraction = 0.2;

    TrainConfig train;
    std::size_t gan_steps = 2000;

    CnnConfig cnn;
    KdCaeConfig kd_cae;
    NiCaeConfig ni_cae;
    std::size_t latent_pool = 0;
    GanConfig gan;

    std::optional<double> calibrate_percentile = 95.0;
    ThresholdSet thresholds;
    double cutoff = 0.5;

    bool noise_train = false;
    bool noise_test = false;
    NoiseOptions noise;

    std::filesystem::path out;
    std::size_t histogram_bins = 20;
    std::size_t diagnostics = 8;
    std::size_t samples = 16;

    ConfigValues resolved;  // every key with its effective textual value
};

namespace detail {

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
        x = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
    return static_cast<T>(x);
}

inline double parse_real(const std::string& key, const std::string& v) {
    try {
        const double x = csv::parse_double(v);
        if (!std::isfinite(x)) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "off" || v == "no" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected on/off, got '" + v + "'");
}

inline std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_unsigned<std::size_t>(key, trim(item)));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

}  // namespace detail

/// Fill defaults, check every value and build the typed configuration.
inline RunConfig resolve_config(const ConfigValues& given) {
    RunConfig rc;
    rc.resolved.warnings = given.warnings;
    for (const auto& k : kSchema) rc.resolved.values[std::string(k.key)] = std::string(k.fallback);
    for (const auto& [k, v] : given.values) rc.resolved.set(k, v, "config");
    auto& val = rc.resolved.values;
    const auto get = [&](const char* key) -> const std::string& { return val.find(key)->second; };
    using detail::parse_bool, detail::parse_real, detail::parse_unsigned;

    if (get("model").empty()) throw ConfigError("missing required key 'model'");
    rc.model = parse_model_kind(get("model"));
    rc.seed = parse_unsigned<std::uint64_t>("seed", get("seed"));

    const auto& source = get("source");
    if (source != "synthetic" && source != "dir") throw ConfigError("key 'source': expected synthetic or dir");
    rc.synthetic = source == "synthetic";
    rc.image_size = parse_unsigned<std::size_t>("image-size", get("image-size"));
    if (rc.image_size == 0) throw ConfigError("key 'image-size' must be positive");
    rc.grayscale = parse_bool("grayscale", get("grayscale"));
    const auto& shape = get("synth-shape");
    if (shape != "disk" && shape != "rect") throw ConfigError("key 'synth-shape': expected disk or rect");
    rc.synth.shape = shape == "disk" ? ShapeKind::disk : ShapeKind::rect;
    rc.synth.n_train = parse_unsigned<std::size_t>("synth-train", get("synth-train"));
    rc.synth.n_test = parse_unsigned<std::size_t>("synth-test", get("synth-test"));
    rc.synth.defect_rate = parse_real("synth-defect-rate", get("synth-defect-rate"));
    rc.synth.image_size = rc.image_size;
    rc.synth.channels = rc.grayscale ? 1 : 3;
    rc.synth.seed = rc.seed;
    rc.val_fraction = parse_real("val-fraction", get("val-fraction"));
    if (!(rc.val_fraction >= 0.0 && rc.val_fraction < 1.0)) throw ConfigError("key 'val-fraction' must be in [0,1)");

    rc.class_name = get("class");
    if (rc.class_name.empty()) {
        if (!rc.synthetic) throw ConfigError("key 'class' is required when source = dir");
        rc.class_name = "synthetic-" + shape;
        val["class"] = rc.class_name;
    }
    if (!rc.synthetic) {
        std::string root = get("data-root");
        if (root.empty()) {
            if (const char* env = std::getenv("ANOMALY_DATA_ROOT"); env && *env) root = env;
        }
        if (root.empty()) throw ConfigError("source = dir needs 'data-root' or the ANOMALY_DATA_ROOT variable");
        rc.data_root = root;
        val["data-root"] = root;
    }

    rc.train.epochs = parse_unsigned<std::size_t>("epochs", get("epochs"));
    rc.train.batch_size = parse_unsigned<std::size_t>("batch-size", get("batch-size"));
    if (rc.train.batch_size == 0) throw ConfigError("key 'batch-size' must be positive");
    const auto& opt = get("optimizer");
    if (opt != "rmsprop" && opt != "sgd") throw ConfigError("key 'optimizer': expected rmsprop or sgd");
    rc.train.optimizer = opt == "sgd" ? OptimizerKind::sgd : OptimizerKind::rmsprop;
    rc.train.learning_rate = parse_real("learning-rate", get("learning-rate"));
    if (!(rc.train.learning_rate > 0.0)) throw ConfigError("key 'learning-rate' must be positive");
    rc.train.patience = parse_unsigned<std::size_t>("patience", get("patience"));
    rc.train.seed = rc.seed;
    rc.gan_steps = parse_unsigned<std::size_t>("steps", get("steps"));

    const std::size_t channels = rc.grayscale ? 1 : 3;
    rc.cnn = {channels, rc.image_size, parse_unsigned<std::size_t>("cnn-blocks", get("cnn-blocks")),
              parse_unsigned<std::size_t>("cnn-filters", get("cnn-filters")),
              parse_unsigned<std::size_t>("hidden-units", get("hidden-units"))};
    rc.kd_cae = {channels, rc.image_size, parse_unsigned<std::size_t>("base-filters", get("base-filters")),
                 parse_unsigned<std::size_t>("latent-extent", get("latent-extent"))};
    rc.ni_cae = {channels, rc.image_size, detail::parse_list("ni-filters", get("ni-filters")),
                 parse_unsigned<std::size_t>("bottleneck", get("bottleneck"))};
    rc.latent_pool = parse_unsigned<std::size_t>("latent-pool", get("latent-pool"));
    rc.gan.z_dim = parse_unsigned<std::size_t>("z-dim", get("z-dim"));
    rc.gan.image_size = rc.image_size;
    rc.gan.channels = channels;
    rc.gan.base_channels = parse_unsigned<std::size_t>("gan-channels", get("gan-channels"));
    rc.gan.k = parse_unsigned<std::size_t>("gan-k", get("gan-k"));
    rc.gan.batch_size = rc.train.batch_size;
    rc.gan.lr_g = parse_real("gan-lr-g", get("gan-lr-g"));
    rc.gan.lr_d = parse_real("gan-lr-d", get("gan-lr-d"));
    rc.gan.seed = rc.seed;

    const auto& th = get("thresholds");
    if (th == "fixed") {
        rc.calibrate_percentile.reset();
    } else if (th.starts_with("calibrate:")) {
        rc.calibrate_percentile = parse_real("thresholds", th.substr(10));
        if (!(*rc.calibrate_percentile >= 0.0 && *rc.calibrate_percentile <= 100.0)) {
            throw ConfigError("key 'thresholds': percentile must be in [0,100]");
        }
    } else {
        throw ConfigError("key 'thresholds': expected calibrate:<p> or fixed, got '" + th + "'");
    }
    rc.thresholds.recon = parse_real("recon-threshold", get("recon-threshold"));
    rc.thresholds.kde = parse_real("kde-threshold", get("kde-threshold"));
    rc.thresholds.rule = parse_combine_rule(get("combine-rule"));
    rc.cutoff = parse_real("cutoff", get("cutoff"));

    const auto& nt = get("noise-train");
    rc.noise_train = nt == "auto" ? rc.model == ModelKind::ni_cae : parse_bool("noise-train", nt);
    rc.noise_test = parse_bool("noise-test", get("noise-test"));
    rc.noise.fraction = parse_real("noise-fraction", get("noise-fraction"));
    rc.noise.mean = parse_real("noise-mean", get("noise-mean"));
    rc.noise.variance = parse_real("noise-variance", get("noise-variance"));
    if (!(rc.noise.fraction >= 0.0 && rc.noise.fraction <= 1.0)) throw ConfigError("key 'noise-fraction' must be in [0,1]");
    if (!(rc.noise.variance >= 0.0)) throw ConfigError("key 'noise-variance' must be non-negative");

    rc.out = get("out");
    if (rc.out.empty()) {
        rc.out = std::filesystem::path("runs") /
                 (std::string(to_string(rc.model)) + "-" + rc.class_name + "-" + std::to_string(rc.seed));
        val["out"] = rc.out.string();
    }
    rc.histogram_bins = parse_unsigned<std::size_t>("histogram-bins", get("histogram-bins"));
    if (rc.histogram_bins == 0) throw ConfigError("key 'histogram-bins' must be positive");
    rc.diagnostics = parse_unsigned<std::size_t>("diagnostics", get("diagnostics"));
    rc.samples = parse_unsigned<std::size_t>("samples", get("samples"));
    return rc;
}

/// The resolved configuration as config-file text, grouped by section.
inline std::string format_config(const RunConfig& rc) {
    std::ostringstream out;
    std::string_view section;
    for (const auto& k : kSchema) {
        if (k.section != section) {
            if (!section.empty()) out << '\n';
            section = k.section;
            out << '[' << section << "]\n";
        }
        out << k.key << " = " << rc.resolved.values.find(k.key)->second << '\n';
    }
    return out.str();
}

inline PipelineConfig pipeline_config(const RunConfig& rc) {
    PipelineConfig p;
    switch (rc.model) {
        case ModelKind::cnn: p.method = Method::cnn; break;
        case ModelKind::kd_cae: p.method = Method::kd_cae; break;
        case ModelKind::ni_cae: p.method = Method::ni_cae; break;
        case ModelKind::dcgan: throw ConfigError("dcgan is not a detector");
    }
    p.cnn = rc.cnn;
    p.kd_cae = rc.kd_cae;
    p.ni_cae = rc.ni_cae;
    p.train = rc.train;
    p.val_fraction = rc.val_fraction;
    p.calibrate = rc.calibrate_percentile.has_value();
    p.percentile = rc.calibrate_percentile.value_or(95.0);
    p.thresholds = rc.thresholds;
    p.latent_pool = rc.latent_pool;
    p.cutoff = rc.cutoff;
    p.train_noise = rc.noise;
    if (!rc.noise_train) p.train_noise.fraction = 0.0;
    return p;
}

}  // namespace anomaly::cli
