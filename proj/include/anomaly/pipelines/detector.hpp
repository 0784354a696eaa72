#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "anomaly/data/noise.hpp"
#include "anomaly/data/split.hpp"
#include "anomaly/metrics/csv.hpp"
#include "anomaly/metrics/report.hpp"
#include "anomaly/nn/serialize.hpp"
#include "anomaly/pipelines/architectures.hpp"
#include "anomaly/pipelines/kde.hpp"
#include "anomaly/pipelines/scoring.hpp"
#include "anomaly/pipelines/train.hpp"

namespace anomaly {

enum class Method { cnn, kd_cae, ni_cae };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::cnn: return "cnn";
        case Method::kd_cae: return "kd-cae";
        case Method::ni_cae: return "ni-cae";
    }
    return "cnn";
}

inline Method parse_method(std::string_view s) {
    if (s == "cnn") return Method::cnn;
    if (s == "kd-cae") return Method::kd_cae;
    if (s == "ni-cae") return Method::ni_cae;
    throw ConfigError("unknown method '" + std::string(s) + "' (expected cnn, kd-cae or ni-cae)");
}

struct PipelineConfig {
    Method method = Method::kd_cae;
    CnnConfig cnn;
    KdCaeConfig kd_cae;
    NiCaeConfig ni_cae;
    TrainConfig train;
    double val_fraction = 0.2;
    bool calibrate = true;     // calibrate thresholds on validation data instead of using `thresholds`
    double percentile = 95.0;  // calibration percentile p
    ThresholdSet thresholds;
    std::size_t latent_pool = 0;  // 0 keeps the full latent for the KDE
    NoiseOptions train_noise{0.0};
    double cutoff = 0.5;  // CNN decision cutoff
};

/// Everything needed to score an image: trained model, optional latent KDE and the decision rule.
struct Detector {
    Method method = Method::kd_cae;
    ModelGraph<float> model;
    std::optional<KdeModel> kde;
    std::size_t latent_pool = 0;
    ThresholdSet thresholds;
    double cutoff = 0.5;

    bool operator==(const Detector&) const = default;
};

struct ScoredImage {
    double score = 0.0;  // recon error for the autoencoders, defect probability for the CNN
    double recon_error = 0.0;
    std::optional<double> kde_log_density;
    Label decision = Label::good;
};

struct FitResult {
    Detector detector;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
    std::optional<NoisePlan> noise_plan;  // indices into the training list
    std::vector<std::string> warnings;
};

namespace detail {

inline Tensor<float> label_targets(const std::vector<ImageSample>& samples) {
    Tensor<float> t(Shape{samples.size(), 1, 1, 1});
    for (std::size_t i = 0; i < samples.size(); ++i) t[i] = samples[i].label == Label::defect ? 1.0f : 0.0f;
    return t;
}

inline std::vector<double> kde_scores(const Detector& det, const std::vector<std::vector<double>>& latents) {
    std::vector<double> out;
    out.reserve(latents.size());
    for (const auto& z : latents) {
        out.push_back(det.latent_pool ? kde_log_density(*det.kde, pool_latent(z, det.latent_pool))
                                      : kde_log_density(*det.kde, z));
    }
    return out;
}

}  // namespace detail

inline std::vector<ScoredImage> score_images(const Detector& det, const Tensor<float>& images) {
    std::vector<ScoredImage> out(images.shape().n);
    if (det.method == Method::cnn) {
        const auto decisions = classify_supervised(det.model, images, det.cutoff);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].score = decisions[i].probability;
            out[i].decision = decisions[i].label;
        }
        return out;
    }
    const auto errors = reconstruction_errors(det.model, images);
    std::vector<double> densities;
    if (det.kde) densities = detail::kde_scores(det, encode_latents(det.model, images));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].score = errors[i];
        out[i].recon_error = errors[i];
        if (det.kde) out[i].kde_log_density = densities[i];
        out[i].decision = decide_anomaly(errors[i], out[i].kde_log_density, det.thresholds);
    }
    return out;
}

/// Train a detector of `cfg.method` on `train`. Training noise, if enabled, is
/// applied to the whole list first. Then `val_fraction` of it is held out for
/// early stopping and, for the autoencoders, threshold calibration.
/// Autoencoders accept only good samples; the CNN needs both labels.
inline FitResult fit_detector(const std::vector<ImageSample>& train, const PipelineConfig& cfg,
                              const EpochCallback& on_epoch = {}) {
    if (train.empty()) throw DataError("no training images");
    Dataset pool{"train", train, cfg.train.seed};
    if (cfg.method != Method::cnn) {
        for (const auto& s : train) {
            if (s.label != Label::good) throw DataError("autoencoder training data must be good-only: " + s.source_path);
        }
    }
    FitResult result;
    if (cfg.train_noise.fraction > 0.0) {
        NoiseOptions opt = cfg.train_noise;
        opt.scope = NoiseScope::all;  // every training image is eligible
        auto [noisy, plan] = inject_gaussian_noise(pool, opt, derive_seed(cfg.train.seed, "train-noise"));
        pool = std::move(noisy);
        result.noise_plan = std::move(plan);
    }
    const bool hold_out = cfg.val_fraction > 0.0 && train.size() >= 2;
    Dataset fit_set = pool, val_set;
    if (hold_out) std::tie(fit_set, val_set) = split_validation(pool, cfg.val_fraction, cfg.train.seed);

    const auto shape = fit_set.samples.front().pixels.shape();
    ModelGraph<float> model;
    switch (cfg.method) {
        case Method::cnn: model = build_cnn(cfg.cnn, cfg.train.seed); break;
        case Method::kd_cae: model = build_kd_cae(cfg.kd_cae, cfg.train.seed); break;
        case Method::ni_cae: model = build_ni_cae(cfg.ni_cae, cfg.train.seed); break;
    }
    if (shape.c != model.input.c || shape.h != model.input.h || shape.w != model.input.w) {
        throw ConfigError("images are " + std::to_string(shape.c) + "x" + std::to_string(shape.h) + "x" +
                          std::to_string(shape.w) + " but the " + std::string(to_string(cfg.method)) +
                          " model expects " + std::to_string(model.input.c) + "x" + std::to_string(model.input.h) +
                          "x" + std::to_string(model.input.w));
    }

    const auto x = stack_pixels(fit_set.samples);
    const bool supervised = cfg.method == Method::cnn;
    const auto y = supervised ? detail::label_targets(fit_set.samples) : x;
    std::optional<Tensor<float>> vx, vy;
    if (hold_out) {
        vx = stack_pixels(val_set.samples);
        vy = supervised ? detail::label_targets(val_set.samples) : *vx;
    }
    TrainConfig tc = cfg.train;
    tc.loss = supervised ? LossKind::bce : LossKind::mse;
    auto trained = train_model(std::move(model), x, y, vx ? &*vx : nullptr, vy ? &*vy : nullptr, tc, on_epoch);
    result.history = std::move(trained.history);
    result.best_epoch = trained.best_epoch;
    result.stopped_early = trained.stopped_early;

    Detector& det = result.detector;
    det.method = cfg.method;
    det.model = std::move(trained.model);
    det.latent_pool = cfg.latent_pool;
    det.cutoff = cfg.cutoff;
    det.thresholds = cfg.thresholds;
    if (supervised) return result;

    if (cfg.method == Method::kd_cae) {
        auto latents = encode_latents(det.model, x);
        if (det.latent_pool) {
            for (auto& z : latents) z = pool_latent(z, det.latent_pool);
        }
        det.kde = fit_kde(latents);
        if (det.kde->bandwidth_floored) {
            result.warnings.push_back("KDE latents have no spread; bandwidth fell back to the 1e-3 floor");
        }
    } else {
        det.thresholds.rule = CombineRule::recon_only;
    }
    if (cfg.calibrate) {
        const Tensor<float>& calib = hold_out ? *vx : x;
        const auto errors = reconstruction_errors(det.model, calib);
        std::vector<double> densities;
        if (det.kde && uses_kde(det.thresholds.rule)) densities = detail::kde_scores(det, encode_latents(det.model, calib));
        det.thresholds = calibrate_thresholds(errors, densities, cfg.percentile, det.thresholds.rule);
    }
    return result;
}

/// Score `samples` and assemble the evaluation report (AUC uses ScoredImage::score).
inline EvalReport evaluate_detector(const Detector& det, const std::vector<ImageSample>& samples,
                                    const std::string& dataset, std::uint64_t seed,
                                    std::vector<ScoredImage>* scores_out = nullptr) {
    if (samples.empty()) throw DataError("no evaluation images");
    const auto scores = score_images(det, stack_pixels(samples));
    EvalReport r;
    r.method = std::string(to_string(det.method));
    r.dataset = dataset;
    r.seed = seed;
    if (det.method == Method::cnn) {
        r.thresholds = {{"cutoff", det.cutoff}};
    } else {
        if (uses_recon(det.thresholds.rule)) r.thresholds.emplace_back("recon", det.thresholds.recon);
        if (uses_kde(det.thresholds.rule)) r.thresholds.emplace_back("kde", det.thresholds.kde);
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        r.samples.push_back({samples[i].source_path, samples[i].label, scores[i].score, scores[i].decision});
    }
    finalize_report(r);
    if (scores_out) *scores_out = scores;
    return r;
}

/// Per-image dump: path,label,recon_error,kde_log_density,decision (6 decimals; empty when not computed).
inline void write_score_dump(const std::filesystem::path& path, const std::vector<ImageSample>& samples,
                             const std::vector<ScoredImage>& scores) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "path,label,recon_error,kde_log_density,decision\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out << csv::quote(samples[i].source_path) << ',' << to_string(samples[i].label) << ','
            << csv::fixed(scores[i].recon_error) << ','
            << (scores[i].kde_log_density ? csv::fixed(*scores[i].kde_log_density) : std::string()) << ','
            << to_string(scores[i].decision) << '\n';
    }
}

// ---------------------------------------------------------------- persistence

/// Writes model.anomf, detector.txt (decision parameters) and, if present, kde.bin.
inline void save_detector(const Detector& det, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_model(dir / "model.anomf", det.model);
    std::ofstream meta(dir / "detector.txt", std::ios::binary);
    if (!meta) throw DataError("cannot write " + (dir / "detector.txt").string());
    meta << "method = " << to_string(det.method) << '\n'
         << "combine_rule = " << to_string(det.thresholds.rule) << '\n'
         << "recon_threshold = " << csv::exact(det.thresholds.recon) << '\n'
         << "kde_threshold = " << csv::exact(det.thresholds.kde) << '\n'
         << "cutoff = " << csv::exact(det.cutoff) << '\n'
         << "latent_pool = " << det.latent_pool << '\n'
         << "kde = " << (det.kde ? "kde.bin" : "none") << '\n';
    if (det.kde) {
        std::ofstream kb(dir / "kde.bin", std::ios::binary);
        if (!kb) throw DataError("cannot write " + (dir / "kde.bin").string());
        kb.write("ANOKDE1", 7);
        io::put_u64(kb, det.kde->n);
        io::put_u64(kb, det.kde->d);
        io::put_f64(kb, det.kde->bandwidth);
        io::put_u32(kb, det.kde->bandwidth_floored ? 1 : 0);
        for (double v : det.kde->latents) io::put_f64(kb, v);
        if (!kb) throw DataError("failed writing " + (dir / "kde.bin").string());
    }
}

inline Detector load_detector(const std::filesystem::path& dir) {
    Detector det;
    std::ifstream meta(dir / "detector.txt");
    if (!meta) throw DataError("missing " + (dir / "detector.txt").string());
    bool has_kde = false;
    for (std::string line; std::getline(meta, line);) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
        if (key == "method") det.method = parse_method(value);
        else if (key == "combine_rule") det.thresholds.rule = parse_combine_rule(value);
        else if (key == "recon_threshold") det.thresholds.recon = csv::parse_double(value);
        else if (key == "kde_threshold") det.thresholds.kde = csv::parse_double(value);
        else if (key == "cutoff") det.cutoff = csv::parse_double(value);
        else if (key == "latent_pool") det.latent_pool = std::stoull(value);
        else if (key == "kde") has_kde = value != "none";
    }
    det.model = load_model(dir / "model.anomf");
    if (has_kde) {
        std::ifstream kb(dir / "kde.bin", std::ios::binary);
        if (!kb) throw DataError("missing " + (dir / "kde.bin").string());
        char magic[7];
        kb.read(magic, 7);
        if (!kb || std::string(magic, 7) != "ANOKDE1") throw DataError("kde.bin: bad magic");
        KdeModel k;
        k.n = io::get_u64(kb);
        k.d = io::get_u64(kb);
        k.bandwidth = io::get_f64(kb);
        k.bandwidth_floored = io::get_u32(kb) != 0;
        if (k.n == 0 || k.d == 0 || k.n * k.d > (std::size_t{1} << 32)) throw DataError("kde.bin: bad extents");
        k.latents.resize(k.n * k.d);
        for (auto& v : k.latents) v = io::get_f64(kb);
        det.kde = std::move(k);
    }
    return det;
}

}  // namespace anomaly
