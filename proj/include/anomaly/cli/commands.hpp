#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "anomaly/cli/config.hpp"
#include "anomaly/data/loader.hpp"
#include "anomaly/data/manifest.hpp"
#include "anomaly/data/pnm.hpp"
#include "anomaly/data/preprocess.hpp"
#include "anomaly/data/split.hpp"
#include "anomaly/gan/dcgan.hpp"
#include "anomaly/metrics/histogram.hpp"
#include "anomaly/metrics/report.hpp"
#include "anomaly/pipelines/detector.hpp"
#include "anomaly/pipelines/ssim.hpp"

namespace anomaly::cli {

namespace fs = std::filesystem;

inline constexpr const char* kConfigEcho = "config.cfg";
inline constexpr const char* kCheckpointDir = "checkpoint";

/// Training and evaluation images for a run, already at the configured size.
struct RunData {
    std::string name;
    std::vector<ImageSample> train;
    std::vector<ImageSample> eval;
    std::vector<std::string> warnings;
};

/// Share of labeled test images kept for evaluation when a supervised model
/// has to borrow labeled images from a directory dataset.
inline constexpr double kSupervisedEvalFraction = 0.5;

inline RunData load_run_data(const RunConfig& rc) {
    RunData d;
    d.name = rc.class_name;
    Dataset ds;
    if (rc.synthetic) {
        ds = generate_synthetic_set(rc.synth);
    } else {
        LoadReport report;
        ds = preprocess(load_image_dir(rc.data_root, rc.class_name, &report), rc.image_size, rc.grayscale);
        d.warnings = std::move(report.warnings);
    }
    if (rc.model != ModelKind::cnn) {
        d.train = ds.subset(Split::train).samples;
        d.eval = ds.subset(Split::test).samples;
    } else if (rc.synthetic) {
        d.train = generate_labeled_training_set(rc.synth);
        d.eval = ds.subset(Split::test).samples;
    } else {
        std::tie(d.train, d.eval) = supervised_partition(ds, kSupervisedEvalFraction, rc.seed);
    }
    return d;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

inline void echo_config(const RunConfig& rc, const fs::path& dir) {
    fs::create_directories(dir);
    write_text(dir / kConfigEcho, format_config(rc));
}

inline void write_training_history(const fs::path& path, const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,seconds\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << csv::exact(e.train_loss) << ',' << (e.val_loss ? csv::exact(*e.val_loss) : "") << ','
            << csv::fixed(e.seconds, 3) << '\n';
    }
    write_text(path, out.str());
}

inline void write_noise_plan(const fs::path& path, const NoisePlan& plan, const std::vector<ImageSample>& samples) {
    std::ostringstream out;
    out << "index,path,mean,variance\n";
    for (std::size_t i : plan.selected_indices) {
        out << i << ',' << csv::quote(samples[i].source_path) << ',' << csv::exact(plan.mean) << ','
            << csv::exact(plan.variance) << '\n';
    }
    write_text(path, out.str());
}

// ---------------------------------------------------------------- synth

/// Render the synthetic dataset into `rc.out` as an image tree plus manifest.
inline void cmd_synth(const RunConfig& rc, std::ostream& log) {
    const auto ds = generate_synthetic_set(rc.synth);
    save_dataset_cache(ds, rc.out);
    echo_config(rc, rc.out);
    log << "wrote " << ds.samples.size() << " synthetic images to " << rc.out.string() << '\n';
}

// ---------------------------------------------------------------- train

inline void cmd_train(const RunConfig& rc, std::ostream& log) {
    const auto data = load_run_data(rc);
    for (const auto& w : data.warnings) log << "warning: " << w << '\n';
    fs::create_directories(rc.out);
    echo_config(rc, rc.out);

    if (rc.model == ModelKind::dcgan) {
        auto pair = build_gan(rc.gan);
        const auto images = to_tanh_range(stack_pixels(data.train));
        const std::size_t every = std::max<std::size_t>(1, rc.gan_steps / 20);
        train_gan(pair, images, rc.gan_steps, rc.gan, [&](const GanStep& s) {
            if (s.step % every == 0) {
                log << "step " << s.step << "  J_D " << csv::fixed(s.j_d, 4) << "  J_G " << csv::fixed(s.j_g, 4)
                    << "  D(x) " << csv::fixed(s.mean_d_real, 3) << "  D(G(z)) " << csv::fixed(s.mean_d_fake, 3)
                    << '\n';
            }
        });
        save_gan(pair, rc.out / kCheckpointDir);
        write_gan_history(rc.out / "history.csv", pair.history);
        log << "saved generator and discriminator to " << (rc.out / kCheckpointDir).string() << '\n';
        return;
    }

    const auto pc = pipeline_config(rc);
    auto fit = fit_detector(data.train, pc, [&](const EpochRecord& e) {
        log << "epoch " << e.epoch << "  train " << csv::fixed(e.train_loss) << "  val "
            << (e.val_loss ? csv::fixed(*e.val_loss) : std::string("-")) << "  " << csv::fixed(e.seconds, 1) << "s\n";
    });
    for (const auto& w : fit.warnings) log << "warning: " << w << '\n';
    save_detector(fit.detector, rc.out / kCheckpointDir);
    write_training_history(rc.out / "history.csv", fit.history);
    std::ostringstream summary;
    summary << "key,value\nepochs_run," << fit.history.size() << "\nbest_epoch," << fit.best_epoch
            << "\nstopped_early," << (fit.stopped_early ? "true" : "false") << '\n';
    write_text(rc.out / "training.csv", summary.str());
    if (fit.noise_plan) {
        write_noise_plan(rc.out / "noise_plan.csv", *fit.noise_plan, data.train);
        log << "noise injected into " << fit.noise_plan->selected_indices.size() << " of " << data.train.size()
            << " training images\n";
    }
    if (fit.stopped_early) log << "early stop after epoch " << fit.history.size() << ", best epoch " << fit.best_epoch << '\n';
    const auto& t = fit.detector.thresholds;
    if (fit.detector.method != Method::cnn) {
        log << "thresholds: recon " << csv::exact(t.recon);
        if (uses_kde(t.rule)) log << ", kde " << csv::exact(t.kde);
        log << " (" << to_string(t.rule) << ")\n";
    }
    log << "saved model to " << (rc.out / kCheckpointDir).string() << '\n';
}

// ---------------------------------------------------------------- eval

/// Resolved configuration of an existing run with optional overrides on top.
inline RunConfig load_run_config(const fs::path& run_dir, const ConfigValues& overrides) {
    if (!fs::exists(run_dir / kConfigEcho)) throw DataError(run_dir.string() + " is not a run directory (no " + kConfigEcho + ")");
    ConfigValues v;
    parse_config_file(run_dir / kConfigEcho, v);
    for (const auto& [k, value] : overrides.values) v.values[k] = value;
    v.warnings.insert(v.warnings.end(), overrides.warnings.begin(), overrides.warnings.end());
    v.values["out"] = run_dir.string();
    return resolve_config(v);
}

inline std::string eval_dir_name(const RunConfig& rc) { return rc.noise_test ? "eval-noisy" : "eval"; }

inline void write_diagnostics(const Detector& det, const std::vector<ImageSample>& samples, std::size_t count,
                              const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream manifest;
    manifest << "index,source,label,input,reconstruction,ssim_diff,ssim\n";
    for (std::size_t i = 0; i < std::min(count, samples.size()); ++i) {
        const auto& x = samples[i].pixels;
        const auto y = forward_model(det.model, x, Mode::eval);
        std::ostringstream stem;
        stem << std::setw(4) << std::setfill('0') << i;
        const std::string in_name = stem.str() + "_input.pgm", rec_name = stem.str() + "_recon.pgm",
                          diff_name = stem.str() + "_ssim_diff.pgm";
        const auto fix_ext = [&](std::string name) {
            return x.shape().c == 3 ? name.replace(name.size() - 3, 3, "ppm") : name;
        };
        pnm::write(dir / fix_ext(in_name), x);
        pnm::write(dir / fix_ext(rec_name), y);
        std::string ssim_cell = "", diff_cell = "";
        if (x.shape().h >= SsimOptions{}.window && x.shape().w >= SsimOptions{}.window) {
            const auto s = ssim(x, y);
            pnm::write(dir / diff_name, ssim_difference_image(s));
            ssim_cell = csv::fixed(s.score);
            diff_cell = diff_name;
        }
        manifest << i << ',' << csv::quote(samples[i].source_path) << ',' << to_string(samples[i].label) << ','
                 << fix_ext(in_name) << ',' << fix_ext(rec_name) << ',' << diff_cell << ',' << ssim_cell << '\n';
    }
    write_text(dir / "manifest.csv", manifest.str());
}

/// Score the evaluation split of a trained run and write its report files.
inline EvalReport cmd_eval(const RunConfig& rc, std::ostream& log) {
    if (rc.model == ModelKind::dcgan) throw ConfigError("eval needs a detector run; dcgan runs use generate");
    const fs::path ckpt = rc.out / kCheckpointDir;
    if (!fs::exists(ckpt / "detector.txt")) throw DataError("no detector checkpoint in " + ckpt.string());
    const Detector det = load_detector(ckpt);
    if (to_string(det.method) != to_string(rc.model)) {
        throw ConfigError("checkpoint holds a " + std::string(to_string(det.method)) + " model but the config says " +
                          std::string(to_string(rc.model)));
    }
    const auto data = load_run_data(rc);
    for (const auto& w : data.warnings) log << "warning: " << w << '\n';
    std::vector<ImageSample> samples = data.eval;
    const fs::path dir = rc.out / eval_dir_name(rc);
    fs::create_directories(dir);
    write_text(dir / kConfigEcho, format_config(rc));
    if (rc.noise_test) {
        NoiseOptions opt = rc.noise;
        opt.scope = NoiseScope::all;
        auto [noisy, plan] = inject_gaussian_noise(Dataset{data.name, samples, rc.seed}, opt,
                                                   derive_seed(rc.seed, "test-noise"));
        samples = std::move(noisy.samples);
        write_noise_plan(dir / "noise_plan.csv", plan, samples);
        log << "noise injected into " << plan.selected_indices.size() << " of " << samples.size()
            << " evaluation images\n";
    }

    std::vector<ScoredImage> scores;
    auto report = evaluate_detector(det, samples, data.name, rc.seed, &scores);
    save_report(report, dir);
    write_score_dump(dir / "scores_detail.csv", samples, scores);

    std::vector<ScoreGroup> groups{{"good", {}}, {"defect", {}}};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        groups[samples[i].label == Label::good ? 0 : 1].scores.push_back(scores[i].score);
    }
    std::erase_if(groups, [](const ScoreGroup& g) { return g.scores.empty(); });
    const auto hist = score_histogram(groups, rc.histogram_bins);
    write_histogram_csv(hist, dir / "histogram.csv");
    std::optional<double> marker;
    if (det.method == Method::cnn) marker = det.cutoff;
    else if (uses_recon(det.thresholds.rule)) marker = det.thresholds.recon;
    pnm::write(dir / "histogram.pgm", render_histogram(hist, marker));
    if (det.method != Method::cnn && rc.diagnostics > 0) {
        write_diagnostics(det, samples, rc.diagnostics, dir / "diagnostics");
    }

    log << "evaluated " << samples.size() << " images: tp " << report.confusion.tp << " fp " << report.confusion.fp
        << " tn " << report.confusion.tn << " fn " << report.confusion.fn << "  F1 " << csv::fixed(report.f1, 4)
        << "  ROC-AUC " << (report.roc_auc ? csv::fixed(*report.roc_auc, 4) : std::string("undefined")) << '\n';
    log << "report written to " << dir.string() << '\n';
    return report;
}

// ---------------------------------------------------------------- generate

/// Sample `rc.samples` images from a trained dcgan run into <run>/samples.
inline std::size_t cmd_generate(const RunConfig& rc, std::ostream& log) {
    if (rc.model != ModelKind::dcgan) throw ConfigError("generate needs a dcgan run");
    const fs::path ckpt = rc.out / kCheckpointDir;
    if (!fs::exists(ckpt / "generator.anomf")) throw DataError("no generator checkpoint in " + ckpt.string());
    const auto pair = load_gan(ckpt);
    if (pair.generator.tag != "dcgan-g") throw ConfigError("checkpoint in " + ckpt.string() + " is not a dcgan generator");
    const auto batch = generate_samples(pair, rc.samples, derive_seed(rc.seed, "generate"));
    const fs::path dir = rc.out / "samples";
    if (fs::exists(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            const auto ext = e.path().extension();
            if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) fs::remove(e.path());
        }
    }
    fs::create_directories(dir);
    const char* ext = batch.shape().c == 3 ? ".ppm" : ".pgm";
    for (std::size_t i = 0; i < rc.samples; ++i) {
        std::ostringstream name;
        name << std::setw(4) << std::setfill('0') << i << ext;
        pnm::write(dir / name.str(), gather_samples(batch, {i}));
    }
    if (rc.samples > 0) pnm::write(dir / (std::string("sheet") + ext), tile_grid(batch));
    log << "wrote " << rc.samples << " generated images to " << dir.string() << '\n';
    return rc.samples;
}

// ---------------------------------------------------------------- report

struct ReportRow {
    std::string run;
    std::string eval;
    std::string model;
    std::string class_name;
    bool noise_train = false;
    bool noise_test = false;
    EvalReport report;
};

/// One row per evaluated (run, eval directory); incomplete runs are skipped with a warning.
inline std::vector<ReportRow> collect_report_rows(const std::vector<fs::path>& runs, std::ostream& log) {
    std::vector<ReportRow> rows;
    for (const auto& run : runs) {
        bool any = false;
        for (const char* name : {"eval", "eval-noisy"}) {
            const fs::path dir = run / name;
            if (!fs::exists(dir / "summary.csv")) continue;
            try {
                ConfigValues v;
                parse_config_file(dir / kConfigEcho, v);
                const auto rc = resolve_config(v);
                rows.push_back({run.string(), name, std::string(to_string(rc.model)), rc.class_name, rc.noise_train,
                                rc.noise_test, load_report(dir)});
                any = true;
            } catch (const Error& e) {
                log << "warning: skipping " << dir.string() << ": " << e.what() << '\n';
            }
        }
        if (!any) log << "warning: skipping " << run.string() << ": no completed evaluation\n";
    }
    return rows;
}

inline std::string format_report_table(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "run,eval,model,class,noise_train,noise_test,samples,tp,fp,tn,fn,f1,roc_auc,thresholds\n";
    for (const auto& r : rows) {
        std::string th;
        for (const auto& [name, value] : r.report.thresholds) th += (th.empty() ? "" : ";") + name + "=" + csv::exact(value);
        const auto& c = r.report.confusion;
        out << csv::quote(r.run) << ',' << r.eval << ',' << r.model << ',' << csv::quote(r.class_name) << ','
            << (r.noise_train ? "on" : "off") << ',' << (r.noise_test ? "on" : "off") << ',' << r.report.samples.size()
            << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << ',' << csv::fixed(r.report.f1) << ','
            << (r.report.roc_auc ? csv::fixed(*r.report.roc_auc) : "undefined") << ',' << csv::quote(th) << '\n';
    }
    return out.str();
}

inline std::size_t cmd_report(const std::vector<fs::path>& runs, const fs::path& out_csv, std::ostream& log) {
    if (runs.empty()) throw ConfigError("report needs at least one run directory");
    const auto rows = collect_report_rows(runs, log);
    if (rows.empty()) throw DataError("none of the given run directories holds a completed evaluation");
    if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
    write_text(out_csv, format_report_table(rows));
    log << "wrote " << rows.size() << " row(s) to " << out_csv.string() << '\n';
    return rows.size();
}

}  // namespace anomaly::cli
