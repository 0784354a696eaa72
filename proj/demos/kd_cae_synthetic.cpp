// Train a small KD-CAE on generated disks and score the test split.
//
//   demo_kd_cae [out_dir]
//
// Writes the SSIM difference map of the worst-scoring test image to out_dir.
#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "anomaly/anomaly.hpp"

using namespace anomaly;

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "demo-kd-cae";
    std::filesystem::create_directories(out);

    SyntheticSpec spec;
    spec.image_size = 32;
    spec.n_train = 60;
    spec.n_test = 20;
    const Dataset ds = generate_synthetic_set(spec);

    PipelineConfig cfg;
    cfg.method = Method::kd_cae;
    cfg.kd_cae = KdCaeConfig{1, 32, 8, 8};
    cfg.train.epochs = 30;
    const auto fit = fit_detector(ds.subset(Split::train).samples, cfg, [](const EpochRecord& e) {
        std::printf("epoch %2zu  train %.5f  val %.5f\n", e.epoch, e.train_loss, e.val_loss.value_or(0.0));
    });

    const auto test = ds.subset(Split::test).samples;
    std::vector<ScoredImage> scores;
    const auto report = evaluate_detector(fit.detector, test, ds.class_name, spec.seed, &scores);
    std::printf("F1 %.3f  ROC-AUC %.3f  (tp %llu fp %llu tn %llu fn %llu)\n", report.f1, report.roc_auc.value_or(0.0),
                static_cast<unsigned long long>(report.confusion.tp),
                static_cast<unsigned long long>(report.confusion.fp),
                static_cast<unsigned long long>(report.confusion.tn),
                static_cast<unsigned long long>(report.confusion.fn));

    const auto worst = std::max_element(scores.begin(), scores.end(),
                                        [](const auto& a, const auto& b) { return a.score < b.score; }) -
                       scores.begin();
    const Image& x = test[worst].pixels;
    const auto recon = forward_model(fit.detector.model, x, Mode::eval);
    pnm::write(out / "input.pgm", x);
    pnm::write(out / "reconstruction.pgm", recon);
    pnm::write(out / "ssim_diff.pgm", ssim_difference_image(ssim(x, recon)));
    std::printf("worst image: %s (%s), written to %s\n", test[worst].source_path.c_str(),
                std::string(to_string(test[worst].label)).c_str(), out.string().c_str());
}
