// Acceptance suite: one PASS/FAIL line per criterion A1..A9. Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "anomaly/cli/commands.hpp"
#include "anomaly/gan/toy.hpp"
#include "anomaly/nn/ops.hpp"
#include "anomaly/nn/serialize.hpp"
#include "gradcheck.hpp"
#include "reference.hpp"
#include "tempdir.hpp"

using namespace anomaly;
using namespace anomaly::cli;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

RunConfig synthetic_config(const std::string& text) {
    ConfigValues v;
    parse_config_text(text, "acceptance", v);
    return resolve_config(v);
}

// ------------------------------------------------------------------ A1

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t instances = 0;
    for (LayerKind kind : {LayerKind::conv2d, LayerKind::conv2d_transpose, LayerKind::maxpool2d, LayerKind::dense,
                           LayerKind::activation, LayerKind::batchnorm, LayerKind::flatten, LayerKind::reshape}) {
        Rng rng(1000 + static_cast<int>(kind));
        for (int trial = 0; trial < 20; ++trial) {
            auto inst = oracle::random_instance(kind, rng);
            worst = std::max(worst, oracle::gradient_check(inst.model, inst.input, inst.target, LossKind::mse, inst.mode)
                                        .worst());
            ++instances;
        }
    }
    Rng rng(2000);
    for (LossKind kind : {LossKind::mse, LossKind::bce}) {
        for (int trial = 0; trial < 20; ++trial) {
            auto pred = oracle::random_tensor<double>({3, 2, 2, 2}, rng, 0.05, 0.95);
            const auto target = oracle::random_tensor<double>({3, 2, 2, 2}, rng, 0.0, 1.0);
            const auto analytic = loss_eval(pred, target, kind).grad;
            const auto numeric = oracle::numeric_gradient(pred, [&] { return loss_eval(pred, target, kind).value; });
            worst = std::max(worst, oracle::max_relative_error(numeric, analytic));
            ++instances;
        }
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-3 && secs < 30.0,
            fmt("8 layer kinds x 20 + 2 losses x 20 = %zu instances, worst relative error %.2e (< 1e-3), %.1f s (< 30 s)",
                instances, worst, secs)};
}

// ------------------------------------------------------------------ A2

double pairwise_auc(const std::vector<double>& s, const std::vector<Label>& l) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (l[i] != Label::defect) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j] != Label::good) continue;
            pairs += 1;
            wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

Outcome formula_suite() {
    Rng rng(3000);
    std::size_t f1_exact = 0;
    double f1_float_gap = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ConfusionCounts c{static_cast<std::uint64_t>(rng.uniform_int(0, 500)),
                                static_cast<std::uint64_t>(rng.uniform_int(0, 500)),
                                static_cast<std::uint64_t>(rng.uniform_int(0, 500)),
                                static_cast<std::uint64_t>(rng.uniform_int(0, 500))};
        // 2PR/(P+R) in exact arithmetic is 2tp/(2tp+fp+fn); zero when tp = 0.
        const double rational = c.tp == 0 ? 0.0 : 2.0 * c.tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
        f1_exact += f1_score(c) == rational;
        const double p = precision(c), r = recall(c);
        const double harmonic = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
        f1_float_gap = std::max(f1_float_gap, std::abs(f1_score(c) - harmonic));
    }

    std::size_t auc_exact = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform_int(0, 60));
        std::vector<double> scores(n);
        std::vector<Label> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            // a coarse lattice so ties occur
            scores[i] = static_cast<double>(rng.uniform_int(0, 12)) / 4.0;
            labels[i] = rng.uniform() < 0.5 ? Label::defect : Label::good;
        }
        labels[0] = Label::defect;
        labels[1] = Label::good;
        auc_exact += roc_auc(scores, labels) == pairwise_auc(scores, labels);
    }

    const std::vector<double> half{0.5};
    const auto l = gan_losses(half, half);
    const double ln2 = std::log(2.0);
    const double gan_err = std::max({std::abs(l.j_d - ln2), std::abs(l.j_g - 0.5 * ln2), std::abs(l.j_g_minimax + ln2)});

    const bool pass = f1_exact == 1000 && auc_exact == 200 && gan_err < 1e-9;
    return {pass, fmt("f1 exact %zu/1000 (float harmonic within %.1e), roc_auc == pairwise oracle %zu/200, "
                      "J_D(0.5) = %.4f, J_G(0.5) = %.4f, max error %.1e (< 1e-9)",
                      f1_exact, f1_float_gap, auc_exact, l.j_d, l.j_g, gan_err)};
}

// ------------------------------------------------------------------ A3

Outcome kd_cae_end_to_end() {
    const auto t0 = Clock::now();
    const auto rc = synthetic_config(
        "model = kd-cae\nseed = 0\nimage-size = 64\ngrayscale = true\nsynth-train = 100\nsynth-test = 40\n"
        "synth-defect-rate = 0.5\nepochs = 100\npatience = 5\nthresholds = calibrate:95\ncombine-rule = or\n");
    const auto data = load_run_data(rc);
    const auto fit = fit_detector(data.train, pipeline_config(rc));
    const auto report = evaluate_detector(fit.detector, data.eval, data.name, rc.seed);
    const double secs = seconds_since(t0);
    const auto& c = report.confusion;
    return {report.f1 >= 0.85 && secs < 600.0,
            fmt("64x64 disks, 100 good / 40 test, seed 0: %zu epochs (best %zu), F1 %.4f (>= 0.85), ROC-AUC %.4f, "
                "tp %llu fp %llu tn %llu fn %llu, %.0f s (< 600 s)",
                fit.history.size(), fit.best_epoch, report.f1, report.roc_auc.value_or(-1.0),
                static_cast<unsigned long long>(c.tp), static_cast<unsigned long long>(c.fp),
                static_cast<unsigned long long>(c.tn), static_cast<unsigned long long>(c.fn), secs)};
}

// ------------------------------------------------------------------ A4

Outcome ni_cae_noise_direction() {
    bool pass = true;
    std::string detail;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const auto rc = synthetic_config("model = ni-cae\nseed = " + std::to_string(seed) +
                                         "\nimage-size = 64\nsynth-train = 100\nsynth-test = 40\n"
                                         "ni-filters = 32,16,16,8,4\nbottleneck = 512\nepochs = 50\n");
        const auto data = load_run_data(rc);
        const auto fit = fit_detector(data.train, pipeline_config(rc));
        const auto clean = evaluate_detector(fit.detector, data.eval, data.name, rc.seed);
        NoiseOptions opt = rc.noise;
        opt.scope = NoiseScope::all;
        const auto noisy_set =
            inject_gaussian_noise(Dataset{data.name, data.eval, rc.seed}, opt, derive_seed(rc.seed, "test-noise")).first;
        const auto noisy = evaluate_detector(fit.detector, noisy_set.samples, data.name, rc.seed);
        pass = pass && noisy.f1 <= clean.f1;
        detail += fmt("%sseed %llu: F1 %.4f -> %.4f with noise", detail.empty() ? "" : "; ",
                      static_cast<unsigned long long>(seed), clean.f1, noisy.f1);
    }
    return {pass, detail + " (noisy <= clean required)"};
}

// ------------------------------------------------------------------ A5

double mae_against(const std::vector<double>& out, const std::function<double(std::size_t)>& truth) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += std::abs(out[i] - truth(i));
    return s / static_cast<double>(out.size());
}

Outcome optimal_discriminator() {
    const auto grid = linear_grid(-4.0, 4.0, 201);
    ToyDiscriminatorConfig cfg;
    cfg.samples_per_side = 100000;
    cfg.seed = 5;

    const ToyDensityPair toy{GaussianMixture({{0.5, -1.5, 0.6}, {0.5, 1.0, 0.8}}), GaussianMixture({{1.0, 0.0, 1.5}})};
    const auto d = train_toy_discriminator(toy, cfg);
    const auto out = evaluate_on_grid(d, grid);
    const double mae = mae_against(out, [&](std::size_t i) { return optimal_discriminator_oracle(toy, grid[i]); });

    const ToyDensityPair same{toy.data, toy.data};
    double oracle_gap = 0.0;
    for (double x : grid) oracle_gap = std::max(oracle_gap, std::abs(optimal_discriminator_oracle(same, x) - 0.5));
    const auto out_same = evaluate_on_grid(train_toy_discriminator(same, cfg), grid);
    const double mae_same = mae_against(out_same, [](std::size_t) { return 0.5; });

    return {mae < 0.05 && oracle_gap == 0.0 && mae_same < 0.05,
            fmt("bimodal data vs N(0,1.5): MAE %.4f over 201 points on [-4,4] (< 0.05); identical densities: oracle "
                "exactly 0.5, trained D MAE vs 0.5 %.4f (< 0.05)",
                mae, mae_same)};
}

// ------------------------------------------------------------------ A6

Outcome dcgan_smoke() {
    const auto rc = synthetic_config("model = dcgan\nseed = 0\nimage-size = 32\nsynth-train = 100\nsteps = 2000\n");
    const auto data = load_run_data(rc);
    const auto images = to_tanh_range(stack_pixels(data.train));
    constexpr std::size_t kCheck = 200;

    auto pair = build_gan(rc.gan);
    std::optional<GanPair> at_check;
    train_gan(pair, images, rc.gan_steps, rc.gan, [&](const GanStep& s) {
        if (s.step == kCheck) at_check = pair;
    });
    const std::size_t tail = std::min<std::size_t>(100, pair.history.size());
    double mean_d = 0.0, d_real = 0.0, d_fake = 0.0;
    for (std::size_t i = pair.history.size() - tail; i < pair.history.size(); ++i) {
        d_real += pair.history[i].mean_d_real / tail;
        d_fake += pair.history[i].mean_d_fake / tail;
    }
    mean_d = 0.5 * (d_real + d_fake);
    const auto batch = generate_samples(pair, 64, 1);
    double mu = 0.0, var = 0.0;
    for (float v : batch.values()) mu += v;
    mu /= static_cast<double>(batch.size());
    for (float v : batch.values()) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / static_cast<double>(batch.size()));

    // Same seed again, stopped at the checkpoint step: parameters, history and samples must match bitwise.
    auto again = build_gan(rc.gan);
    train_gan(again, images, kCheck, rc.gan);
    const bool reproducible = at_check && again == *at_check &&
                              generate_samples(again, 16, 2) == generate_samples(*at_check, 16, 2);

    const bool pass = std::abs(mean_d - 0.5) <= 0.15 && sd > 0.01 && reproducible;
    return {pass, fmt("32x32 disks, 2000 steps: mean D over real+fake (last 100 steps) %.4f (0.5 +- 0.15; D(x) %.4f, "
                      "D(G(z)) %.4f), sample pixel std %.4f (> 0.01), rerun to step %zu bitwise identical: %s",
                      mean_d, d_real, d_fake, sd, kCheck, reproducible ? "yes" : "no")};
}

// ------------------------------------------------------------------ A7

Outcome cnn_sanity() {
    const auto rc = synthetic_config(
        "model = cnn\nseed = 0\nimage-size = 200\ngrayscale = false\nsynth-train = 200\nsynth-test = 40\n"
        "synth-defect-rate = 0.5\nepochs = 12\n");
    const auto data = load_run_data(rc);
    std::size_t defects = 0;
    for (const auto& s : data.train) defects += s.label == Label::defect;
    const auto fit = fit_detector(data.train, pipeline_config(rc));
    const auto report = evaluate_detector(fit.detector, data.eval, data.name, rc.seed);
    return {report.f1 >= 0.8, fmt("200 labeled 200x200x3 images (%zu defect), %zu epochs: test F1 %.4f (>= 0.8), "
                                  "ROC-AUC %.4f",
                                  defects, fit.history.size(), report.f1, report.roc_auc.value_or(-1.0))};
}

// ------------------------------------------------------------------ A8

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome persistence() {
    oracle::TempDir dir;
    std::ostringstream log;
    ConfigValues v;
    parse_config_text("model = kd-cae\nseed = 4\nimage-size = 32\nsynth-train = 30\nsynth-test = 20\nepochs = 5\n"
                      "base-filters = 8\n",
                      "acceptance", v);
    v.values["out"] = (dir.path() / "run").string();
    const auto rc = resolve_config(v);

    // In-memory reference: the same training without touching disk.
    const auto data = load_run_data(rc);
    const auto fit = fit_detector(data.train, pipeline_config(rc));
    const auto in_memory = evaluate_detector(fit.detector, data.eval, data.name, rc.seed);

    cmd_train(rc, log);
    const auto first = cmd_eval(load_run_config(rc.out, {}), log);
    const auto exact = slurp(rc.out / "eval" / "scores_exact.csv");
    const auto second = cmd_eval(load_run_config(rc.out, {}), log);
    const bool metrics_equal = first.f1 == in_memory.f1 && first.roc_auc == in_memory.roc_auc &&
                               first.samples == in_memory.samples && second.samples == first.samples &&
                               slurp(rc.out / "eval" / "scores_exact.csv") == exact;

    const auto model_path = rc.out / "checkpoint" / "model.anomf";
    const auto loaded = load_model(model_path);
    save_model(dir.path() / "again.anomf", loaded);
    const bool file_exact = loaded == fit.detector.model && slurp(model_path) == slurp(dir.path() / "again.anomf");

    return {metrics_equal && file_exact,
            fmt("train -> save -> load -> eval matches the in-memory run bitwise: %s (F1 %.4f, ROC-AUC %.4f); "
                "model file round trip exact: %s",
                metrics_equal ? "yes" : "no", first.f1, first.roc_auc.value_or(-1.0), file_exact ? "yes" : "no")};
}

// ------------------------------------------------------------------ A9

Outcome invariant_suites() {
    std::vector<std::string> failed;

    // noise-plan cardinality
    for (std::size_t k = 1; k <= 500; ++k) {
        Dataset ds{"gray", {}, 0};
        for (std::size_t i = 0; i < k; ++i) ds.samples.push_back({Image(Shape{1, 1, 4, 4}, 0.5f)});
        const auto plan = inject_gaussian_noise(ds, {}, k).second;
        const std::set<std::size_t> unique(plan.selected_indices.begin(), plan.selected_indices.end());
        if (plan.selected_indices.size() != k / 10 || unique.size() != k / 10) {
            failed.push_back(fmt("noise plan K=%zu", k));
            break;
        }
    }

    // SSIM(x, x) = 1
    Rng rng(9000);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = oracle::random_tensor<float>({1, trial % 2 ? 3u : 1u, 24, 19}, rng, 0, 1);
        if (ssim(x, x).score != 1.0) {
            failed.push_back("ssim identity");
            break;
        }
    }

    // KDE integrates to one (trapezoid quadrature in 1-D and on a 2-D grid)
    {
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 30; ++i) pts.push_back({rng.normal(0.0, 2.0)});
        const auto kde = fit_kde(pts);
        const auto grid = linear_grid(-12 - 12 * kde.bandwidth, 12 + 12 * kde.bandwidth, 20001);
        std::vector<double> dens;
        for (double x : grid) dens.push_back(std::exp(kde_log_density(kde, std::vector<double>{x})));
        if (std::abs(trapezoid(grid, dens) - 1.0) > 1e-3) failed.push_back("kde 1-d normalization");

        std::vector<std::vector<double>> pts2;
        for (int i = 0; i < 10; ++i) pts2.push_back({rng.normal(), rng.normal()});
        const auto kde2 = fit_kde(pts2, 0.7);
        const auto g2 = linear_grid(-9, 9, 601);
        std::vector<double> rows;
        for (double y : g2) {
            std::vector<double> row;
            for (double x : g2) row.push_back(std::exp(kde_log_density(kde2, std::vector<double>{x, y})));
            rows.push_back(trapezoid(g2, row));
        }
        if (std::abs(trapezoid(g2, rows) - 1.0) > 1e-3) failed.push_back("kde 2-d normalization");
    }

    // conv / transpose-conv adjointness
    for (int trial = 0; trial < 50;) {
        const std::size_t k = 1 + rng.uniform_int(0, 3), s = 1 + rng.uniform_int(0, 2);
        const std::size_t p = rng.uniform_int(0, static_cast<std::int64_t>(k) - 1);
        const std::size_t cin = 1 + rng.uniform_int(0, 2), cout = 1 + rng.uniform_int(0, 2);
        const std::size_t yh = 2 + rng.uniform_int(0, 3), yw = 2 + rng.uniform_int(0, 3);
        if ((std::min(yh, yw) - 1) * s + k <= 2 * p) continue;  // padding swallows the whole input
        ++trial;
        const std::size_t xh = (yh - 1) * s + k - 2 * p, xw = (yw - 1) * s + k - 2 * p;
        const auto x = oracle::random_tensor<double>({1, cin, xh, xw}, rng);
        const auto y = oracle::random_tensor<double>({1, cout, yh, yw}, rng);
        const auto w = oracle::random_tensor<double>({cout, cin, k, k}, rng);
        const Tensor<double> bc(Shape{cout, 1, 1, 1}), bt(Shape{cin, 1, 1, 1});
        const double lhs = oracle::inner(ops::conv2d_forward(x, w, bc, s, p), y);
        const double rhs = oracle::inner(x, ops::conv2d_transpose_forward(y, w, bt, s, p));
        if (std::abs(lhs - rhs) > 1e-10 * std::max(1.0, std::abs(lhs))) {
            failed.push_back("conv adjointness");
            break;
        }
    }

    // decision monotonicity: raising recon error never clears a defect, raising density never flags a good image
    for (auto rule : {CombineRule::recon_only, CombineRule::kde_only, CombineRule::either, CombineRule::both}) {
        bool ok = true;
        for (int trial = 0; trial < 2000 && ok; ++trial) {
            const ThresholdSet t{rng.uniform(0, 1), rng.uniform(-10, 10), rule};
            const double r = rng.uniform(0, 1), kd = rng.uniform(-10, 10);
            const double r2 = r + rng.uniform(0, 1), kd2 = kd + rng.uniform(0, 10);
            const Label base = decide_anomaly(r, kd, t);
            if (base == Label::defect && decide_anomaly(r2, kd, t) != Label::defect) ok = false;
            if (base == Label::good && decide_anomaly(r, kd2, t) != Label::good) ok = false;
        }
        if (!ok) failed.push_back("decision monotonicity " + std::string(to_string(rule)));
    }

    std::string detail = "noise-plan cardinality K=1..500, SSIM(x,x)=1, KDE normalization (1-D, 2-D), conv adjointness, "
                         "decision monotonicity";
    for (const auto& f : failed) detail += "; FAILED " + f;
    return {failed.empty(), detail};
}

}  // namespace

// Optional arguments pick criteria by id, e.g. `acceptance A2 A9`.
int main(int argc, char** argv) {
    const std::set<std::string> only(argv + 1, argv + argc);
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"A1", gradient_suite},     {"A2", formula_suite}, {"A3", kd_cae_end_to_end},
        {"A4", ni_cae_noise_direction}, {"A5", optimal_discriminator}, {"A6", dcgan_smoke},
        {"A7", cnn_sanity},         {"A8", persistence},   {"A9", invariant_suites},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        if (!only.empty() && !only.contains(name)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %s  %s  [%.1f s]\n", name, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures;
}
