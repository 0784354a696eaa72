#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "anomaly/core/rng.hpp"
#include "anomaly/data/image.hpp"
#include "anomaly/metrics/csv.hpp"
#include "anomaly/nn/loss.hpp"
#include "anomaly/nn/model.hpp"
#include "anomaly/nn/optimizer.hpp"
#include "anomaly/nn/serialize.hpp"

namespace anomaly {

struct GanConfig {
    std::size_t z_dim = 100;
    std::size_t image_size = 32;  // power of two >= 32
    std::size_t channels = 1;
    std::size_t base_channels = 16;
    std::size_t k = 1;  // discriminator updates per generator update
    std::size_t batch_size = 16;
    double lr_g = 2e-4;
    double lr_d = 2e-4;
    std::uint64_t seed = 0;
};

struct GanStep {
    std::size_t step = 0;  // 1-based generator step
    double j_d = 0.0;
    double j_g = 0.0;
    double mean_d_real = 0.0;
    double mean_d_fake = 0.0;

    bool operator==(const GanStep&) const = default;
};

struct GanPair {
    ModelGraph<float> generator;
    ModelGraph<float> discriminator;
    std::vector<GanStep> history;

    bool operator==(const GanPair&) const = default;
};

struct GanLosses {
    double j_d = 0.0;          // -1/2 mean log d_real - 1/2 mean log(1 - d_fake)
    double j_g = 0.0;          // non-saturating: -1/2 mean log d_fake
    double j_g_minimax = 0.0;  // zero-sum: -j_d
};

inline constexpr double kGanEpsilon = kBceEpsilon;

/// Discriminator and generator costs from discriminator outputs, clamped to [eps, 1-eps].
inline GanLosses gan_losses(std::span<const double> d_real, std::span<const double> d_fake) {
    if (d_real.empty() || d_fake.empty()) throw DataError("gan_losses: empty probability batch");
    const auto clamp = [](double p) { return std::clamp(p, kGanEpsilon, 1.0 - kGanEpsilon); };
    double real = 0.0, fake = 0.0, fool = 0.0;
    for (double p : d_real) real += std::log(clamp(p));
    for (double p : d_fake) {
        fake += std::log(1.0 - clamp(p));
        fool += std::log(clamp(p));
    }
    const double nr = static_cast<double>(d_real.size()), nf = static_cast<double>(d_fake.size());
    GanLosses l;
    l.j_d = -0.5 * real / nr - 0.5 * fake / nf;
    l.j_g = -0.5 * fool / nf;
    l.j_g_minimax = -l.j_d;
    return l;
}

namespace detail {

inline std::size_t gan_doublings(const GanConfig& cfg) {
    if (cfg.image_size < 32 || !std::has_single_bit(cfg.image_size)) {
        throw ConfigError("gan: image size must be a power of two >= 32, got " + std::to_string(cfg.image_size));
    }
    if (cfg.z_dim == 0 || cfg.k == 0 || cfg.channels == 0 || cfg.base_channels == 0 || cfg.batch_size < 2) {
        throw ConfigError("gan: z_dim, k, channels and base_channels must be >= 1 and batch_size >= 2");
    }
    return static_cast<std::size_t>(std::countr_zero(cfg.image_size / 4));
}

}  // namespace detail

/// z -> dense -> 4x4 map -> transpose-conv doublings (batchnorm + relu) -> tanh image.
template <class T = float>
ModelGraph<T> build_generator(const GanConfig& cfg) {
    const std::size_t doublings = detail::gan_doublings(cfg);
    std::size_t width = cfg.base_channels << (doublings - 1);
    std::vector<LayerSpec> layers{Dense{width * 16}, Reshape{width, 4, 4}, BatchNorm{}, Activation{Act::relu}};
    for (std::size_t d = 0; d < doublings; ++d) {
        const bool last = d + 1 == doublings;
        const std::size_t out = last ? cfg.channels : width / 2;
        layers.push_back(Conv2dTranspose{out, 4, 4, 2, 1});
        if (last) {
            layers.push_back(Activation{Act::tanh});
        } else {
            layers.push_back(BatchNorm{});
            layers.push_back(Activation{Act::relu});
        }
        width = out;
    }
    return build_model<T>("dcgan-g", Shape{1, cfg.z_dim, 1, 1}, std::move(layers), derive_seed(cfg.seed, "gan-g"));
}

/// Strided convs halving to 4x4 (leaky relu, batchnorm after the first), then dense 1 + sigmoid.
template <class T = float>
ModelGraph<T> build_discriminator(const GanConfig& cfg) {
    const std::size_t doublings = detail::gan_doublings(cfg);
    std::vector<LayerSpec> layers;
    std::size_t width = cfg.base_channels;
    for (std::size_t d = 0; d < doublings; ++d) {
        layers.push_back(Conv2d{width, 4, 4, 2, 1});
        if (d > 0) layers.push_back(BatchNorm{});
        layers.push_back(Activation{Act::leaky_relu});
        width *= 2;
    }
    layers.push_back(Flatten{});
    layers.push_back(Dense{1});
    layers.push_back(Activation{Act::sigmoid});
    return build_model<T>("dcgan-d", Shape{1, cfg.channels, cfg.image_size, cfg.image_size}, std::move(layers),
                          derive_seed(cfg.seed, "gan-d"));
}

inline GanPair build_gan(const GanConfig& cfg) { return {build_generator(cfg), build_discriminator(cfg), {}}; }

/// Standard-normal latent batch (n, z_dim, 1, 1).
inline Tensor<float> sample_latents(std::size_t n, std::size_t z_dim, Rng& rng) {
    Tensor<float> z(Shape{n, z_dim, 1, 1});
    for (auto& v : z.storage()) v = static_cast<float>(rng.normal());
    return z;
}

/// [0,1] pixels -> [-1,1].
inline Tensor<float> to_tanh_range(const Tensor<float>& x) {
    Tensor<float> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0f * x[i] - 1.0f;
    return y;
}

/// [-1,1] -> [0,1], clamped.
inline Tensor<float> from_tanh_range(const Tensor<float>& x) {
    Tensor<float> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::clamp(0.5f * x[i] + 0.5f, 0.0f, 1.0f);
    return y;
}

namespace detail {

inline Tensor<float> bce_half_grad(const Tensor<float>& d, float target, double& value) {
    auto l = loss_eval(d, Tensor<float>(d.shape(), target), LossKind::bce);
    value = 0.5 * l.value;
    for (auto& g : l.grad.storage()) g *= 0.5f;
    return std::move(l.grad);
}

inline double mean_of(const Tensor<float>& t) {
    double s = 0.0;
    for (float v : t.values()) s += v;
    return s / static_cast<double>(t.size());
}

inline void add_into(Gradients<float>& acc, const Gradients<float>& g) {
    for (std::size_t l = 0; l < acc.size(); ++l)
        for (std::size_t p = 0; p < acc[l].size(); ++p)
            for (std::size_t i = 0; i < acc[l][p].size(); ++i) acc[l][p][i] += g[l][p][i];
}

}  // namespace detail

using GanStepCallback = std::function<void(const GanStep&)>;

/// Alternating training on `images` (already in [-1,1]): k discriminator updates
/// minimizing J_D, then one generator update minimizing the non-saturating
/// J_G. Every generator step appends to `pair.history`. On a non-finite loss
/// the pair is restored to its state before the failing step and NumericError
/// is thrown. Optimizer state starts fresh on every call.
inline void train_gan(GanPair& pair, const Tensor<float>& images, std::size_t steps, const GanConfig& cfg,
                      const GanStepCallback& on_step = {}) {
    if (steps == 0) return;
    const std::size_t n = images.shape().n;
    if (n == 0) throw DataError("train_gan: empty image set");
    const auto& in = pair.discriminator.input;
    if (images.shape().c != in.c || images.shape().h != in.h || images.shape().w != in.w) {
        throw ShapeError("train_gan: images " + images.shape().str() + " do not match the discriminator input");
    }
    const std::size_t batch = cfg.batch_size;
    auto opt_g = make_optimizer<float>(OptimizerKind::rmsprop, cfg.lr_g);
    auto opt_d = make_optimizer<float>(OptimizerKind::rmsprop, cfg.lr_d);
    const std::size_t first = pair.history.size() + 1;

    for (std::size_t step = first; step < first + steps; ++step) {
        const GanPair good_g{pair.generator, pair.discriminator, {}};
        const auto fail = [&](const std::string& what) {
            pair.generator = good_g.generator;
            pair.discriminator = good_g.discriminator;
            throw NumericError("gan training diverged at step " + std::to_string(step) + ": " + what);
        };
        GanStep rec{step};
        for (std::size_t j = 0; j < cfg.k; ++j) {
            Rng rng(cfg.seed, "gan-d-step", step * cfg.k + j);
            std::vector<std::size_t> idx(batch);
            for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
            Tensor<float> real(Shape{batch, in.c, in.h, in.w});
            for (std::size_t b = 0; b < batch; ++b) {
                const auto src = images.sample(idx[b]);
                std::copy(src.begin(), src.end(), real.sample(b).begin());
            }
            const auto fake = forward_model(pair.generator, sample_latents(batch, cfg.z_dim, rng), Mode::train);

            ForwardCache<float> cr, cf;
            const auto d_real = forward_model(pair.discriminator, real, Mode::train, &cr);
            const auto d_fake = forward_model(pair.discriminator, fake, Mode::train, &cf);
            double lr = 0.0, lf = 0.0;
            const auto gr = detail::bce_half_grad(d_real, 1.0f, lr);
            const auto gf = detail::bce_half_grad(d_fake, 0.0f, lf);
            rec.j_d = lr + lf;
            rec.mean_d_real = detail::mean_of(d_real);
            rec.mean_d_fake = detail::mean_of(d_fake);
            if (!std::isfinite(rec.j_d)) fail("discriminator loss is not finite");
            auto grads = backward_model(pair.discriminator, cr, gr).params;
            detail::add_into(grads, backward_model(pair.discriminator, cf, gf).params);
            commit_batch_statistics(pair.discriminator, cr);
            commit_batch_statistics(pair.discriminator, cf);
            optimizer_step(opt_d, pair.discriminator, grads);
        }

        Rng rng(cfg.seed, "gan-g-step", step);
        ForwardCache<float> cg, cd;
        const auto fake = forward_model(pair.generator, sample_latents(batch, cfg.z_dim, rng), Mode::train, &cg);
        const auto d_fake = forward_model(pair.discriminator, fake, Mode::train, &cd);
        double lg = 0.0;
        const auto g_out = detail::bce_half_grad(d_fake, 1.0f, lg);
        rec.j_g = lg;
        if (!std::isfinite(rec.j_g)) fail("generator loss is not finite");
        const auto through_d = backward_model(pair.discriminator, cd, g_out);
        const auto g_grads = backward_model(pair.generator, cg, through_d.input);
        commit_batch_statistics(pair.generator, cg);
        optimizer_step(opt_g, pair.generator, g_grads.params);
        for (const auto& st : pair.generator.state)
            for (const auto& p : st.params)
                for (float v : p.values())
                    if (!std::isfinite(v)) fail("generator parameters are not finite");

        pair.history.push_back(rec);
        if (on_step) on_step(rec);
    }
}

/// n generator samples in [0,1] (eval-mode batchnorm), reproducible from `seed`.
inline Tensor<float> generate_samples(const GanPair& pair, std::size_t n, std::uint64_t seed) {
    const auto& out = pair.discriminator.input;
    if (n == 0) return Tensor<float>(Shape{0, out.c, out.h, out.w});
    Rng rng(seed, "gan-sample");
    const auto z = sample_latents(n, pair.generator.input.c, rng);
    return from_tanh_range(forward_model(pair.generator, z, Mode::eval));
}

/// Tile a batch into a near-square grid sheet with a 2-pixel gap.
inline Image tile_grid(const Tensor<float>& batch, float gap_value = 1.0f) {
    const Shape& s = batch.shape();
    if (s.n == 0) throw DataError("tile_grid: empty batch");
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s.n))));
    const std::size_t rows = (s.n + cols - 1) / cols, gap = 2;
    Image sheet(Shape{1, s.c, rows * s.h + (rows - 1) * gap, cols * s.w + (cols - 1) * gap}, gap_value);
    for (std::size_t i = 0; i < s.n; ++i) {
        const std::size_t oy = (i / cols) * (s.h + gap), ox = (i % cols) * (s.w + gap);
        for (std::size_t c = 0; c < s.c; ++c)
            for (std::size_t y = 0; y < s.h; ++y)
                for (std::size_t x = 0; x < s.w; ++x) sheet(0, c, oy + y, ox + x) = batch(i, c, y, x);
    }
    return sheet;
}

inline void write_gan_history(const std::filesystem::path& path, const std::vector<GanStep>& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "step,j_d,j_g,mean_d_real,mean_d_fake\n";
    for (const auto& h : history) {
        out << h.step << ',' << csv::exact(h.j_d) << ',' << csv::exact(h.j_g) << ',' << csv::exact(h.mean_d_real) << ','
            << csv::exact(h.mean_d_fake) << '\n';
    }
}

inline std::vector<GanStep> read_gan_history(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing " + path.string());
    std::vector<GanStep> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv::split_record(line);
        if (f.size() != 5) throw DataError(path.string() + ": malformed history row '" + line + "'");
        out.push_back({static_cast<std::size_t>(std::stoull(f[0])), csv::parse_double(f[1]), csv::parse_double(f[2]),
                       csv::parse_double(f[3]), csv::parse_double(f[4])});
    }
    return out;
}

/// generator.anomf, discriminator.anomf and history.csv.
inline void save_gan(const GanPair& pair, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_model(dir / "generator.anomf", pair.generator);
    save_model(dir / "discriminator.anomf", pair.discriminator);
    write_gan_history(dir / "history.csv", pair.history);
}

inline GanPair load_gan(const std::filesystem::path& dir) {
    GanPair pair{load_model(dir / "generator.anomf"), load_model(dir / "discriminator.anomf"), {}};
    if (std::filesystem::exists(dir / "history.csv")) pair.history = read_gan_history(dir / "history.csv");
    return pair;
}

}  // namespace anomaly
