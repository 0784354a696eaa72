#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <type_traits>
#include <vector>

#include "anomaly/core/rng.hpp"
#include "anomaly/nn/loss.hpp"
#include "anomaly/nn/model.hpp"
#include "anomaly/nn/optimizer.hpp"

namespace anomaly {

/// Patience counter over validation losses. An epoch improves only when its
/// loss is strictly below the best so far.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Record the loss of the next epoch (1-based); true once `patience`
    /// consecutive epochs have failed to improve.
    bool update(double val_loss) {
        ++epoch_;
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            since_best_ = 0;
            return false;
        }
        ++since_best_;
        return patience_ > 0 && since_best_ >= patience_;
    }

    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    OptimizerKind optimizer = OptimizerKind::rmsprop;
    double learning_rate = 1e-3;
    LossKind loss = LossKind::mse;
    std::size_t patience = 5;  // 0 disables early stopping
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<double> val_loss;
    double seconds = 0.0;
};

template <class T>
struct TrainResult {
    ModelGraph<T> model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;  // 0 when no validation set was given
    bool stopped_early = false;
};

/// Copy the listed samples of a batch into a new batch, in the given order.
template <class T>
Tensor<T> gather_samples(const Tensor<T>& batch, const std::vector<std::size_t>& indices) {
    const Shape& s = batch.shape();
    Tensor<T> out(Shape{indices.size(), s.c, s.h, s.w});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = batch.sample(indices[i]);
        std::copy(src.begin(), src.end(), out.sample(i).begin());
    }
    return out;
}

/// Mean loss of `model` over (inputs, targets) in eval mode, evaluated in batches.
template <class T>
double evaluate_loss(const ModelGraph<T>& model, const Tensor<T>& inputs, const Tensor<T>& targets, LossKind loss,
                     std::size_t batch_size = 32) {
    const std::size_t n = inputs.shape().n;
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t count = std::min(batch_size, n - start);
        std::vector<std::size_t> idx(count);
        std::iota(idx.begin(), idx.end(), start);
        const auto x = gather_samples(inputs, idx);
        const auto y = forward_model(model, x, Mode::eval);
        total += loss_eval(y, gather_samples(targets, idx), loss).value * static_cast<double>(count);
    }
    return total / static_cast<double>(n);
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training. Batches are drawn from a per-epoch shuffle derived from
/// `cfg.seed`. With a validation set and patience > 0 the returned model is the
/// snapshot with the lowest validation loss. A non-finite loss aborts with
/// NumericError.
template <class T>
TrainResult<T> train_model(ModelGraph<T> model, const Tensor<T>& inputs, const Tensor<T>& targets,
                           const std::type_identity_t<Tensor<T>>* val_inputs,
                           const std::type_identity_t<Tensor<T>>* val_targets, const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {}) {
    const std::size_t n = inputs.shape().n;
    if (n == 0) throw DataError("train: empty training set");
    if (targets.shape().n != n) throw ShapeError("train: inputs and targets differ in sample count");
    if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if ((val_inputs == nullptr) != (val_targets == nullptr)) {
        throw ConfigError("train: validation inputs and targets must be given together");
    }
    const bool validate = val_inputs != nullptr && val_inputs->shape().n > 0;
    const bool stopping = validate && cfg.patience > 0;

    auto opt = make_optimizer<T>(cfg.optimizer, cfg.learning_rate);
    EarlyStopping stopper(cfg.patience);
    TrainResult<T> result{model, {}, 0, false};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle(cfg.seed, "batches", epoch);
        std::shuffle(order.begin(), order.end(), shuffle);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            // a lone trailing sample cannot form batch statistics
            if (count < 2 && n >= 2 && count_layers(model, LayerKind::batchnorm) > 0) continue;
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(start + count));
            const auto x = gather_samples(inputs, idx);
            const auto t = gather_samples(targets, idx);
            ForwardCache<T> cache;
            const auto y = forward_model(model, x, Mode::train, &cache);
            const auto l = loss_eval(y, t, cfg.loss);
            if (!std::isfinite(l.value)) {
                throw NumericError("training diverged: loss " + std::to_string(l.value) + " at epoch " +
                                   std::to_string(epoch) + ", batch starting at sample " + std::to_string(start));
            }
            loss_sum += l.value * static_cast<double>(count);
            seen += count;
            const auto grads = backward_model(model, cache, l.grad);
            commit_batch_statistics(model, cache);
            optimizer_step(opt, model, grads.params);
        }
        EpochRecord rec{epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0, std::nullopt, 0.0};
        bool stop = false;
        if (validate) {
            rec.val_loss = evaluate_loss(model, *val_inputs, *val_targets, cfg.loss);
            if (!std::isfinite(*rec.val_loss)) {
                throw NumericError("training diverged: validation loss is not finite at epoch " +
                                   std::to_string(epoch));
            }
            stop = stopper.update(*rec.val_loss);
            if (stopper.best_epoch() == epoch) result.model = model;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (stopping && stop) {
            result.stopped_early = true;
            break;
        }
    }
    if (stopping) {
        result.best_epoch = stopper.best_epoch();
        if (result.best_epoch == 0) result.model = model;
    } else {
        result.best_epoch = validate ? stopper.best_epoch() : 0;
        result.model = std::move(model);
    }
    return result;
}

}  // namespace anomaly
