#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "anomaly/nn/loss.hpp"
#include "anomaly/nn/model.hpp"
#include "anomaly/nn/optimizer.hpp"
#include "anomaly/nn/serialize.hpp"
#include "reference.hpp"

using namespace anomaly;

TEST(ForwardModel, EmptyModelIsIdentity) {
    Rng rng(1);
    auto model = build_model<double>("empty", {1, 2, 3, 3}, {}, 0);
    auto x = oracle::random_tensor<double>({2, 2, 3, 3}, rng);
    EXPECT_EQ(forward_model(model, x, Mode::eval), x);
}

TEST(ForwardModel, DenseIdentityLayer) {
    Rng rng(2);
    auto model = build_model<double>("id", {1, 3, 1, 1}, {Dense{3}}, 0);
    auto& w = model.state[0].params[0];
    w.fill(0.0);
    for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
    auto x = oracle::random_tensor<double>({4, 3, 1, 1}, rng);
    EXPECT_EQ(forward_model(model, x, Mode::eval), x);
}

TEST(ForwardModel, TwoLayerNetMatchesComposedOracles) {
    Rng rng(3);
    auto model = build_model<double>("two", {1, 2, 5, 5}, {Conv2d{3, 3, 3, 1, 0}, Dense{4}}, 11);
    for (auto& st : model.state)
        for (auto& p : st.params)
            for (auto& v : p.storage()) v = rng.uniform(-1, 1);
    auto x = oracle::random_tensor<double>({2, 2, 5, 5}, rng);
    const auto& s0 = model.state[0].params;
    const auto& s1 = model.state[1].params;
    const auto want = oracle::dense(oracle::conv2d(x, s0[0], s0[1], 1, 0), s1[0], s1[1]);
    EXPECT_LT(oracle::max_relative_error(forward_model(model, x, Mode::eval), want), 1e-12);
}

TEST(ForwardModel, ErrorsCarryLayerIndex) {
    // 3x3 input cannot be pooled without an odd-extent policy
    EXPECT_THROW(build_model<float>("bad", {1, 1, 3, 3}, {Conv2d{1, 1, 1, 1, 0}, MaxPool2d{}}, 0), ShapeError);
    try {
        build_model<float>("bad", {1, 1, 3, 3}, {Conv2d{1, 1, 1, 1, 0}, MaxPool2d{}}, 0);
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
    }
    auto model = build_model<float>("m", {1, 1, 4, 4}, {Flatten{}}, 0);
    EXPECT_THROW(forward_model(model, Tensor<float>(Shape{1, 2, 4, 4}), Mode::eval), ShapeError);
}

TEST(Init, SameSeedSameParametersBitwise) {
    const std::vector<LayerSpec> layers{Conv2d{4, 3, 3, 1, 1}, Activation{Act::relu}, Flatten{}, Dense{3},
                                        Activation{Act::sigmoid}};
    const auto a = build_model<float>("m", {1, 2, 6, 6}, layers, 42);
    const auto b = build_model<float>("m", {1, 2, 6, 6}, layers, 42);
    const auto c = build_model<float>("m", {1, 2, 6, 6}, layers, 43);
    EXPECT_EQ(a, b);
    EXPECT_NE(a.state[0].params[0], c.state[0].params[0]);
}

TEST(Init, HeForRectifiedXavierOtherwiseBiasesZero) {
    const auto m = build_model<double>("m", {1, 1, 1, 1},
                                       {Dense{400}, BatchNorm{}, Activation{Act::relu}, Dense{300}, Activation{Act::tanh}},
                                       5);
    const double he = std::sqrt(6.0 / 1.0);
    const double xavier = std::sqrt(6.0 / (400.0 + 300.0));
    double max0 = 0.0, max3 = 0.0;
    for (double v : m.state[0].params[0].values()) max0 = std::max(max0, std::fabs(v));
    for (double v : m.state[3].params[0].values()) max3 = std::max(max3, std::fabs(v));
    EXPECT_LE(max0, he);
    EXPECT_GT(max0, 0.9 * he);
    EXPECT_LE(max3, xavier);
    EXPECT_GT(max3, 0.9 * xavier);
    for (double v : m.state[0].params[1].values()) EXPECT_EQ(v, 0.0);
}

TEST(Optimizer, ZeroGradientLeavesParamsUnchanged) {
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::rmsprop}) {
        auto model = build_model<float>("m", {1, 3, 1, 1}, {Dense{2}}, 9);
        const auto before = model;
        auto opt = make_optimizer<float>(kind, 0.1);
        optimizer_step(opt, model, zero_gradients(model));
        EXPECT_EQ(model, before);
    }
}

TEST(Optimizer, SgdSingleStep) {
    auto model = build_model<double>("m", {1, 1, 1, 1}, {Dense{1}}, 0);
    model.state[0].params[0][0] = 1.0;
    auto grads = zero_gradients(model);
    grads[0][0][0] = 1.0;
    auto opt = make_optimizer<double>(OptimizerKind::sgd, 0.1);
    optimizer_step(opt, model, grads);
    EXPECT_DOUBLE_EQ(model.state[0].params[0][0], 0.9);
}

TEST(Optimizer, RejectsNonPositiveLearningRate) {
    EXPECT_THROW(make_optimizer<float>(OptimizerKind::sgd, 0.0), ConfigError);
    EXPECT_THROW(make_optimizer<float>(OptimizerKind::rmsprop, -1e-3), ConfigError);
    auto model = build_model<float>("m", {1, 1, 1, 1}, {Dense{1}}, 0);
    OptimizerState<float> bad{OptimizerKind::sgd, 0.0};
    EXPECT_THROW(optimizer_step(bad, model, zero_gradients(model)), ConfigError);
}

// f(p) = p^2 minimized from p = 1. The same update rule written out in scalar
// form is the oracle; loss must decrease on every step while |p| is above the
// learning-rate scale, and end below 0.05.
TEST(Optimizer, RmspropMinimizesQuadratic) {
    auto model = build_model<double>("m", {1, 1, 1, 1}, {Dense{1}}, 0);
    double& p = model.state[0].params[0][0];
    p = 1.0;
    auto opt = make_optimizer<double>(OptimizerKind::rmsprop, 0.01);
    double ref_p = 1.0, ref_acc = 0.0;
    double prev_loss = p * p;
    for (int step = 0; step < 200; ++step) {
        auto grads = zero_gradients(model);
        grads[0][0][0] = 2.0 * p;
        optimizer_step(opt, model, grads);
        const double g = 2.0 * ref_p;
        ref_acc = 0.9 * ref_acc + 0.1 * g * g;
        ref_p -= 0.01 * g / std::sqrt(ref_acc + 1e-8);
        EXPECT_NEAR(p, ref_p, 1e-15);
        EXPECT_GE(opt.accumulators[0][0][0], 0.0);
        if (std::fabs(p) > 0.05) EXPECT_LT(p * p, prev_loss) << "step " << step;
        prev_loss = p * p;
    }
    EXPECT_LT(std::fabs(p), 0.05);
}

TEST(Determinism, TrainingStepsAreBitwiseReproducible) {
    auto run = [] {
        Rng rng(77);
        auto model = build_model<float>("m", {1, 1, 6, 6},
                                        {Conv2d{3, 3, 3, 1, 1}, BatchNorm{}, Activation{Act::relu}, MaxPool2d{},
                                         Flatten{}, Dense{1}, Activation{Act::sigmoid}},
                                        123);
        auto opt = make_optimizer<float>(OptimizerKind::rmsprop, 1e-2);
        for (int step = 0; step < 10; ++step) {
            auto x = oracle::random_tensor<float>({4, 1, 6, 6}, rng);
            auto t = oracle::random_tensor<float>({4, 1, 1, 1}, rng, 0.0, 1.0);
            ForwardCache<float> cache;
            const auto y = forward_model(model, x, Mode::train, &cache);
            const auto grads = backward_model(model, cache, loss_eval(y, t, LossKind::bce).grad);
            commit_batch_statistics(model, cache);
            optimizer_step(opt, model, grads.params);
        }
        return model;
    };
    EXPECT_EQ(run(), run());
}

TEST(Serialization, RoundTripIsBitwiseExact) {
    auto model = build_model<float>("kd-cae", {1, 3, 8, 8},
                                    {Conv2d{4, 3, 3, 2, 1}, BatchNorm{0.2, 1e-4}, Activation{Act::leaky_relu},
                                     MaxPool2d{OddPolicy::pad}, Conv2dTranspose{2, 4, 4, 2, 1}, Flatten{}, Dense{6},
                                     Reshape{6, 1, 1}, Activation{Act::tanh}},
                                    0xDEADBEEFCAFEULL, 4);
    model.state[1].buffers[0][2] = -0.125f;
    std::stringstream ss;
    save_model(ss, model);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 6), "ANOMF1");
    std::stringstream in(bytes);
    const auto loaded = load_model(in);
    EXPECT_EQ(loaded, model);
    std::stringstream again;
    save_model(again, loaded);
    EXPECT_EQ(again.str(), bytes);
}

TEST(Serialization, RejectsCorruptFiles) {
    std::stringstream bad("NOTAMODEL");
    EXPECT_THROW(load_model(bad), DataError);
    auto model = build_model<float>("m", {1, 1, 2, 2}, {Flatten{}, Dense{2}}, 1);
    std::stringstream ss;
    save_model(ss, model);
    std::string bytes = ss.str();
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(load_model(truncated), DataError);
}

TEST(Concurrency, FrozenInferenceIsThreadSafe) {
    Rng rng(8);
    const auto model = build_model<float>("m", {1, 1, 16, 16},
                                          {Conv2d{4, 3, 3, 1, 1}, Activation{Act::relu}, MaxPool2d{}, Flatten{},
                                           Dense{3}},
                                          2);
    const auto x = oracle::random_tensor<float>({2, 1, 16, 16}, rng);
    const auto expected = forward_model(model, x, Mode::eval);
    std::vector<Tensor<float>> results(4);
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < results.size(); ++i) {
        threads.emplace_back([&, i] {
            for (int r = 0; r < 20; ++r) results[i] = forward_model(model, x, Mode::eval);
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& r : results) EXPECT_EQ(r, expected);
}
