#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "anomaly/data/loader.hpp"
#include "anomaly/data/manifest.hpp"
#include "anomaly/data/noise.hpp"
#include "anomaly/data/preprocess.hpp"
#include "anomaly/data/split.hpp"
#include "anomaly/data/synthetic.hpp"
#include "tempdir.hpp"

using namespace anomaly;

namespace {

void write_gray(const std::filesystem::path& p, std::size_t side, float v) {
    std::filesystem::create_directories(p.parent_path());
    pnm::write(p, Image(Shape{1, 1, side, side}, v));
}

Dataset gray_dataset(std::size_t k, float v = 0.5f, std::size_t side = 8) {
    Dataset ds{"gray", {}, 0};
    for (std::size_t i = 0; i < k; ++i) {
        ds.samples.push_back({Image(Shape{1, 1, side, side}, v), Label::good, "good", Split::train,
                              "s" + std::to_string(i)});
    }
    return ds;
}

bool all_in_unit_range(const Dataset& ds) {
    for (const auto& s : ds.samples)
        for (float v : s.pixels.values())
            if (!(v >= 0.0f && v <= 1.0f)) return false;
    return true;
}

}  // namespace

// ---------------------------------------------------------------- loader

TEST(Loader, MvtecLayoutLabelsAndOrder) {
    oracle::TempDir root;
    const auto cls = root.path() / "widget";
    write_gray(cls / "train/good/002.pgm", 4, 0.2f);
    write_gray(cls / "train/good/001.pgm", 4, 0.1f);
    write_gray(cls / "test/good/000.pgm", 4, 0.3f);
    write_gray(cls / "test/crack/000.pgm", 4, 0.4f);
    write_gray(cls / "test/bent/000.pgm", 4, 0.5f);
    oracle::write_bytes(cls / "test/bent/broken.pgm", "P5\n4 4\n255\n");
    std::filesystem::create_directories(cls / "ground_truth/crack");

    LoadReport report;
    const Dataset ds = load_image_dir(root.path(), "widget", &report);
    ASSERT_EQ(ds.samples.size(), 5u);
    EXPECT_EQ(ds.class_name, "widget");
    EXPECT_EQ(report.warnings.size(), 1u);
    EXPECT_NE(report.warnings[0].find("broken.pgm"), std::string::npos);

    const std::vector<std::string> kinds = {"good", "good", "bent", "crack", "good"};
    const std::vector<float> values = {0.1f, 0.2f, 0.5f, 0.4f, 0.3f};
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        EXPECT_EQ(s.defect_kind, kinds[i]);
        EXPECT_EQ(s.split, i < 2 ? Split::train : Split::test);
        EXPECT_EQ(s.label, kinds[i] == "good" ? Label::good : Label::defect);
        EXPECT_NEAR(s.pixels[0], values[i], 0.5 / 255 + 1e-6);
    }
}

TEST(Loader, OneGoodOneDefectTestImage) {
    oracle::TempDir root;
    write_gray(root / "c/train/good/a.pgm", 2, 0.5f);
    write_gray(root / "c/test/good/a.pgm", 2, 0.5f);
    write_gray(root / "c/test/hole/a.pgm", 2, 0.1f);
    const auto test = load_image_dir(root.path(), "c").subset(Split::test);
    ASSERT_EQ(test.samples.size(), 2u);
    EXPECT_EQ(std::count_if(test.samples.begin(), test.samples.end(),
                            [](const auto& s) { return s.label == Label::defect; }),
              1);
}

TEST(Loader, Errors) {
    oracle::TempDir root;
    EXPECT_THROW(load_image_dir(root.path(), "absent"), DataError);
    std::filesystem::create_directories(root / "c/train/good");
    std::filesystem::create_directories(root / "c/test/good");
    try {
        load_image_dir(root.path(), "c");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("no training images"), std::string::npos);
    }
    oracle::write_bytes(root / "c/train/good/junk.pgm", "junk");
    EXPECT_THROW(load_image_dir(root.path(), "c"), DataError);  // nothing decodable
}

TEST(Loader, NeverLabelsTrainSamplesDefect) {
    oracle::TempDir root;
    Rng rng(4);
    for (int i = 0; i < 6; ++i) write_gray(root / ("c/train/good/" + std::to_string(i) + ".pgm"), 3, 0.5f);
    for (const char* kind : {"good", "scratch", "dent"})
        write_gray(root / ("c/test/" + std::string(kind) + "/x.pgm"), 3, 0.5f);
    for (const auto& s : load_image_dir(root.path(), "c").samples) {
        if (s.split == Split::train) EXPECT_EQ(s.label, Label::good);
    }
}

// ---------------------------------------------------------------- preprocess

TEST(Preprocess, ConstantGrayKeepsItsValue) {
    const Image img(Shape{1, 1, 1024, 1024}, 0.37f);
    const Image out = preprocess_image(img, 128, true);
    EXPECT_EQ(out.shape(), (Shape{1, 1, 128, 128}));
    for (float v : out.values()) EXPECT_EQ(v, 0.37f);
}

TEST(Preprocess, LuminanceWeights) {
    Image red(Shape{1, 3, 1, 1}, std::vector<float>{1, 0, 0});
    EXPECT_FLOAT_EQ(to_grayscale(red)[0], 0.299f);
    Image green(Shape{1, 3, 1, 1}, std::vector<float>{0, 1, 0});
    EXPECT_FLOAT_EQ(to_grayscale(green)[0], 0.587f);
    Image blue(Shape{1, 3, 1, 1}, std::vector<float>{0, 0, 1});
    EXPECT_FLOAT_EQ(to_grayscale(blue)[0], 0.114f);
}

TEST(Preprocess, CheckerboardBlockMean) {
    Image board(Shape{1, 1, 4, 4});
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) board(0, 0, y, x) = static_cast<float>((x + y) % 2);
    const Image out = resize_square(board, 2);
    for (float v : out.values()) EXPECT_EQ(v, 0.5f);
}

TEST(Preprocess, BilinearPreservesLinearRamp) {
    // Bilinear interpolation reproduces an affine function exactly at interior sample points.
    const std::size_t src = 100, dst = 64;
    Image ramp(Shape{1, 1, src, src});
    for (std::size_t y = 0; y < src; ++y)
        for (std::size_t x = 0; x < src; ++x) ramp(0, 0, y, x) = static_cast<float>(x) / (src - 1);
    const Image out = resize_square(ramp, dst);
    const double scale = static_cast<double>(src) / dst;
    for (std::size_t x = 0; x < dst; ++x) {
        const double sx = std::clamp((x + 0.5) * scale - 0.5, 0.0, double(src - 1));
        EXPECT_NEAR(out(0, 0, 7, x), sx / (src - 1), 1e-6);
    }
}

TEST(Preprocess, CenterCropAndUpscaleRefusal) {
    Image wide(Shape{1, 1, 2, 4}, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7});
    const Image sq = center_crop_square(wide);
    EXPECT_EQ(sq, Image(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 5, 6}));
    EXPECT_THROW(resize_square(Image(Shape{1, 1, 64, 64}), 128), DataError);
    Dataset ds = gray_dataset(1, 0.5f, 64);
    EXPECT_THROW(preprocess(ds, 128, true), DataError);
}

TEST(Preprocess, IdempotentAtTargetSize) {
    Rng rng(5);
    for (std::size_t src : {64u, 96u, 100u, 130u}) {
        for (std::size_t dst : {16u, 32u, 64u}) {
            Dataset ds{"r", {}, 0};
            Image img(Shape{1, 3, src, src + 6});
            for (auto& v : img.storage()) v = static_cast<float>(rng.uniform());
            ds.samples.push_back({img, Label::good, "good", Split::train, "x"});
            for (bool gray : {true, false}) {
                const Dataset once = preprocess(ds, dst, gray);
                EXPECT_EQ(preprocess(once, dst, gray), once);
                EXPECT_TRUE(all_in_unit_range(once));
            }
        }
    }
}

// ---------------------------------------------------------------- noise

TEST(Noise, SixtySamplesGetSixNoised) {
    const Dataset ds = gray_dataset(60);
    const auto [noisy, plan] = inject_gaussian_noise(ds, {}, 7);
    EXPECT_EQ(plan.selected_indices.size(), 6u);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < 60; ++i) {
        const bool selected = std::binary_search(plan.selected_indices.begin(), plan.selected_indices.end(), i);
        if (selected) {
            EXPECT_NE(noisy.samples[i].pixels, ds.samples[i].pixels);
        } else {
            EXPECT_EQ(noisy.samples[i], ds.samples[i]);
        }
        changed += noisy.samples[i] == ds.samples[i] ? 0 : 1;
    }
    EXPECT_EQ(changed, 6u);
}

TEST(Noise, ZeroFractionLeavesDatasetUnchanged) {
    const Dataset ds = gray_dataset(25);
    NoiseOptions opt;
    opt.fraction = 0.0;
    const auto [noisy, plan] = inject_gaussian_noise(ds, opt, 1);
    EXPECT_TRUE(plan.selected_indices.empty());
    EXPECT_EQ(noisy, ds);
}

TEST(Noise, CardinalityIsFloorOfTenthForAllK) {
    for (std::size_t k = 1; k <= 500; ++k) {
        const Dataset ds = gray_dataset(k, 0.5f, 1);
        const auto [noisy, plan] = inject_gaussian_noise(ds, {}, k);
        ASSERT_EQ(plan.selected_indices.size(), k / 10) << "K=" << k;
        std::set<std::size_t> unique(plan.selected_indices.begin(), plan.selected_indices.end());
        ASSERT_EQ(unique.size(), plan.selected_indices.size());
        if (!unique.empty()) ASSERT_LT(*unique.rbegin(), k);
        ASSERT_TRUE(all_in_unit_range(noisy));
    }
}

TEST(Noise, MeanAbsolutePerturbationMatchesMonteCarlo) {
    // Oracle: E|N(0, 0.001)| estimated with an independent generator over 1e5 draws.
    std::mt19937_64 gen(12345);
    std::normal_distribution<double> normal(0.0, std::sqrt(0.001));
    double acc = 0.0;
    for (int i = 0; i < 100000; ++i) acc += std::fabs(normal(gen));
    const double expected = acc / 100000;
    EXPECT_NEAR(expected, std::sqrt(0.001) * std::sqrt(2.0 / std::numbers::pi), 0.001);

    const Dataset ds = gray_dataset(10, 0.5f, 100);
    const auto [noisy, plan] = inject_gaussian_noise(ds, {}, 3);
    ASSERT_EQ(plan.selected_indices.size(), 1u);
    const auto& a = noisy.samples[plan.selected_indices[0]].pixels;
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::fabs(a[i] - 0.5);
    diff /= static_cast<double>(a.size());
    EXPECT_NEAR(diff, expected, 0.2 * expected);
}

TEST(Noise, TrainOnlyByDefaultAllOnRequest) {
    Dataset ds = gray_dataset(20);
    for (std::size_t i = 10; i < 20; ++i) ds.samples[i].split = Split::test;
    const auto [train_only, p1] = inject_gaussian_noise(ds, {}, 9);
    EXPECT_EQ(p1.selected_indices.size(), 1u);
    for (std::size_t i : p1.selected_indices) EXPECT_LT(i, 10u);
    NoiseOptions all;
    all.scope = NoiseScope::all;
    EXPECT_EQ(inject_gaussian_noise(ds, all, 9).second.selected_indices.size(), 2u);
    NoiseOptions bad;
    bad.fraction = 1.5;
    EXPECT_THROW(inject_gaussian_noise(ds, bad, 9), ConfigError);
}

TEST(Noise, ClampsToUnitRange) {
    NoiseOptions opt;
    opt.fraction = 1.0;
    opt.variance = 1.0;
    const auto [noisy, plan] = inject_gaussian_noise(gray_dataset(5, 0.99f), opt, 2);
    EXPECT_EQ(plan.selected_indices.size(), 5u);
    EXPECT_TRUE(all_in_unit_range(noisy));
}

// ---------------------------------------------------------------- synthetic

TEST(Synthetic, CountsLabelsAndRange) {
    SyntheticSpec spec;
    spec.seed = 11;
    const Dataset ds = generate_synthetic_set(spec);
    EXPECT_EQ(ds.count(Split::train), 100u);
    EXPECT_EQ(ds.count(Split::test), 40u);
    std::size_t defects = 0;
    for (const auto& s : ds.samples) {
        EXPECT_EQ(s.pixels.shape(), (Shape{1, 1, 64, 64}));
        if (s.split == Split::train) EXPECT_EQ(s.label, Label::good);
        defects += s.label == Label::defect ? 1 : 0;
    }
    EXPECT_EQ(defects, 20u);
    EXPECT_TRUE(all_in_unit_range(ds));
}

TEST(Synthetic, ZeroDefectRateGivesAllGood) {
    SyntheticSpec spec;
    spec.defect_rate = 0.0;
    spec.n_train = 3;
    spec.n_test = 12;
    for (const auto& s : generate_synthetic_set(spec).samples) EXPECT_EQ(s.label, Label::good);
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticSpec spec;
    spec.n_train = 5;
    spec.n_test = 6;
    spec.shape = ShapeKind::rect;
    spec.channels = 3;
    spec.seed = 99;
    EXPECT_EQ(generate_synthetic_set(spec), generate_synthetic_set(spec));
    SyntheticSpec other = spec;
    other.seed = 100;
    EXPECT_NE(generate_synthetic_set(spec), generate_synthetic_set(other));
}

TEST(Synthetic, DefectDifferenceIsLocalizedToItsBoundingBox) {
    for (ShapeKind shape : {ShapeKind::disk, ShapeKind::rect}) {
        SyntheticSpec spec;
        spec.shape = shape;
        spec.defect_rate = 1.0;
        spec.n_train = 1;
        spec.n_test = 30;
        spec.seed = 5;
        for (const auto& item : plan_synthetic(spec)) {
            if (!item.defect) continue;
            const Image clean = render_synthetic(item.object, std::nullopt, spec.image_size);
            const Image bad = render_synthetic(item.object, item.defect, spec.image_size);
            const BoundingBox box = item.defect->bbox(spec.image_size);
            double inside = 0.0;
            for (std::size_t y = 0; y < spec.image_size; ++y)
                for (std::size_t x = 0; x < spec.image_size; ++x) {
                    const double d = std::fabs(bad(0, 0, y, x) - clean(0, 0, y, x));
                    if (box.contains(x, y)) {
                        inside += d;
                    } else {
                        EXPECT_EQ(d, 0.0);
                    }
                }
            EXPECT_GT(inside, 0.0);
            EXPECT_GE(item.defect->width, 3.0);
        }
    }
}

TEST(Synthetic, RejectsBadSpecs) {
    SyntheticSpec spec;
    spec.image_size = 8;
    EXPECT_THROW(generate_synthetic_set(spec), ConfigError);
    spec = {};
    spec.n_test = 0;
    EXPECT_THROW(generate_synthetic_set(spec), ConfigError);
    spec = {};
    spec.defect_rate = -0.1;
    EXPECT_THROW(generate_synthetic_set(spec), ConfigError);
}

// ---------------------------------------------------------------- split

TEST(Split, TenSamplesTwentyPercent) {
    const auto [train, val] = split_validation(gray_dataset(10), 0.2, 1);
    EXPECT_EQ(train.samples.size(), 8u);
    EXPECT_EQ(val.samples.size(), 2u);
}

TEST(Split, UnionIsOriginalMultiset) {
    const Dataset ds = gray_dataset(17);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto [train, val] = split_validation(ds, 0.3, seed);
        std::multiset<std::string> got, want;
        for (const auto& s : train.samples) got.insert(s.source_path);
        for (const auto& s : val.samples) got.insert(s.source_path);
        for (const auto& s : ds.samples) want.insert(s.source_path);
        EXPECT_EQ(got, want);
        EXPECT_EQ(split_validation(ds, 0.3, seed).second, val);
    }
}

TEST(Split, DifferentSeedsGiveDistinctPartitions) {
    const Dataset ds = gray_dataset(20);
    std::set<std::set<std::string>> partitions;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::set<std::string> val;
        for (const auto& s : split_validation(ds, 0.2, seed).second.samples) val.insert(s.source_path);
        partitions.insert(val);
    }
    EXPECT_GE(partitions.size(), 95u);
}

TEST(Split, Errors) {
    EXPECT_THROW(split_validation(gray_dataset(1), 0.5, 0), DataError);
    EXPECT_THROW(split_validation(gray_dataset(5), 0.0, 0), ConfigError);
    EXPECT_THROW(split_validation(gray_dataset(5), 1.0, 0), ConfigError);
    const auto [train, val] = split_validation(gray_dataset(2), 0.01, 0);
    EXPECT_EQ(val.samples.size(), 1u);
}

// ---------------------------------------------------------------- manifest cache

TEST(Manifest, RoundTripThroughPgmCache) {
    oracle::TempDir dir;
    SyntheticSpec spec;
    spec.n_train = 4;
    spec.n_test = 4;
    spec.image_size = 16;
    const Dataset ds = generate_synthetic_set(spec);
    save_dataset_cache(ds, dir.path());
    EXPECT_EQ(oracle::read_bytes(dir / "manifest.csv").substr(0, 29), "path,label,defect_kind,split\n");
    const Dataset back = load_dataset_cache(dir.path());
    ASSERT_EQ(back.samples.size(), ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
        EXPECT_EQ(back.samples[i].split, ds.samples[i].split);
        EXPECT_EQ(back.samples[i].defect_kind, ds.samples[i].defect_kind);
        for (std::size_t p = 0; p < ds.samples[i].pixels.size(); ++p)
            EXPECT_NEAR(back.samples[i].pixels[p], ds.samples[i].pixels[p], 0.5 / 255 + 1e-7);
    }
    // a second save of the quantized data is a fixed point
    oracle::TempDir again;
    save_dataset_cache(back, again.path());
    EXPECT_EQ(load_dataset_cache(again.path()).samples[3].pixels, back.samples[3].pixels);
}
