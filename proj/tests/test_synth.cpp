#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "eeg2vec/synth.hpp"

using namespace eeg2vec;

namespace {

using Model = Eeg2Vec<float>;

ModelConfig mini() { return ModelConfig::miniature(); }

Model mini_model() { return Model(mini(), 5); }

std::vector<Trial> real_set(std::size_t n) {
    const auto c = mini();
    Rng rng(3);
    std::vector<Trial> out;
    for (std::size_t i = 0; i < n; ++i) {
        Trial t;
        t.id = "real-" + std::to_string(i);
        // 50% class 0, 30% class 1, 20% class 2; participants alternate.
        t.y = i % 10 < 5 ? 0 : (i % 10 < 8 ? 1 : 2);
        t.p = static_cast<int>(i % c.P);
        t.fs = 200.0;
        t.x = Matrix<float>(c.C, c.T);
        for (auto& v : t.x.data()) v = static_cast<float>(rng.uniform());
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

TEST(GenerateFromPrior, LabelsShapeAndRange) {
    const auto m = mini_model();
    GenerationRequest req;
    req.y_target = 2;
    req.p_target = 1;
    req.count = 10;
    req.seed = 11;
    const auto out = generate_from_prior(req, m);
    ASSERT_EQ(out.size(), 10u);
    std::set<std::string> ids;
    for (const auto& t : out) {
        EXPECT_EQ(t.y, 2);
        EXPECT_EQ(t.p, 1);
        EXPECT_TRUE(t.synthetic);
        EXPECT_EQ(t.x.rows(), mini().C);
        EXPECT_EQ(t.x.cols(), mini().T);
        for (float v : t.x.data()) {
            EXPECT_GT(v, 0.0f);
            EXPECT_LT(v, 1.0f);
        }
        ids.insert(t.id);
    }
    EXPECT_EQ(ids.size(), 10u);
}

TEST(GenerateFromPrior, SameSeedSameSamples) {
    const auto m = mini_model();
    GenerationRequest req;
    req.count = 3;
    req.seed = 4;
    const auto a = generate_from_prior(req, m);
    const auto b = generate_from_prior(req, m);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a[i].x.data(), b[i].x.data());
    req.seed = 5;
    const auto c = generate_from_prior(req, m);
    EXPECT_NE(a[0].x.data(), c[0].x.data());
}

TEST(GenerateFromPrior, RejectsBadRequests) {
    const auto m = mini_model();
    GenerationRequest req;
    req.y_target = 3;
    EXPECT_THROW(generate_from_prior(req, m), Error);
    req = {};
    req.p_target = -1;
    EXPECT_THROW(generate_from_prior(req, m), Error);
    req = {};
    req.count = 0;
    EXPECT_THROW(generate_from_prior(req, m), Error);
    req = {};
    req.mode = GenerationMode::from_reference;
    req.reference_ids = {"x"};
    EXPECT_THROW(generate_from_prior(req, m), Error);
}

TEST(GenerateFromReference, SwapsLabels) {
    const auto m = mini_model();
    const auto real = real_set(1);
    Rng rng(8);
    const auto t = generate_from_reference(real[0], 1, 0, m, rng);
    EXPECT_EQ(t.y, 1);
    EXPECT_EQ(t.p, 0);
    EXPECT_TRUE(t.synthetic);
    EXPECT_NE(t.id, real[0].id);
    EXPECT_THROW(generate_from_reference(real[0], 5, 0, m, rng), Error);
}

TEST(Apportion, LargestRemainder) {
    EXPECT_EQ(apportion(20, {50, 30, 20}), (std::vector<std::size_t>{10, 6, 4}));
    EXPECT_EQ(apportion(1, {1, 1, 1}), (std::vector<std::size_t>{1, 0, 0}));
    EXPECT_EQ(apportion(5, {1, 1}), (std::vector<std::size_t>{3, 2}));
    EXPECT_EQ(apportion(0, {3, 4}), (std::vector<std::size_t>{0, 0}));
    EXPECT_EQ(apportion(4, {0, 0}), (std::vector<std::size_t>{0, 0}));
    const std::vector<std::size_t> w{7, 13, 1, 29};
    const auto out = apportion(17, w);
    EXPECT_EQ(std::accumulate(out.begin(), out.end(), std::size_t{0}), 17u);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(17.0 * w[i] / 50.0 - static_cast<double>(out[i])), 1.0);
}

TEST(AugmentedSet, ZeroFractionIsTheRealSet) {
    const auto real = real_set(30);
    const auto a = build_augmented_set(real, 0.0, mini_model(), 1);
    EXPECT_EQ(a.n_real, 30u);
    EXPECT_EQ(a.n_synthetic, 0u);
    ASSERT_EQ(a.trials.size(), 30u);
    std::set<std::string> ids;
    for (const auto& t : a.trials) ids.insert(t.id);
    for (const auto& t : real) EXPECT_TRUE(ids.contains(t.id));
}

TEST(AugmentedSet, SizesAndClassProportions) {
    const auto real = real_set(100);
    const auto a = build_augmented_set(real, 0.2, mini_model(), 1);
    EXPECT_EQ(a.trials.size(), 120u);
    EXPECT_EQ(a.n_synthetic, 20u);
    std::map<int, int> syn;
    std::size_t flagged = 0;
    for (const auto& t : a.trials)
        if (t.synthetic) {
            ++syn[t.y];
            ++flagged;
        }
    EXPECT_EQ(flagged, 20u);
    // Real proportions 50/30/20 give 10/6/4 synthetic trials.
    EXPECT_NEAR(syn[0], 10, 1);
    EXPECT_NEAR(syn[1], 6, 1);
    EXPECT_NEAR(syn[2], 4, 1);

    const auto b = build_augmented_set(real, 0.2, mini_model(), 1);
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        EXPECT_EQ(a.trials[i].id, b.trials[i].id);
        EXPECT_EQ(a.trials[i].x.data(), b.trials[i].x.data());
    }
    EXPECT_THROW(build_augmented_set(real, -0.1, mini_model(), 1), Error);
}

TEST(AugmentedSet, SyntheticFlagSurvivesSaveAndLoad) {
    const auto real = real_set(20);
    const auto a = build_augmented_set(real, 0.2, mini_model(), 2);
    Dataset ds;
    ds.meta = {mini().C, mini().T, mini().L, mini().P, 200.0, DatasetMeta::default_channel_names(mini().C)};
    ds.trials = a.trials;
    const auto dir = std::filesystem::temp_directory_path() / "eeg2vec_test_synth";
    std::filesystem::remove_all(dir);
    const auto back = load_dataset(save_dataset(dir, ds));
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < back.trials.size(); ++i) {
        EXPECT_EQ(back.trials[i].synthetic, ds.trials[i].synthetic);
        flagged += back.trials[i].synthetic;
    }
    EXPECT_EQ(flagged, 4u);
}
