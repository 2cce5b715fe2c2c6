#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "eeg2vec/eval.hpp"
#include "eeg2vec/train.hpp"

using namespace eeg2vec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// Class y carries a sinusoid of (y + 1) cycles per window on every channel,
// plus uniform jitter, min-max scaled into [0, 1].
std::vector<Trial> toy_trials(const ModelConfig& c, std::size_t n, std::uint64_t seed, const std::string& tag) {
    Rng rng(seed);
    std::vector<Trial> out;
    for (std::size_t i = 0; i < n; ++i) {
        Trial t;
        t.id = tag + std::to_string(1000 + i);
        t.y = static_cast<int>(i % c.L);
        t.p = static_cast<int>((i / c.L) % c.P);
        t.fs = 200.0;
        t.x = Matrix<float>(c.C, c.T);
        for (std::size_t ch = 0; ch < c.C; ++ch)
            for (std::size_t k = 0; k < c.T; ++k) {
                const double ph = 2.0 * std::numbers::pi * (t.y + 1) * static_cast<double>(k) / c.T;
                t.x(ch, k) = static_cast<float>(0.5 + 0.4 * std::sin(ph + 0.3 * ch) + 0.1 * (rng.uniform() - 0.5));
            }
        out.push_back(std::move(t));
    }
    return out;
}

TrainConfig tiny_train(std::size_t epochs) {
    TrainConfig t;
    t.batch_size = 16;
    t.max_epochs = epochs;
    t.learning_rate = 3e-3;
    t.early_stop_patience = epochs;
    t.seed = 77;
    return t;
}

}  // namespace

TEST(EarlyStopping, WorkedTrace) {
    EarlyStopping s(3, 0.0);
    const double losses[] = {5.0, 4.0, 4.1, 4.2, 4.3, 3.0};
    std::size_t stopped_after = 0;
    for (std::size_t i = 0; i < std::size(losses); ++i) {
        s.observe(losses[i]);
        if (s.should_stop()) {
            stopped_after = i + 1;
            break;
        }
    }
    EXPECT_EQ(s.best_epoch(), 2u);
    EXPECT_EQ(s.best_loss(), 4.0);
    EXPECT_EQ(stopped_after, 5u);
}

TEST(EarlyStopping, MinDeltaRequiresARealImprovement) {
    EarlyStopping s(2, 0.5);
    EXPECT_TRUE(s.observe(10.0));
    EXPECT_FALSE(s.observe(9.8));
    EXPECT_FALSE(s.should_stop());
    EXPECT_FALSE(s.observe(9.6));
    EXPECT_TRUE(s.should_stop());
    EXPECT_EQ(s.best_epoch(), 1u);
}

TEST(TrainConfig, ValidationAndJson) {
    TrainConfig t;
    t.batch_size = 0;
    EXPECT_THROW(t.validate(), Error);
    t = {};
    t.learning_rate = 0.0;
    EXPECT_THROW(t.validate(), Error);
    t = tiny_train(7);
    EXPECT_EQ(train_config_from_json(train_config_to_json(t)), t);
}

TEST(Train, LossDecreasesAndTotalsAreConsistent) {
    const auto c = ModelConfig::miniature();
    const auto train = toy_trials(c, 60, 1, "tr");
    const auto val = toy_trials(c, 15, 2, "va");
    std::size_t callbacks = 0;
    const auto r = train_fold(train, val, c, tiny_train(20), [&](const EpochLog& log) {
        ++callbacks;
        ASSERT_NE(log.record, nullptr);
        ASSERT_NE(log.model, nullptr);
    });
    const auto& h = r.history;
    ASSERT_EQ(h.epochs.size(), 20u);
    EXPECT_EQ(callbacks, 20u);
    EXPECT_LT(h.epochs.back().train.total, h.epochs.front().train.total);
    for (const auto& e : h.epochs) {
        for (const auto* l : {&e.train, &e.val}) {
            EXPECT_NEAR(l->total, l->recon + c.beta * l->kl + c.lambda * l->cla, 1e-6);
            EXPECT_GE(l->kl, 0.0);
            EXPECT_GE(l->recon, 0.0);
        }
        EXPECT_GE(e.val_accuracy, 0.0);
        EXPECT_LE(e.val_accuracy, 1.0);
    }
    ASSERT_GE(h.best_epoch, 1u);
    ASSERT_LE(h.best_epoch, h.epochs.size());
    const double best = h.epochs[h.best_epoch - 1].val.total;
    for (const auto& e : h.epochs) EXPECT_GE(e.val.total, best - 1e-5);
    for (std::size_t i = 1; i < h.wall_seconds.size(); ++i) EXPECT_GE(h.wall_seconds[i], h.wall_seconds[i - 1]);

    // The returned parameters are those of the best epoch.
    const auto again = evaluate_loss(r.model, val, 16, derive_seed(77, "val-noise"));
    EXPECT_NEAR(again.loss.total, best, 1e-9);
}

TEST(Train, EarlyStopsWhenValidationStalls) {
    const auto c = ModelConfig::miniature();
    auto t = tiny_train(200);
    t.early_stop_patience = 3;
    t.min_delta = 1e9;  // nothing after epoch 1 counts as an improvement
    const auto r = train_fold(toy_trials(c, 30, 1, "tr"), toy_trials(c, 6, 2, "va"), c, t);
    EXPECT_TRUE(r.history.stopped_early);
    EXPECT_EQ(r.history.best_epoch, 1u);
    EXPECT_EQ(r.history.epochs.size(), 4u);
}

TEST(Train, DeterministicHistoryAndCheckpointBytes) {
    const auto c = ModelConfig::miniature();
    const auto train = toy_trials(c, 40, 1, "tr");
    const auto val = toy_trials(c, 9, 2, "va");
    auto reversed = train;
    std::reverse(reversed.begin(), reversed.end());
    const auto a = train_fold(train, val, c, tiny_train(4));
    const auto b = train_fold(reversed, val, c, tiny_train(4));
    EXPECT_EQ(a.history.epochs, b.history.epochs);

    const auto dir = fs::temp_directory_path() / "eeg2vec_test_train";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_model(dir / "a.ckpt", a.model, &a.adam, {{"fold", 0}});
    save_model(dir / "b.ckpt", b.model, &b.adam, {{"fold", 0}});
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));

    auto other = tiny_train(4);
    other.seed = 78;
    const auto d = train_fold(train, val, c, other);
    EXPECT_NE(d.history.epochs, a.history.epochs);

    const auto loaded = load_model(dir / "a.ckpt");
    EXPECT_EQ(loaded.config(), c);
    EXPECT_EQ(predict_labels(loaded, val, 8), predict_labels(a.model, val, 8));
}

TEST(Train, FixedBudgetRunsToTheEndAndMatchesTheEarlyStoppedPrefix) {
    const auto c = ModelConfig::miniature();
    const auto train = toy_trials(c, 30, 1, "tr");
    const auto val = toy_trials(c, 6, 2, "va");
    auto t = tiny_train(6);
    t.early_stop_patience = 1;
    t.min_delta = 1e9;
    t.fixed_budget = true;
    const auto fixed = train_fold(train, val, c, t);
    EXPECT_EQ(fixed.history.epochs.size(), 6u);
    EXPECT_EQ(fixed.history.best_epoch, 6u);
    EXPECT_FALSE(fixed.history.stopped_early);

    // A normal run whose best epoch is E and a fixed-budget run of E epochs
    // return the same parameters, because training is a deterministic prefix.
    const auto normal = train_fold(train, val, c, tiny_train(8));
    auto budget = tiny_train(normal.history.best_epoch);
    budget.fixed_budget = true;
    const auto prefix = train_fold(train, val, c, budget);
    const auto dir = fs::temp_directory_path() / "eeg2vec_test_budget";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_model(dir / "normal.ckpt", normal.model, &normal.adam, {});
    save_model(dir / "prefix.ckpt", prefix.model, &prefix.adam, {});
    EXPECT_EQ(slurp(dir / "normal.ckpt"), slurp(dir / "prefix.ckpt"));
}

TEST(BetaSweep, RowsShareTheReferenceArmLength) {
    const auto c = ModelConfig::miniature();
    Dataset ds;
    ds.meta = {c.C, c.T, c.L, c.P, 200.0, {}};
    ds.trials = toy_trials(c, 48, 1, "t");
    const auto plan = make_split_plan(ds.trials, 0.2, 2, 9);
    const auto t = tiny_train(6);

    const auto single = run_beta_sweep(ds, plan, c, t, {c.beta});
    ASSERT_EQ(single.rows.size(), 1u);
    const auto plain = train_fold(select_trials(ds.trials, plan.folds[0].train_ids),
                                  select_trials(ds.trials, plan.folds[0].val_ids), c, fold_train_config(t, 0));
    EXPECT_EQ(single.runs[0].history.epochs, plain.history.epochs);
    EXPECT_EQ(single.rows[0].epochs, plain.history.best_epoch);

    const auto sweep = run_beta_sweep(ds, plan, c, t, {0.5, 1.0, 4.0});
    ASSERT_EQ(sweep.rows.size(), 3u);
    for (const auto& row : sweep.rows) EXPECT_EQ(row.epochs, plain.history.best_epoch);
    EXPECT_DOUBLE_EQ(sweep.rows[1].recon_mse, single.rows[0].recon_mse);
    const auto csv = beta_sweep_csv(sweep.rows);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Train, RejectsOverlappingOrEmptySets) {
    const auto c = ModelConfig::miniature();
    const auto train = toy_trials(c, 6, 1, "tr");
    EXPECT_THROW(train_fold(train, {train[0]}, c, tiny_train(1)), Error);
    EXPECT_THROW(train_fold(train, {}, c, tiny_train(1)), Error);
}

TEST(Train, HistoryCsvHasOneRowPerEpoch) {
    const auto c = ModelConfig::miniature();
    const auto r = train_fold(toy_trials(c, 12, 1, "tr"), toy_trials(c, 3, 2, "va"), c, tiny_train(3));
    const auto csv = history_csv(r.history);
    EXPECT_EQ(csv.rfind(kHistoryColumns, 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Train, FoldSeedsDiffer) {
    const auto t = tiny_train(1);
    EXPECT_NE(fold_train_config(t, 0).seed, fold_train_config(t, 1).seed);
    EXPECT_EQ(fold_train_config(t, 2), fold_train_config(t, 2));
}
