#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "eeg2vec/benchgen.hpp"
#include "eeg2vec/eval.hpp"
#include "eeg2vec/metrics.hpp"

using namespace eeg2vec;

TEST(ClassificationReport, PerfectPredictions) {
    const std::vector<int> y{0, 1, 2, 2, 1, 0};
    const auto r = classification_report(y, y, 3);
    EXPECT_EQ(r.accuracy, 1.0);
    for (double f : r.f1) EXPECT_EQ(f, 1.0);
    EXPECT_EQ(r.zero_denominator_classes, 0u);
}

TEST(ClassificationReport, HandCountedExample) {
    const auto r = classification_report({0, 0, 1, 2}, {0, 1, 1, 2}, 3);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
    EXPECT_DOUBLE_EQ(r.precision[0], 0.5);
    EXPECT_DOUBLE_EQ(r.recall[0], 1.0);
    EXPECT_DOUBLE_EQ(r.precision[1], 1.0);
    EXPECT_DOUBLE_EQ(r.recall[1], 0.5);
    EXPECT_EQ(r.confusion[1][0], 1u);
}

TEST(ClassificationReport, ConstantPredictorIsChance) {
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(i % 3);
    const auto r = classification_report(std::vector<int>(30, 0), labels, 3);
    EXPECT_NEAR(r.accuracy, 1.0 / 3.0, 1e-12);
    EXPECT_EQ(r.precision[1], 0.0);  // zero predicted positives
    EXPECT_EQ(r.zero_denominator_classes, 2u);
}

TEST(ClassificationReport, IdentitiesOnRandomInput) {
    std::mt19937 gen(4);
    std::uniform_int_distribution<int> d(0, 3);
    std::vector<int> p(500), y(500);
    for (int i = 0; i < 500; ++i) {
        p[static_cast<std::size_t>(i)] = d(gen);
        y[static_cast<std::size_t>(i)] = d(gen);
    }
    const auto r = classification_report(p, y, 4);
    std::size_t total = 0, trace = 0, tp = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        std::size_t row = 0;
        for (auto v : r.confusion[c]) row += v;
        EXPECT_EQ(row, static_cast<std::size_t>(std::count(y.begin(), y.end(), static_cast<int>(c))));
        total += row;
        trace += r.confusion[c][c];
        tp += r.confusion[c][c];
        const double hm = r.precision[c] + r.recall[c] > 0
                              ? 2 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c])
                              : 0.0;
        EXPECT_NEAR(r.f1[c], hm, 1e-9);
        for (double v : {r.precision[c], r.recall[c], r.f1[c]}) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    }
    EXPECT_EQ(total, 500u);
    EXPECT_NEAR(r.accuracy, static_cast<double>(trace) / 500.0, 1e-12);
    EXPECT_NEAR(static_cast<double>(tp) / static_cast<double>(total), r.accuracy, 1e-9);  // micro recall
}

TEST(ClassificationReport, RejectsBadInput) {
    EXPECT_THROW(classification_report({}, {}, 3), Error);
    EXPECT_THROW(classification_report({0}, {0, 1}, 3), Error);
    EXPECT_THROW(classification_report({5}, {0}, 3), Error);
}

TEST(ParticipantReport, SingleParticipantReducesToOverall) {
    const std::vector<int> pred{0, 1, 1, 2}, lab{0, 1, 2, 2}, part(4, 0);
    const auto pr = per_participant_report(pred, lab, part, 3);
    ASSERT_EQ(pr.reports.size(), 1u);
    const auto all = classification_report(pred, lab, 3);
    EXPECT_EQ(pr.reports[0].confusion, all.confusion);
    EXPECT_EQ(pr.reports[0].accuracy, all.accuracy);
}

TEST(ParticipantReport, GroupsAreIndependent) {
    std::vector<int> pred{0, 1, 2, 0, 1, 2}, lab{0, 1, 2, 1, 1, 1}, part{0, 0, 0, 1, 1, 1};
    const auto before = per_participant_report(pred, lab, part, 3);
    pred[3] = 1;
    pred[5] = 1;
    const auto after = per_participant_report(pred, lab, part, 3);
    EXPECT_EQ(before.reports[0].confusion, after.reports[0].confusion);
    EXPECT_NE(before.reports[1].confusion, after.reports[1].confusion);
}

TEST(ParticipantReport, ReferenceFormatHasFortyFiveCells) {
    std::vector<int> pred, lab, part;
    for (int p = 0; p < 15; ++p)
        for (int c = 0; c < 3; ++c) {
            pred.push_back(c);
            lab.push_back(c);
            part.push_back(p);
        }
    const auto csv = participant_csv(per_participant_report(pred, lab, part, 3, 15));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 46);  // header + 45 rows
}

TEST(ParticipantReport, MissingParticipantsWarn) {
    const auto pr = per_participant_report({0}, {0}, {2}, 3, 4);
    EXPECT_EQ(pr.reports.size(), 1u);
    EXPECT_EQ(pr.warnings.size(), 3u);
}

TEST(Decorrelation, PerfectlyCorrelatedColumns) {
    Matrix<double> z(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
        z(i, 0) = static_cast<double>(i) * 0.3 - 2.0;
        z(i, 1) = 4.0 * z(i, 0) + 1.0;
    }
    EXPECT_NEAR(latent_decorrelation_score(z).score, 1.0, 1e-12);
}

TEST(Decorrelation, SignedDuplicates) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> nd;
    Matrix<double> z(40, 3);
    for (std::size_t i = 0; i < 40; ++i) {
        z(i, 0) = nd(gen);
        z(i, 1) = z(i, 0);
        z(i, 2) = -z(i, 0);
    }
    EXPECT_NEAR(latent_decorrelation_score(z).score, 1.0, 1e-12);
}

TEST(Decorrelation, IndependentColumnsScoreNearZero) {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> nd;
    Matrix<double> z(10000, 6);
    for (auto& v : z.data()) v = nd(gen);
    EXPECT_LE(latent_decorrelation_score(z).score, 0.02);
}

TEST(Decorrelation, InvariantUnderAffineRescaling) {
    std::mt19937_64 gen(12);
    std::normal_distribution<double> nd;
    Matrix<double> z(200, 4), w(200, 4);
    for (std::size_t i = 0; i < 200; ++i) {
        const double common = nd(gen);
        for (std::size_t j = 0; j < 4; ++j) z(i, j) = common * 0.5 * static_cast<double>(j) + nd(gen);
    }
    const double scale[4] = {3.0, -0.2, 10.0, 1e-3}, shift[4] = {1.0, -5.0, 0.0, 7.0};
    for (std::size_t i = 0; i < 200; ++i)
        for (std::size_t j = 0; j < 4; ++j) w(i, j) = scale[j] * z(i, j) + shift[j];
    EXPECT_NEAR(latent_decorrelation_score(z).score, latent_decorrelation_score(w).score, 1e-9);
}

TEST(Decorrelation, ZeroVarianceColumnsExcludedAndCounted) {
    Matrix<double> z(10, 4);
    for (std::size_t i = 0; i < 10; ++i) {
        z(i, 0) = static_cast<double>(i);
        z(i, 1) = 2.0;
        z(i, 2) = static_cast<double>(i % 3);
        z(i, 3) = -1.0;
    }
    const auto s = latent_decorrelation_score(z);
    EXPECT_EQ(s.used_dims, 2u);
    EXPECT_EQ(s.excluded_dims, 2u);
    Matrix<double> bad(10, 2);
    for (std::size_t i = 0; i < 10; ++i) bad(i, 0) = static_cast<double>(i);
    EXPECT_THROW(latent_decorrelation_score(bad), Error);
    EXPECT_THROW(latent_decorrelation_score(Matrix<double>(2, 3)), Error);
}

TEST(LinearProbe, SeparableAndUninformativeFeatures) {
    std::mt19937_64 gen(21);
    std::normal_distribution<double> nd;
    const std::size_t n = 300;
    Matrix<double> x(n, 3);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 3);
        x(i, 0) = 3.0 * y[i] + 0.3 * nd(gen);
        x(i, 1) = nd(gen);
        x(i, 2) = nd(gen);
    }
    const auto good = linear_probe(x, y, x, y, 3);
    EXPECT_GE(good.test_accuracy, 0.98);
    EXPECT_NEAR(good.chance, 1.0 / 3.0, 1e-12);
    Matrix<double> xr(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        xr(i, 0) = x(i, 1);
        xr(i, 1) = x(i, 2);
    }
    // Held-out half for the uninformative features.
    Matrix<double> a(150, 2), b(150, 2);
    std::vector<int> ya, yb;
    for (std::size_t i = 0; i < n; ++i) {
        auto& m = i < 150 ? a : b;
        m(i % 150, 0) = xr(i, 0);
        m(i % 150, 1) = xr(i, 1);
        (i < 150 ? ya : yb).push_back(y[i]);
    }
    EXPECT_LE(linear_probe(a, ya, b, yb, 3).test_accuracy, 0.5);
}

TEST(PsdFidelity, SelfComparisonHasZeroGaps) {
    const auto bench = make_benchmark([] {
        BenchmarkSpec s;
        s.trials_per_cell = 2;
        return s;
    }());
    const auto cmp = psd_fidelity(bench.dataset.trials, bench.dataset.trials, bench.dataset.meta, "ch3");
    EXPECT_EQ(cmp.classes.size(), 3u);
    EXPECT_EQ(cmp.low_gap_db, 0.0);
    EXPECT_EQ(cmp.high_gap_db, 0.0);
    for (const auto& c : cmp.classes) EXPECT_EQ(c.real.freqs, c.generated.freqs);
    const auto csv = psd_csv(cmp);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "freq_hz,real_c0_db,generated_c0_db,real_c1_db,generated_c1_db,real_c2_db,generated_c2_db");
}

TEST(PsdFidelity, UnknownChannelAndEmptySets) {
    const auto bench = make_benchmark([] {
        BenchmarkSpec s;
        s.trials_per_cell = 1;
        return s;
    }());
    EXPECT_THROW(psd_fidelity(bench.dataset.trials, bench.dataset.trials, bench.dataset.meta, "Fz"), Error);
    EXPECT_THROW(psd_fidelity({}, bench.dataset.trials, bench.dataset.meta, "ch0"), Error);
}

TEST(PsdFidelity, GapsSplitAtTenHertz) {
    // Synthetic copies with the 12 Hz and above content scaled by 10 dB in power.
    DatasetMeta meta{1, 400, 1, 1, 200.0, {"a"}};
    std::vector<Trial> real, gen;
    for (int k = 0; k < 4; ++k) {
        Trial r, g;
        r.x = Matrix<float>(1, 400);
        g.x = Matrix<float>(1, 400);
        for (std::size_t t = 0; t < 400; ++t) {
            const double s = static_cast<double>(t) / 200.0;
            const double lo = std::sin(2 * std::numbers::pi * 5.0 * s + k);
            const double hi = std::sin(2 * std::numbers::pi * 20.0 * s + 2 * k);
            r.x(0, t) = static_cast<float>(lo + hi);
            g.x(0, t) = static_cast<float>(lo + std::sqrt(10.0) * hi);
        }
        real.push_back(r);
        gen.push_back(g);
    }
    const auto cmp = psd_fidelity(real, gen, meta, "a");
    EXPECT_LT(cmp.low_gap_db, cmp.high_gap_db);
}

TEST(Latents, CsvShapeAndCompressionNote) {
    ModelConfig cfg = ModelConfig::miniature();
    const Model model(cfg, 3);
    std::vector<Trial> trials;
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
        Trial t;
        t.id = "t" + std::to_string(i);
        t.y = i % 3;
        t.p = i % 2;
        t.x = Matrix<float>(cfg.C, cfg.T);
        for (auto& v : t.x.data()) v = static_cast<float>(rng.uniform());
        trials.push_back(t);
    }
    const auto dir = std::filesystem::temp_directory_path() / "eeg2vec_test_latents";
    std::filesystem::remove_all(dir);
    export_latents(trials, model, dir / "a.csv");
    export_latents(trials, model, dir / "b.csv");
    std::ifstream a(dir / "a.csv"), b(dir / "b.csv");
    const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
    EXPECT_EQ(sa, sb);
    EXPECT_EQ(std::count(sa.begin(), sa.end(), '\n'), 6);
    const auto header = sa.substr(0, sa.find('\n'));
    EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, static_cast<long>(3 + cfg.d_z));
    EXPECT_EQ(compression_note(ModelConfig::reference()), "latent compression: d_z/(C*T) = 1000/24800 = 4.03%");
}
