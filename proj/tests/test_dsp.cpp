#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "eeg2vec/dsp.hpp"

using namespace eeg2vec;
using namespace eeg2vec::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sinusoid(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs + phase);
    return x;
}

double rms(const std::vector<double>& x, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
    return std::sqrt(s / static_cast<double>(to - from));
}

// Closed-form magnitude of a bilinear-transformed Butterworth band-pass with
// pre-warped edges: |H|^2 = 1 / (1 + (((W^2 - W1 W2) / ((W2 - W1) W))^2)^n),
// W = 2 fs tan(pi f / fs).
double butterworth_band_magnitude(double f, double lo, double hi, int n, double fs) {
    const auto warp = [fs](double x) { return 2.0 * fs * std::tan(kPi * x / fs); };
    const double w = warp(f), w1 = warp(lo), w2 = warp(hi);
    const double u = (w * w - w1 * w2) / ((w2 - w1) * w);
    return 1.0 / std::sqrt(1.0 + std::pow(u * u, n));
}

}  // namespace

TEST(Butterworth, MagnitudeMatchesClosedForm) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    EXPECT_EQ(fc.order(), 8);
    for (double f = 0.25; f < 100.0; f += 0.25) {
        const double expected = butterworth_band_magnitude(f, 2.0, 40.0, 4, 200.0);
        EXPECT_NEAR(std::abs(fc.response(f, 200.0)), expected, 1e-9) << "f=" << f;
    }
}

TEST(Butterworth, ReferenceBandEdges) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    EXPECT_GE(std::abs(fc.response(20.0, 200.0)), 0.99);
    EXPECT_LE(std::abs(fc.response(0.5, 200.0)), 0.1);
    EXPECT_LE(std::abs(fc.response(80.0, 200.0)), 0.1);
    EXPECT_NEAR(std::abs(fc.response(2.0, 200.0)), std::sqrt(0.5), 1e-9);
    EXPECT_NEAR(std::abs(fc.response(40.0, 200.0)), std::sqrt(0.5), 1e-9);
}

TEST(Butterworth, OtherOrdersAndRatesMatchClosedForm) {
    for (int order : {1, 2, 3, 6}) {
        const auto fc = design_butterworth_bandpass({1.0, 30.0, order, 1000.0});
        for (double f : {0.3, 1.0, 5.0, 29.0, 60.0, 300.0})
            EXPECT_NEAR(std::abs(fc.response(f, 1000.0)), butterworth_band_magnitude(f, 1.0, 30.0, order, 1000.0), 1e-8)
                << "order " << order << " f " << f;
    }
}

TEST(Butterworth, RejectsInvalidSpecs) {
    try {
        design_butterworth_bandpass({40.0, 2.0, 4, 200.0});
        FAIL() << "expected a precondition error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::precondition);
    }
    EXPECT_THROW(design_butterworth_bandpass({2.0, 120.0, 4, 200.0}), Error);
    EXPECT_THROW(design_butterworth_bandpass({2.0, 40.0, 0, 200.0}), Error);
}

TEST(ZeroPhase, PassesTwentyHertz) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    const auto x = sinusoid(20.0, 200.0, 4000);
    const auto y = filter_zero_phase(std::span<const double>(x), fc);
    const double ratio = rms(y, 500, 3500) / rms(x, 500, 3500);
    EXPECT_NEAR(ratio, 1.0, 0.02);
}

TEST(ZeroPhase, AttenuatesEightyHertz) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    const auto x = sinusoid(80.0, 200.0, 4000, 1.0, 0.3);
    const auto y = filter_zero_phase(std::span<const double>(x), fc);
    // Forward-backward filtering squares the magnitude response.
    const double expected = std::pow(butterworth_band_magnitude(80.0, 2.0, 40.0, 4, 200.0), 2);
    const double ratio = rms(y, 500, 3500) / rms(x, 500, 3500);
    EXPECT_LE(ratio, 0.02);
    EXPECT_NEAR(ratio, expected, 1e-3);
}

TEST(ZeroPhase, ZeroSignalStaysZero) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    const std::vector<double> x(500, 0.0);
    for (double v : filter_zero_phase(std::span<const double>(x), fc)) EXPECT_EQ(v, 0.0);
}

TEST(ZeroPhase, NoLagAgainstInput) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    const auto x = sinusoid(7.0, 200.0, 2000);
    const auto y = filter_zero_phase(std::span<const double>(x), fc);
    int best_lag = 0;
    double best = -1e300;
    for (int lag = -10; lag <= 10; ++lag) {
        double s = 0.0;
        for (int i = 300; i < 1700; ++i) s += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i + lag)];
        if (s > best) {
            best = s;
            best_lag = lag;
        }
    }
    EXPECT_EQ(best_lag, 0);
}

TEST(ZeroPhase, Linear) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    std::vector<double> a(800), b(800), c(800);
    const double alpha = 1.7, beta = -0.4;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = nd(gen);
        b[i] = nd(gen);
        c[i] = alpha * a[i] + beta * b[i];
    }
    const auto fa = filter_zero_phase(std::span<const double>(a), fc);
    const auto fb = filter_zero_phase(std::span<const double>(b), fc);
    const auto fcomb = filter_zero_phase(std::span<const double>(c), fc);
    double scale = 0.0;
    for (double v : fcomb) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(fcomb[i], alpha * fa[i] + beta * fb[i], 1e-10 * scale);
}

TEST(ZeroPhase, RejectsShortSignals) {
    const auto fc = design_butterworth_bandpass({2.0, 40.0, 4, 200.0});
    const std::vector<double> x(10, 1.0);
    EXPECT_THROW(filter_zero_phase(std::span<const double>(x), fc), Error);
}

TEST(Downsample, LengthArithmetic) {
    Matrix<double> x(2, 155000);
    for (std::size_t t = 0; t < x.cols(); ++t) x(0, t) = static_cast<double>(t);
    const auto y = downsample(x, 5);
    EXPECT_EQ(y.cols(), 31000u);
    EXPECT_EQ(y(0, 1), 5.0);
    EXPECT_EQ(y(0, 30999), 154995.0);
}

TEST(Downsample, IdentityAndConstant) {
    Matrix<double> x(1, 7);
    for (std::size_t t = 0; t < 7; ++t) x(0, t) = 0.5 * static_cast<double>(t);
    EXPECT_EQ(downsample(x, 1).data(), x.data());
    const Matrix<double> c(3, 12, 2.5);
    const auto d = downsample(c, 4);
    EXPECT_EQ(d.cols(), 3u);
    for (double v : d.data()) EXPECT_EQ(v, 2.5);
    EXPECT_THROW(downsample(x, 0), Error);
}

TEST(Segment, ReferenceDurationsGiveSeventySevenEpochs) {
    const Matrix<double> x(2, 185 * 200, 1.0);
    const auto e = segment_epochs(x, 200.0, 30.0, 155.0, 2.0);
    ASSERT_EQ(e.size(), 77u);
    for (const auto& m : e) {
        EXPECT_EQ(m.rows(), 2u);
        EXPECT_EQ(m.cols(), 400u);
    }
}

TEST(Segment, TooShortRecording) {
    const Matrix<double> x(1, 32 * 200, 0.0);
    EXPECT_THROW(segment_epochs(x, 200.0, 30.0, 155.0, 2.0), Error);
}

TEST(Segment, ConcatenationEqualsKeptSpan) {
    Matrix<double> x(2, 10 * 100);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t t = 0; t < x.cols(); ++t) x(r, t) = static_cast<double>(r * 10000 + t);
    const auto e = segment_epochs(x, 100.0, 3.0, 4.0, 2.0);
    ASSERT_EQ(e.size(), 2u);
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t k = 0; k < 400; ++k) EXPECT_EQ(e[k / 200](r, k % 200), x(r, 300 + k));
}

TEST(Normalize, AffineMapAndConstantRows) {
    Matrix<double> x(2, 3, std::vector<double>{-1, 0, 1, 3, 3, 3});
    const auto y = normalize_unit_range(x);
    EXPECT_EQ(y(0, 0), 0.0);
    EXPECT_EQ(y(0, 1), 0.5);
    EXPECT_EQ(y(0, 2), 1.0);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(y(1, t), 0.5);
}

TEST(Normalize, RandomRowsSpanUnitInterval) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-50.0, 80.0);
    Matrix<double> x(6, 97);
    for (auto& v : x.data()) v = u(gen);
    const auto y = normalize_unit_range(x);
    for (std::size_t r = 0; r < 6; ++r) {
        const auto row = y.row(r);
        EXPECT_EQ(*std::min_element(row.begin(), row.end()), 0.0);
        EXPECT_EQ(*std::max_element(row.begin(), row.end()), 1.0);
    }
}

TEST(Normalize, RejectsNonFinite) {
    Matrix<double> x(1, 3, std::vector<double>{0.0, std::nan(""), 1.0});
    EXPECT_THROW(normalize_unit_range(x), Error);
    x(0, 1) = INFINITY;
    EXPECT_THROW(normalize_unit_range(x), Error);
}

TEST(Welch, SinusoidPeaksAtItsBin) {
    WelchParams wp;
    const auto est = welch_psd({sinusoid(10.0, 200.0, 400)}, wp);
    EXPECT_DOUBLE_EQ(est.freqs[est.argmax()], 10.0);
    EXPECT_EQ(est.freqs.front(), 2.0);
    EXPECT_EQ(est.freqs.back(), 41.0);
    for (std::size_t i = 1; i < est.freqs.size(); ++i) EXPECT_GT(est.freqs[i], est.freqs[i - 1]);
    EXPECT_EQ(est.freqs.size(), est.power_db.size());
}

TEST(Welch, WhiteNoiseIsFlatAndSatisfiesParseval) {
    std::mt19937_64 gen(5);
    const double sigma = 1.5;
    std::normal_distribution<double> nd(0.0, sigma);
    std::vector<std::vector<double>> signals(200, std::vector<double>(2000));
    for (auto& s : signals)
        for (auto& v : s) v = nd(gen);
    WelchParams wp;
    wp.f_min = 0.0;
    wp.f_max = 100.0;
    const auto est = welch_psd(signals, wp);
    const double expected_db = 10.0 * std::log10(sigma * sigma / 100.0);  // two-sided density folded: var / (fs/2)
    for (std::size_t k = 1; k + 1 < est.freqs.size(); ++k) EXPECT_NEAR(est.power_db[k], expected_db, 3.0);
    double integral = 0.0;
    for (double p : est.power) integral += p * (wp.fs / static_cast<double>(wp.nfft));
    EXPECT_NEAR(integral / (sigma * sigma), 1.0, 0.1);
}

TEST(Welch, ZeroSignalHitsTheFloor) {
    const auto est = welch_psd({std::vector<double>(400, 0.0)}, WelchParams{});
    for (double d : est.power_db) EXPECT_EQ(d, -300.0);
}

TEST(Welch, RejectsShortSignals) {
    EXPECT_THROW(welch_psd({std::vector<double>(150, 1.0)}, WelchParams{}), Error);
}

TEST(Pipeline, ReferenceRecordingGivesSeventySevenEpochs) {
    PreprocessConfig cfg;  // 1000 Hz in, 200 Hz out, 185 s, drop 30 s, keep 155 s, 2 s windows
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    Matrix<double> raw(62, 185000);
    for (auto& v : raw.data()) v = nd(gen);
    const auto epochs = preprocess_recording(raw, cfg);
    ASSERT_EQ(epochs.size(), 77u);
    for (const auto& e : epochs) {
        ASSERT_EQ(e.rows(), 62u);
        ASSERT_EQ(e.cols(), 400u);
        for (double v : e.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
}

TEST(Pipeline, UsesTheTrailingSpanOfLongRecordings) {
    PreprocessConfig cfg;
    cfg.total_s = 10.0;
    cfg.drop_head_s = 2.0;
    cfg.keep_s = 8.0;
    Matrix<double> raw(1, 15000);
    // 5 s of a 10 Hz tone followed by 10 s of 25 Hz: only the 25 Hz part is used.
    for (std::size_t t = 0; t < raw.cols(); ++t) {
        const double f = t < 5000 ? 10.0 : 25.0;
        raw(0, t) = std::sin(2.0 * kPi * f * static_cast<double>(t) / 1000.0);
    }
    const auto epochs = preprocess_recording(raw, cfg);
    ASSERT_EQ(epochs.size(), 4u);
    std::vector<double> row(epochs[0].row(0).begin(), epochs[0].row(0).end());
    const auto est = welch_psd({row}, WelchParams{});
    EXPECT_DOUBLE_EQ(est.freqs[est.argmax()], 25.0);
}
