#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "eeg2vec/model.hpp"
#include "eeg2vec/nn/gradcheck.hpp"

using namespace eeg2vec;

namespace {

Batch<double> random_batch(const ModelConfig& c, std::size_t n, Rng& rng) {
    Batch<double> b;
    b.x = nn::Tensor<double>({n, 1, c.C, c.T});
    for (auto& v : b.x.data) v = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
        b.y.push_back(static_cast<int>(rng.below(c.L)));
        b.p.push_back(static_cast<int>(rng.below(c.P)));
    }
    return b;
}

Matrix<double> random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix<double> m(r, c);
    for (auto& v : m.data()) v = rng.uniform();
    return m;
}

}  // namespace

TEST(ModelConfig, ReferenceValues) {
    const auto c = ModelConfig::reference();
    EXPECT_EQ(c.d_z, 1000u);
    EXPECT_EQ(c.beta, 1.0);
    EXPECT_EQ(c.lambda, 1.0);
    EXPECT_EQ(c.C * c.T, 24800u);
    EXPECT_EQ(c.flat(), 16u * 12u);
}

TEST(ModelConfig, JsonRoundTripAndUnknownKey) {
    const auto c = ModelConfig::miniature();
    EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
    auto j = model_config_to_json(c);
    j["latent"] = 3;
    EXPECT_THROW(model_config_from_json(j), Error);
}

TEST(Encode, ZeroHeadsGiveZeroPosterior) {
    const auto c = ModelConfig::miniature();
    Eeg2Vec<double> m(c, 1);
    for (auto* name : {"enc/mu/0.w", "enc/mu/0.b", "enc/logvar/0.w", "enc/logvar/0.b"}) m.params().value(name).fill(0.0);
    const auto post = m.encode(Matrix<double>(c.C, c.T, 0.0));
    for (double v : post.mu) EXPECT_EQ(v, 0.0);
    for (double v : post.log_var) EXPECT_EQ(v, 0.0);
}

TEST(Encode, ReferenceLatentLengthAndSensitivity) {
    const auto c = ModelConfig::reference();
    Eeg2Vec<float> m(c, 2);
    Rng rng(3);
    const auto a = m.encode(random_matrix(c.C, c.T, rng).cast<float>());
    const auto b = m.encode(random_matrix(c.C, c.T, rng).cast<float>());
    EXPECT_EQ(a.mu.size(), 1000u);
    EXPECT_EQ(a.log_var.size(), 1000u);
    EXPECT_NE(a.mu, b.mu);
    EXPECT_THROW(m.encode(Matrix<float>(c.C, c.T + 1)), Error);
}

TEST(Reparameterize, ClampAndStandardNoise) {
    LatentPosterior<double> post{{0.0, 0.0}, {-INFINITY, 50.0}, {}};
    Rng rng(4);
    const auto s = reparameterize(post, rng);
    EXPECT_EQ(s.log_var[0], -10.0);
    EXPECT_EQ(s.log_var[1], 10.0);

    LatentPosterior<double> unit{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {}};
    Rng a(9), b(9);
    const auto z = reparameterize(unit, a).z;
    for (double v : z) EXPECT_EQ(v, b.normal());
}

TEST(Reparameterize, MonteCarloMean) {
    const double mu = 0.7, lv = std::log(0.25);
    Rng rng(5);
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += reparameterize(LatentPosterior<double>{{mu}, {lv}, {}}, rng).z[0];
    EXPECT_NEAR(s / n, mu, 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST(Decode, ReferenceShapeRangeAndDeterminism) {
    const auto c = ModelConfig::reference();
    Eeg2Vec<float> m(c, 6);
    Rng rng(7);
    std::vector<float> z(c.d_z);
    for (auto& v : z) v = static_cast<float>(rng.normal());
    const auto x = m.decode(z, 1, 14);
    EXPECT_EQ(x.rows(), 62u);
    EXPECT_EQ(x.cols(), 400u);
    for (float v : x.data()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
    EXPECT_EQ(m.decode(z, 1, 14), x);
    EXPECT_THROW(m.decode(std::vector<float>(3), 0, 0), Error);
}

TEST(Classify, UniformSumsAndShiftInvariance) {
    const auto c = ModelConfig::miniature();
    Eeg2Vec<double> m(c, 8);
    Rng rng(9);
    std::vector<double> z(c.d_z);
    for (auto& v : z) v = rng.normal();
    const auto p = m.classify(z);
    double s = 0.0;
    for (double v : p) {
        EXPECT_GE(v, 0.0);
        s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
    auto& bias = m.params().value("cla/4.b");
    for (auto& b : bias.data) b += 3.5;
    const auto q = m.classify(z);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-6);
    for (auto& e : m.params().entries())
        if (e.name.rfind("cla/", 0) == 0) e.value.fill(0.0);
    for (double v : m.classify(z)) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
}

TEST(Loss, Reconstruction) {
    Rng rng(10);
    const auto x = random_matrix(62, 400, rng), y = random_matrix(62, 400, rng);
    EXPECT_EQ(loss_reconstruction(x, x), 0.0);
    EXPECT_EQ(loss_reconstruction(Matrix<double>(2, 3, 0.0), Matrix<double>(2, 3, 1.0)), 1.0);
    double oracle = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t t = 0; t < x.cols(); ++t) oracle += (x(r, t) - y(r, t)) * (x(r, t) - y(r, t));
    oracle /= 62.0 * 400.0;
    EXPECT_NEAR(loss_reconstruction(x, y), oracle, 1e-12);
    EXPECT_THROW(loss_reconstruction(x, Matrix<double>(62, 399)), Error);
}

TEST(Loss, KlClosedFormValues) {
    const std::vector<double> zero(5, 0.0);
    EXPECT_EQ(loss_kl<double>(zero, zero), 0.0);
    const std::vector<double> one{1.0}, z1{0.0};
    EXPECT_DOUBLE_EQ(loss_kl<double>(one, z1), 0.5);
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> mu(4), lv(4);
        for (auto& v : mu) v = rng.uniform(-5, 5);
        for (auto& v : lv) v = rng.uniform(-10, 10);
        EXPECT_GE(loss_kl<double>(mu, lv), -1e-9);
    }
}

TEST(Loss, KlMatchesMonteCarlo) {
    Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const double mu = rng.uniform(-1, 1), lv = rng.uniform(-1, 1);
        const double sd = std::exp(0.5 * lv);
        double s = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            const double e = rng.normal();
            const double z = mu + sd * e;
            // log q(z) - log p(z); the 2*pi terms cancel.
            s += -0.5 * lv - 0.5 * e * e + 0.5 * z * z;
        }
        const double closed = loss_kl<double>(std::vector<double>{mu}, std::vector<double>{lv});
        EXPECT_NEAR(s / n, closed, 0.01 * closed) << "mu=" << mu << " lv=" << lv;
    }
}

TEST(Loss, CrossEntropyClamp) {
    EXPECT_EQ(loss_classification<double>(std::vector<double>{1, 0, 0}, 0), 0.0);
    EXPECT_NEAR(loss_classification<double>(std::vector<double>(3, 1.0 / 3.0), 2), std::log(3.0), 1e-12);
    EXPECT_NEAR(loss_classification<double>(std::vector<double>{1, 0, 0}, 1), 27.631021115928547, 1e-9);
    EXPECT_THROW(loss_classification<double>(std::vector<double>{1, 0, 0}, 3), Error);
}

TEST(Loss, TotalCombinesComponents) {
    auto c = ModelConfig::miniature();
    Rng rng(13);
    const auto batch = random_batch(c, 4, rng);
    c.beta = 0.0;
    c.lambda = 0.0;
    {
        Eeg2Vec<double> m(c, 1);
        Rng r(2);
        const auto l = m.objective(batch, nn::Mode::train, r).loss;
        EXPECT_EQ(l.total, l.recon);
    }
    c.beta = 1.0;
    c.lambda = 1.0;
    Eeg2Vec<double> m(c, 1);
    Rng r(2);
    const auto l = m.objective(batch, nn::Mode::train, r).loss;
    EXPECT_NEAR(l.total, l.recon + l.kl + l.cla, 1e-12);
}

TEST(Loss, NonDecreasingInBeta) {
    auto c = ModelConfig::miniature();
    Rng rng(14);
    const auto batch = random_batch(c, 5, rng);
    Eeg2Vec<double> m(c, 3);
    double prev = -INFINITY;
    for (double beta : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        m.config().beta = beta;
        Rng r(5);
        const auto l = m.objective(batch, nn::Mode::train, r).loss;
        ASSERT_GT(l.kl, 0.0);
        EXPECT_GE(l.total, prev);
        prev = l.total;
    }
}

TEST(Gradient, MiniatureObjectiveMatchesFiniteDifferences) {
    const auto c = ModelConfig::miniature();
    Rng rng(15);
    const auto batch = random_batch(c, 6, rng);
    Eeg2Vec<double> m(c, 4);
    Rng r(21);
    m.loss_and_grad(batch, r);
    const auto loss = [&](const nn::ParamStore<double>& ps) {
        Eeg2Vec<double> probe(c, ps);
        Rng rr(21);
        return probe.objective(batch, nn::Mode::train, rr).loss.total;
    };
    const auto fd = nn::finite_difference_grad<double>(loss, m.params(), 1e-5);
    const auto res = nn::compare_gradients(m.params(), fd);
    EXPECT_LE(res.max_relative_error, 1e-4) << res.worst_param << "[" << res.worst_index << "]";
    EXPECT_EQ(res.checked, m.params().trainable_scalar_count());
}

TEST(Gradient, IsolationUnderZeroWeights) {
    auto c = ModelConfig::miniature();
    Rng rng(16);
    const auto batch = random_batch(c, 4, rng);
    c.lambda = 0.0;
    Eeg2Vec<double> m(c, 5);
    Rng r(1);
    m.loss_and_grad(batch, r);
    for (const auto& e : m.params().entries()) {
        if (e.name.rfind("cla/", 0) != 0) continue;
        for (double g : e.grad.data) EXPECT_EQ(g, 0.0) << e.name;
    }

    c.beta = 0.0;
    Eeg2Vec<double> m2(c, 5);
    Rng r2(1);
    m2.loss_and_grad(batch, r2);
    double norm = 0.0;
    for (double g : m2.params().grad("enc/logvar/0.w").data) norm += std::abs(g);
    EXPECT_GT(norm, 0.0);
}

TEST(Model, EndToEndShapeForSeveralConfigs) {
    for (auto c : {ModelConfig::miniature(), ModelConfig::benchmark()}) {
        Eeg2Vec<float> m(c, 1);
        Rng rng(2);
        Matrix<float> x(c.C, c.T);
        for (auto& v : x.data()) v = static_cast<float>(rng.uniform());
        const auto post = reparameterize(m.encode(x), rng);
        const auto xh = m.decode(post.z, 0, 0);
        EXPECT_EQ(xh.rows(), x.rows());
        EXPECT_EQ(xh.cols(), x.cols());
    }
}

TEST(Model, RejectsMismatchedParameters) {
    const auto c = ModelConfig::miniature();
    Eeg2Vec<double> m(c, 1);
    auto other = ModelConfig::miniature();
    other.d_z = 9;
    EXPECT_THROW((Eeg2Vec<double>(other, m.params())), Error);
}

TEST(Model, CompressionRatio) {
    EXPECT_NEAR(compression_ratio(ModelConfig::reference()) * 100.0, 4.03, 0.005);
}
