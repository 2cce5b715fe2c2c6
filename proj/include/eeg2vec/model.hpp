#pragma once

// Conditional beta-VAE with a latent classifier.
//
//   encoder:    EEGNet-style backbone -> flat features -> (mu, log_var) heads
//   sampling:   z = mu + exp(0.5 log_var) * eps
//   decoder:    [z, onehot(y), onehot(p)] -> dense -> mirrored transposed stack -> sigmoid
//   classifier: z -> dense -> dense -> dense -> softmax
//   loss:       recon + beta * KL + lambda * CE  (each averaged over the batch)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eeg2vec/dataio.hpp"
#include "eeg2vec/error.hpp"
#include "eeg2vec/json_fields.hpp"
#include "eeg2vec/nn/adam.hpp"
#include "eeg2vec/nn/network.hpp"
#include "eeg2vec/rng.hpp"

namespace eeg2vec {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kProbFloor = 1e-12;
/// Gain applied to the decoder's latent input weights and output convolution
/// at initialization (see Eeg2Vec::damp_decoder_init).
inline constexpr double kDecoderInitGain = 0.1;

struct ModelConfig {
    std::size_t C = 62, T = 400, L = 3, P = 15;
    std::size_t d_z = 1000;
    double beta = 1.0;
    double lambda = 1.0;
    // Encoder backbone.
    std::size_t F1 = 8;         // temporal filters
    std::size_t D = 2;          // depth multiplier of the spatial conv
    std::size_t F2 = 16;        // separable filters
    std::size_t kernel1 = 100;  // temporal kernel (fs / 2 at 200 Hz)
    std::size_t kernel2 = 16;   // separable kernel
    std::size_t pool1 = 4;
    std::size_t pool2 = 8;
    double dropout = 0.25;
    std::vector<std::size_t> classifier_hidden{256, 64};

    std::size_t width1() const { return T / pool1; }
    std::size_t width2() const { return width1() / pool2; }
    std::size_t flat() const { return F2 * width2(); }
    std::size_t decoder_input() const { return d_z + L + P; }

    void validate() const {
        require(C >= 1 && T >= 1 && L >= 1 && P >= 1, ErrorKind::config, "model: C, T, L, P must be >= 1");
        require(d_z >= 1, ErrorKind::config, "model: d_z must be >= 1");
        require(beta >= 0.0 && lambda >= 0.0, ErrorKind::config, "model: beta and lambda must be >= 0");
        require(F1 >= 1 && D >= 1 && F2 >= 1 && kernel1 >= 1 && kernel2 >= 1, ErrorKind::config,
                "model: encoder sizes must be >= 1");
        require(pool1 >= 1 && pool2 >= 1 && width2() >= 1, ErrorKind::config,
                "model: pooling leaves no samples (T=" + std::to_string(T) + ")");
        require(dropout >= 0.0 && dropout < 1.0, ErrorKind::config, "model: dropout must lie in [0,1)");
        require(classifier_hidden.size() == 2 && classifier_hidden[0] >= 1 && classifier_hidden[1] >= 1,
                ErrorKind::config, "model: classifier_hidden must hold two positive widths");
    }

    /// 62 channels x 400 samples, 15 participants, d_z = 1000.
    static ModelConfig reference() { return {}; }

    /// Geometry of the default synthetic benchmark.
    static ModelConfig benchmark() {
        ModelConfig c;
        c.C = 8;
        c.P = 5;
        c.d_z = 32;
        return c;
    }

    /// Small enough for exhaustive finite-difference checks.
    static ModelConfig miniature() {
        ModelConfig c;
        c.C = 4;
        c.T = 32;
        c.L = 3;
        c.P = 2;
        c.d_z = 8;
        c.F1 = 4;
        c.D = 2;
        c.F2 = 4;
        c.kernel1 = 8;
        c.kernel2 = 4;
        c.pool1 = 2;
        c.pool2 = 4;
        c.classifier_hidden = {16, 8};
        return c;
    }

    bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return {{"C", c.C},         {"T", c.T},         {"L", c.L},
            {"P", c.P},         {"d_z", c.d_z},     {"beta", c.beta},
            {"lambda", c.lambda}, {"F1", c.F1},     {"D", c.D},
            {"F2", c.F2},       {"kernel1", c.kernel1}, {"kernel2", c.kernel2},
            {"pool1", c.pool1}, {"pool2", c.pool2}, {"dropout", c.dropout},
            {"classifier_hidden", c.classifier_hidden}};
}

/// Unknown keys are rejected; absent keys keep the values of `base`.
inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {},
                                          const std::string& context = "model") {
    JsonFields f(j, context);
    f.opt("C", base.C).opt("T", base.T).opt("L", base.L).opt("P", base.P).opt("d_z", base.d_z);
    f.opt("beta", base.beta).opt("lambda", base.lambda);
    f.opt("F1", base.F1).opt("D", base.D).opt("F2", base.F2).opt("kernel1", base.kernel1);
    f.opt("kernel2", base.kernel2).opt("pool1", base.pool1).opt("pool2", base.pool2);
    f.opt("dropout", base.dropout).opt("classifier_hidden", base.classifier_hidden);
    f.finish();
    base.validate();
    return base;
}

// ---------------------------------------------------------------------------
// Losses (per sample)

/// Mean squared error over all entries.
template <class T>
double loss_reconstruction(std::span<const T> x, std::span<const T> x_hat) {
    require(x.size() == x_hat.size() && !x.empty(), ErrorKind::shape, "loss_reconstruction: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x_hat[i]) - static_cast<double>(x[i]);
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

template <class T>
double loss_reconstruction(const Matrix<T>& x, const Matrix<T>& x_hat) {
    require(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), ErrorKind::shape,
            "loss_reconstruction: shape mismatch");
    return loss_reconstruction<T>(std::span<const T>(x.data()), std::span<const T>(x_hat.data()));
}

/// KL(N(mu, exp(log_var)) || N(0, I)) = -1/2 sum(1 + log_var - mu^2 - exp(log_var)).
template <class T>
double loss_kl(std::span<const T> mu, std::span<const T> log_var) {
    require(mu.size() == log_var.size(), ErrorKind::shape, "loss_kl: length mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        const double m = mu[j], lv = log_var[j];
        require(std::isfinite(m) && std::isfinite(lv), ErrorKind::numeric, "loss_kl: non-finite input");
        s += 1.0 + lv - m * m - std::exp(lv);
    }
    return -0.5 * s;
}

/// Cross-entropy -log(max(p[y], 1e-12)).
template <class T>
double loss_classification(std::span<const T> probs, int y) {
    require(y >= 0 && static_cast<std::size_t>(y) < probs.size(), ErrorKind::precondition,
            "loss_classification: label " + std::to_string(y) + " out of range");
    return -std::log(std::max(static_cast<double>(probs[static_cast<std::size_t>(y)]), kProbFloor));
}

struct LossComponents {
    double recon = 0.0;
    double kl = 0.0;
    double cla = 0.0;
    double total = 0.0;
};

inline double combine(const LossComponents& c, double beta, double lambda) {
    return c.recon + beta * c.kl + lambda * c.cla;
}

// ---------------------------------------------------------------------------

template <class T>
struct LatentPosterior {
    std::vector<T> mu;
    std::vector<T> log_var;  // clamped to [kLogVarMin, kLogVarMax]
    std::vector<T> z;        // empty until reparameterized
};

/// Draws z = mu + exp(0.5 log_var) * eps with eps ~ N(0, I). log_var is
/// clamped before exponentiation.
template <class T>
LatentPosterior<T> reparameterize(LatentPosterior<T> post, Rng& rng) {
    require(post.mu.size() == post.log_var.size(), ErrorKind::shape, "reparameterize: length mismatch");
    post.z.resize(post.mu.size());
    for (std::size_t j = 0; j < post.mu.size(); ++j) {
        require(std::isfinite(static_cast<double>(post.mu[j])) && !std::isnan(static_cast<double>(post.log_var[j])),
                ErrorKind::numeric, "reparameterize: non-finite posterior");
        const double lv = std::clamp(static_cast<double>(post.log_var[j]), kLogVarMin, kLogVarMax);
        post.log_var[j] = static_cast<T>(lv);
        post.z[j] = static_cast<T>(post.mu[j] + std::exp(0.5 * lv) * rng.normal());
    }
    return post;
}

/// A batch in network layout.
template <class T>
struct Batch {
    nn::Tensor<T> x;  // [N, 1, C, T]
    std::vector<int> y;
    std::vector<int> p;

    std::size_t size() const { return y.size(); }
};

template <class T>
Batch<T> make_batch(const std::vector<const Trial*>& trials, std::size_t C, std::size_t Tn) {
    Batch<T> b;
    b.x = nn::Tensor<T>({trials.size(), 1, C, Tn});
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const Trial& t = *trials[i];
        require(t.x.rows() == C && t.x.cols() == Tn, ErrorKind::shape,
                "trial " + t.id + ": shape does not match the model (" + std::to_string(C) + "x" +
                    std::to_string(Tn) + ")");
        std::copy(t.x.data().begin(), t.x.data().end(), b.x.ptr() + i * C * Tn);
        b.y.push_back(t.y);
        b.p.push_back(t.p);
    }
    return b;
}

template <class T>
Batch<T> make_batch(const std::vector<Trial>& trials, std::size_t C, std::size_t Tn) {
    std::vector<const Trial*> ptrs;
    for (const auto& t : trials) ptrs.push_back(&t);
    return make_batch<T>(ptrs, C, Tn);
}

/// Everything recorded by a batched forward pass of the full objective.
template <class T>
struct ObjectivePass {
    LossComponents loss;
    nn::Tensor<T> mu, log_var_raw, log_var, eps, z;
    nn::Tensor<T> x_hat;  // [N, 1, C, T]
    nn::Tensor<T> probs;  // [N, L]
    nn::Tape<T> backbone, mu_head, lv_head, decoder, classifier;
};

template <class T>
class Eeg2Vec {
public:
    Eeg2Vec() = default;

    /// Fresh model; weights drawn from derive_seed(seed, "init").
    Eeg2Vec(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        build();
        Rng rng(derive_seed(seed, "init"));
        for (const auto* net : networks()) nn::init_params(*net, params_, rng);
        damp_decoder_init();
    }

    /// Wraps existing parameters (e.g. from a checkpoint).
    Eeg2Vec(const ModelConfig& cfg, nn::ParamStore<T> params) : cfg_(cfg) {
        cfg_.validate();
        build();
        nn::ParamStore<T> probe;
        Rng rng(0);
        for (const auto* net : networks()) nn::init_params(*net, probe, rng);
        require(probe.size() == params.size(), ErrorKind::format,
                "model: parameter count " + std::to_string(params.size()) + " does not match config (" +
                    std::to_string(probe.size()) + ")");
        for (const auto& e : probe.entries()) {
            require(params.contains(e.name), ErrorKind::format, "model: missing parameter " + e.name);
            require(params.value(e.name).shape == e.value.shape, ErrorKind::format,
                    "model: parameter " + e.name + " has shape " + nn::to_string(params.value(e.name).shape) +
                        ", expected " + nn::to_string(e.value.shape));
        }
        params_ = std::move(params);
    }

    const ModelConfig& config() const { return cfg_; }
    ModelConfig& config() { return cfg_; }
    const nn::ParamStore<T>& params() const { return params_; }
    nn::ParamStore<T>& params() { return params_; }

    const nn::Network& backbone() const { return backbone_; }
    const nn::Network& mu_head() const { return mu_head_; }
    const nn::Network& logvar_head() const { return lv_head_; }
    const nn::Network& decoder() const { return decoder_; }
    const nn::Network& classifier() const { return classifier_; }

    // -- batched inference (eval mode) ---------------------------------------

    /// mu and clamped log_var, each [N, d_z].
    std::pair<nn::Tensor<T>, nn::Tensor<T>> encode_batch(const nn::Tensor<T>& x) const {
        Rng unused(0);
        const auto h = nn::forward(backbone_, params_, x, nn::Mode::eval, unused).output;
        auto mu = nn::forward(mu_head_, params_, h, nn::Mode::eval, unused).output;
        auto lv = nn::forward(lv_head_, params_, h, nn::Mode::eval, unused).output;
        for (auto& v : lv.data) v = static_cast<T>(std::clamp(static_cast<double>(v), kLogVarMin, kLogVarMax));
        return {std::move(mu), std::move(lv)};
    }

    /// Decoder output [N, 1, C, T] for latent rows z [N, d_z] and labels.
    nn::Tensor<T> decode_batch(const nn::Tensor<T>& z, const std::vector<int>& y, const std::vector<int>& p) const {
        Rng unused(0);
        return nn::forward(decoder_, params_, decoder_input(z, y, p), nn::Mode::eval, unused).output;
    }

    /// Class probabilities [N, L].
    nn::Tensor<T> classify_batch(const nn::Tensor<T>& z) const {
        Rng unused(0);
        return nn::forward(classifier_, params_, z, nn::Mode::eval, unused).output;
    }

    // -- single-sample convenience -------------------------------------------

    LatentPosterior<T> encode(const Matrix<T>& x) const {
        require(x.rows() == cfg_.C && x.cols() == cfg_.T, ErrorKind::shape,
                "encode: input " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                    " does not match model " + std::to_string(cfg_.C) + "x" + std::to_string(cfg_.T));
        auto [mu, lv] = encode_batch(nn::Tensor<T>({1, 1, cfg_.C, cfg_.T}, x.data()));
        return {mu.data, lv.data, {}};
    }

    Matrix<T> decode(const std::vector<T>& z, int y, int p) const {
        require(z.size() == cfg_.d_z, ErrorKind::shape, "decode: z has length " + std::to_string(z.size()) +
                                                            ", expected " + std::to_string(cfg_.d_z));
        auto out = decode_batch(nn::Tensor<T>({1, cfg_.d_z}, z), {y}, {p});
        return Matrix<T>(cfg_.C, cfg_.T, std::move(out.data));
    }

    std::vector<T> classify(const std::vector<T>& z) const {
        require(z.size() == cfg_.d_z, ErrorKind::shape, "classify: z has length " + std::to_string(z.size()) +
                                                            ", expected " + std::to_string(cfg_.d_z));
        return classify_batch(nn::Tensor<T>({1, cfg_.d_z}, z)).data;
    }

    // -- objective -----------------------------------------------------------

    /// Full forward pass of recon + beta KL + lambda CE over a batch. In train
    /// mode dropout is active and batchnorm uses batch statistics. `rng`
    /// supplies dropout masks and the reparameterization noise.
    ObjectivePass<T> objective(const Batch<T>& batch, nn::Mode mode, Rng& rng) const {
        const std::size_t n = batch.size();
        require(n >= 1, ErrorKind::precondition, "objective: empty batch");
        ObjectivePass<T> r;
        auto fb = nn::forward(backbone_, params_, batch.x, mode, rng);
        auto fm = nn::forward(mu_head_, params_, fb.output, mode, rng);
        auto fl = nn::forward(lv_head_, params_, fb.output, mode, rng);
        r.mu = std::move(fm.output);
        r.log_var_raw = std::move(fl.output);
        r.log_var = r.log_var_raw;
        for (auto& v : r.log_var.data) v = static_cast<T>(std::clamp(static_cast<double>(v), kLogVarMin, kLogVarMax));
        r.eps = nn::Tensor<T>(r.mu.shape);
        r.z = nn::Tensor<T>(r.mu.shape);
        for (std::size_t i = 0; i < r.z.size(); ++i) {
            r.eps[i] = static_cast<T>(rng.normal());
            r.z[i] = r.mu[i] + std::exp(T{0.5} * r.log_var[i]) * r.eps[i];
        }
        auto fd = nn::forward(decoder_, params_, decoder_input(r.z, batch.y, batch.p), mode, rng);
        auto fc = nn::forward(classifier_, params_, r.z, mode, rng);
        r.x_hat = std::move(fd.output);
        r.probs = std::move(fc.output);

        const std::size_t ct = cfg_.C * cfg_.T, dz = cfg_.d_z, L = cfg_.L;
        for (std::size_t b = 0; b < n; ++b) {
            r.loss.recon += loss_reconstruction<T>(std::span<const T>(batch.x.ptr() + b * ct, ct),
                                                   std::span<const T>(r.x_hat.ptr() + b * ct, ct));
            r.loss.kl += loss_kl<T>(std::span<const T>(r.mu.ptr() + b * dz, dz),
                                    std::span<const T>(r.log_var.ptr() + b * dz, dz));
            r.loss.cla += loss_classification<T>(std::span<const T>(r.probs.ptr() + b * L, L), batch.y[b]);
        }
        const double inv = 1.0 / static_cast<double>(n);
        r.loss.recon *= inv;
        r.loss.kl *= inv;
        r.loss.cla *= inv;
        r.loss.total = combine(r.loss, cfg_.beta, cfg_.lambda);
        require(std::isfinite(r.loss.total), ErrorKind::numeric, "objective: non-finite loss");
        r.backbone = std::move(fb.tape);
        r.mu_head = std::move(fm.tape);
        r.lv_head = std::move(fl.tape);
        r.decoder = std::move(fd.tape);
        r.classifier = std::move(fc.tape);
        return r;
    }

    /// Accumulates d(total)/d(params) for a train-mode pass into params().grad.
    void backward(const ObjectivePass<T>& pass, const Batch<T>& batch) {
        const std::size_t n = batch.size(), ct = cfg_.C * cfg_.T, dz = cfg_.d_z, L = cfg_.L;
        const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
        const T beta = static_cast<T>(cfg_.beta), lambda = static_cast<T>(cfg_.lambda);

        // Reconstruction: d/dx_hat of mean_b mean_ct (x_hat - x)^2.
        nn::Tensor<T> g_xhat(pass.x_hat.shape);
        const T rscale = static_cast<T>(2.0 / static_cast<double>(ct)) * inv_n;
        for (std::size_t i = 0; i < g_xhat.size(); ++i) g_xhat[i] = rscale * (pass.x_hat[i] - batch.x[i]);
        const auto g_dec_in = nn::backward(decoder_, pass.decoder, g_xhat, params_);

        // Classification: d/dprobs of mean_b -log(max(p_y, floor)).
        nn::Tensor<T> g_probs(pass.probs.shape);
        for (std::size_t b = 0; b < n; ++b) {
            const T py = pass.probs[b * L + static_cast<std::size_t>(batch.y[b])];
            if (static_cast<double>(py) > kProbFloor)
                g_probs[b * L + static_cast<std::size_t>(batch.y[b])] = -lambda * inv_n / py;
        }
        const bool need_classifier = cfg_.lambda != 0.0;
        nn::Tensor<T> g_z_cla;
        if (need_classifier) g_z_cla = nn::backward(classifier_, pass.classifier, g_probs, params_);

        const std::size_t din = cfg_.decoder_input();
        nn::Tensor<T> g_mu(pass.mu.shape), g_lv(pass.mu.shape);
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t j = 0; j < dz; ++j) {
                const std::size_t i = b * dz + j;
                T gz = g_dec_in[b * din + j];
                if (need_classifier) gz += g_z_cla[i];
                const T sigma = std::exp(T{0.5} * pass.log_var[i]);
                g_mu[i] = gz + beta * inv_n * pass.mu[i];
                T glv = gz * T{0.5} * sigma * pass.eps[i] +
                        beta * inv_n * T{0.5} * (std::exp(pass.log_var[i]) - T{1});
                const double raw = pass.log_var_raw[i];
                if (raw < kLogVarMin || raw > kLogVarMax) glv = T{0};
                g_lv[i] = glv;
            }
        auto g_h = nn::backward(mu_head_, pass.mu_head, g_mu, params_);
        const auto g_h2 = nn::backward(lv_head_, pass.lv_head, g_lv, params_);
        for (std::size_t i = 0; i < g_h.size(); ++i) g_h[i] += g_h2[i];
        nn::backward(backbone_, pass.backbone, g_h, params_, false);
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// batchnorm statistics.
    void update_running_stats(const ObjectivePass<T>& pass) {
        nn::update_running_stats(backbone_, pass.backbone, params_);
        nn::update_running_stats(decoder_, pass.decoder, params_);
    }

    /// Loss of one batch with gradients left in params().grad.
    LossComponents loss_and_grad(const Batch<T>& batch, Rng& rng) {
        const auto pass = objective(batch, nn::Mode::train, rng);
        params_.zero_grad();
        backward(pass, batch);
        return pass.loss;
    }

    /// One optimizer step on a batch: gradients, Adam update, running stats.
    LossComponents train_step(const Batch<T>& batch, nn::AdamState<T>& adam, Rng& rng) {
        const auto pass = objective(batch, nn::Mode::train, rng);
        params_.zero_grad();
        backward(pass, batch);
        nn::adam_step(params_, adam);
        update_running_stats(pass);
        return pass.loss;
    }

    /// Scales two groups of freshly drawn decoder weights by
    /// kDecoderInitGain: the latent columns of the input layer and the output
    /// convolution. At full fan-in scale the untrained decoder emits sigmoid
    /// of unit-variance noise driven by z, and training spends its first
    /// hundred or so epochs undoing that before the label-conditioned signal
    /// emerges. Damped, the decoder starts near a constant output that
    /// depends on (y, p) and admits z as the posterior becomes informative.
    void damp_decoder_init() {
        auto& w_in = params_.value(decoder_.key(0) + "w");
        const std::size_t din = cfg_.decoder_input();
        for (std::size_t o = 0; o < w_in.size() / din; ++o)
            for (std::size_t i = 0; i < cfg_.d_z; ++i) w_in[o * din + i] *= static_cast<T>(kDecoderInitGain);
        for (auto& v : params_.value(decoder_.key(decoder_.layers.size() - 2) + "w").data)
            v *= static_cast<T>(kDecoderInitGain);
    }

    nn::Tensor<T> decoder_input(const nn::Tensor<T>& z, const std::vector<int>& y, const std::vector<int>& p) const {
        require(z.rank() == 2 && z.dim(1) == cfg_.d_z, ErrorKind::shape,
                "decoder: latent batch has shape " + nn::to_string(z.shape));
        const std::size_t n = z.dim(0), din = cfg_.decoder_input();
        require(y.size() == n && p.size() == n, ErrorKind::shape, "decoder: label count does not match batch");
        nn::Tensor<T> in({n, din});
        for (std::size_t b = 0; b < n; ++b) {
            std::copy(z.ptr() + b * cfg_.d_z, z.ptr() + (b + 1) * cfg_.d_z, in.ptr() + b * din);
            require(y[b] >= 0 && static_cast<std::size_t>(y[b]) < cfg_.L, ErrorKind::precondition,
                    "decoder: class " + std::to_string(y[b]) + " out of range");
            require(p[b] >= 0 && static_cast<std::size_t>(p[b]) < cfg_.P, ErrorKind::precondition,
                    "decoder: participant " + std::to_string(p[b]) + " out of range");
            in[b * din + cfg_.d_z + static_cast<std::size_t>(y[b])] = T{1};
            in[b * din + cfg_.d_z + cfg_.L + static_cast<std::size_t>(p[b])] = T{1};
        }
        return in;
    }

private:
    std::vector<const nn::Network*> networks() const {
        return {&backbone_, &mu_head_, &lv_head_, &decoder_, &classifier_};
    }

    void build() {
        using namespace nn;
        const auto& c = cfg_;
        const std::size_t fd = c.F1 * c.D;
        backbone_ = {"enc/backbone",
                     {1, c.C, c.T},
                     {TemporalConv{{1, c.F1, c.kernel1}}, BatchNorm{c.F1}, DepthwiseSpatialConv{{c.F1, c.D, c.C}},
                      BatchNorm{fd}, Activation{ActKind::elu}, AvgPool{c.pool1}, Dropout{c.dropout},
                      SeparableConv{{fd, c.F2, c.kernel2}}, BatchNorm{c.F2}, Activation{ActKind::elu},
                      AvgPool{c.pool2}, Dropout{c.dropout}, Reshape{{c.flat()}}}};
        mu_head_ = {"enc/mu", {c.flat()}, {Dense{c.flat(), c.d_z}}};
        lv_head_ = {"enc/logvar", {c.flat()}, {Dense{c.flat(), c.d_z}}};
        decoder_ = {"dec",
                    {c.decoder_input()},
                    {Dense{c.decoder_input(), c.flat()}, Activation{ActKind::elu}, Reshape{{c.F2, 1, c.width2()}},
                     Upsample{c.pool2, c.width1()}, TransposedSeparableConv{{fd, c.F2, c.kernel2}}, BatchNorm{fd},
                     Activation{ActKind::elu}, Upsample{c.pool1, c.T}, TransposedDepthwiseSpatialConv{{c.F1, c.D, c.C}},
                     BatchNorm{c.F1}, TransposedTemporalConv{{1, c.F1, c.kernel1}}, Activation{ActKind::sigmoid}}};
        const auto h1 = c.classifier_hidden.at(0), h2 = c.classifier_hidden.at(1);
        classifier_ = {"cla",
                       {c.d_z},
                       {Dense{c.d_z, h1}, Activation{ActKind::elu}, Dense{h1, h2}, Activation{ActKind::elu},
                        Dense{h2, c.L}, Activation{ActKind::softmax}}};
    }

    ModelConfig cfg_;
    nn::Network backbone_, mu_head_, lv_head_, decoder_, classifier_;
    nn::ParamStore<T> params_;
};

/// Latent compression ratio d_z / (C * T).
inline double compression_ratio(const ModelConfig& c) {
    return static_cast<double>(c.d_z) / static_cast<double>(c.C * c.T);
}

}  // namespace eeg2vec
