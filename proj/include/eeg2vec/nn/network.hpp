#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/nn/layers.hpp"

namespace eeg2vec::nn {

/// A named chain of layers. Parameters live in a ParamStore under
/// "<prefix>/<layer index>.<param>".
struct Network {
    std::string prefix;
    Shape input_shape;  // without the batch dimension
    std::vector<LayerSpec> layers;

    std::string key(std::size_t layer) const { return prefix + "/" + std::to_string(layer) + "."; }
};

/// Output shape for a batched input, checking every layer. Errors name the
/// offending layer index.
inline Shape output_shape(const Network& net, const Shape& batched_input) {
    Shape s = batched_input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        try {
            s = std::visit([&](const auto& layer) { return layer.output_shape(s); }, net.layers[i]);
        } catch (const Error& e) {
            fail(e.kind(), net.prefix + " layer " + std::to_string(i) + " (" + kind_name(net.layers[i]) +
                               "): " + e.what());
        }
    }
    return s;
}

inline Shape batched(std::size_t n, const Shape& tail) {
    Shape s{n};
    s.insert(s.end(), tail.begin(), tail.end());
    return s;
}

/// Declares (and initializes) every parameter of the network. Weights get a
/// truncated normal with std 1/sqrt(fan_in); batchnorm gamma = 1, beta = 0.
template <class T>
void init_params(const Network& net, ParamStore<T>& ps, Rng& rng) {
    output_shape(net, batched(1, net.input_shape));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto decls = std::visit([](const auto& layer) { return layer.params(); }, net.layers[i]);
        for (const auto& d : decls) {
            Tensor<T>& v = ps.add(net.key(i) + d.name, d.shape, d.trainable);
            switch (d.init) {
                case Init::zeros: v.fill(T{0}); break;
                case Init::ones: v.fill(T{1}); break;
                case Init::fan_in_normal: {
                    const double sd = 1.0 / std::sqrt(static_cast<double>(d.fan_in));
                    for (auto& e : v.data) e = static_cast<T>(sd * rng.truncated_normal());
                    break;
                }
            }
        }
    }
}

template <class T>
struct Tape {
    Mode mode = Mode::eval;
    Shape input_shape;
    Shape output_shape;
    std::vector<LayerCache<T>> caches;
};

template <class T>
struct ForwardResult {
    Tensor<T> output;
    Tape<T> tape;
};

template <class T>
ForwardResult<T> forward(const Network& net, const ParamStore<T>& ps, const Tensor<T>& input, Mode mode,
                         Rng& rng) {
    const Shape expected = batched(input.rank() ? input.dim(0) : 0, net.input_shape);
    require(input.shape == expected, ErrorKind::shape,
            net.prefix + ": input shape " + to_string(input.shape) + " does not match declared " +
                to_string(expected));
    ForwardResult<T> r;
    r.tape.mode = mode;
    r.tape.input_shape = input.shape;
    r.tape.caches.resize(net.layers.size());
    Tensor<T> x = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        try {
            x = std::visit(
                [&](const auto& layer) { return layer.forward(x, ps, net.key(i), mode, rng, r.tape.caches[i]); },
                net.layers[i]);
        } catch (const Error& e) {
            fail(e.kind(), net.prefix + " layer " + std::to_string(i) + " (" + kind_name(net.layers[i]) +
                               "): " + e.what());
        }
    }
    r.tape.output_shape = x.shape;
    r.output = std::move(x);
    return r;
}

/// Accumulates parameter gradients into `ps` and returns the gradient with
/// respect to the network input (empty when need_input_grad is false).
template <class T>
Tensor<T> backward(const Network& net, const Tape<T>& tape, const Tensor<T>& output_grad, ParamStore<T>& ps,
                   bool need_input_grad = true) {
    require(tape.mode == Mode::train, ErrorKind::precondition,
            net.prefix + ": backward requires a tape recorded in train mode");
    require(tape.caches.size() == net.layers.size(), ErrorKind::precondition,
            net.prefix + ": tape does not belong to this network");
    require(output_grad.shape == tape.output_shape, ErrorKind::shape,
            net.prefix + ": output gradient shape " + to_string(output_grad.shape) + " does not match output " +
                to_string(tape.output_shape));
    Tensor<T> g = output_grad;
    for (std::size_t i = net.layers.size(); i-- > 0;) {
        const bool need = need_input_grad || i > 0;
        g = std::visit([&](const auto& layer) { return layer.backward(g, tape.caches[i], ps, net.key(i), need); },
                       net.layers[i]);
    }
    if (net.layers.empty()) return g;
    return need_input_grad ? g : Tensor<T>{};
}

/// Folds the batch statistics recorded on a train-mode tape into the
/// batchnorm running statistics: running = m * running + (1 - m) * batch.
template <class T>
void update_running_stats(const Network& net, const Tape<T>& tape, ParamStore<T>& ps) {
    if (tape.mode != Mode::train) return;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto* bn = std::get_if<BatchNorm>(&net.layers[i]);
        if (!bn) continue;
        auto& rm = ps.value(net.key(i) + "running_mean");
        auto& rv = ps.value(net.key(i) + "running_var");
        const auto& c = tape.caches[i];
        for (std::size_t ch = 0; ch < bn->channels; ++ch) {
            rm[ch] = static_cast<T>(bn->momentum * rm[ch] + (1.0 - bn->momentum) * c.mean[ch]);
            rv[ch] = static_cast<T>(bn->momentum * rv[ch] + (1.0 - bn->momentum) * c.var[ch]);
        }
    }
}

}  // namespace eeg2vec::nn
