#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/nn/param_store.hpp"

namespace eeg2vec::nn {

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;

    bool operator==(const AdamHyper&) const = default;
};

/// First/second moments per parameter entry (same order as the store).
/// Non-trainable entries keep empty moments.
template <class T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    static AdamState initialized_for(const ParamStore<T>& ps, AdamHyper hyper = {}) {
        AdamState s;
        s.hyper = hyper;
        for (const auto& e : ps.entries()) {
            s.m.emplace_back(e.trainable ? e.value.shape : Shape{0});
            s.v.emplace_back(e.trainable ? e.value.shape : Shape{0});
        }
        return s;
    }

    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update from the gradients held in `ps`.
/// Throws (naming the parameter) if any gradient is non-finite; in that case
/// no parameter is modified.
template <class T>
void adam_step(ParamStore<T>& ps, AdamState<T>& state) {
    auto& entries = ps.entries();
    require(state.m.size() == entries.size() && state.v.size() == entries.size(), ErrorKind::precondition,
            "adam: state not initialized for this parameter store");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (!e.trainable) continue;
        require(state.m[i].shape == e.value.shape && state.v[i].shape == e.value.shape, ErrorKind::shape,
                "adam: moment shape mismatch for " + e.name);
        for (T g : e.grad.data)
            require(std::isfinite(static_cast<double>(g)), ErrorKind::numeric, "adam: non-finite gradient in " + e.name);
    }
    ++state.step;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
    const T step_size = static_cast<T>(h.learning_rate / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(h.epsilon);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        if (!e.trainable) continue;
        T* p = e.value.ptr();
        const T* g = e.grad.ptr();
        T* m = state.m[i].ptr();
        T* v = state.v[i].ptr();
        for (std::size_t j = 0; j < e.value.size(); ++j) {
            m[j] = b1 * m[j] + (T{1} - b1) * g[j];
            v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
            p[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
        }
    }
}

}  // namespace eeg2vec::nn
