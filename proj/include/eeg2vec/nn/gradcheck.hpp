#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/nn/param_store.hpp"

namespace eeg2vec::nn {

/// Central-difference gradient (L(p+e) - L(p-e)) / 2e for every trainable
/// coordinate. Returns one tensor per store entry (zeros for non-trainable).
template <class T>
std::vector<Tensor<T>> finite_difference_grad(const std::function<double(const ParamStore<T>&)>& loss_fn,
                                              ParamStore<T> params, double epsilon) {
    std::vector<Tensor<T>> out;
    for (auto& e : params.entries()) {
        Tensor<T> g(e.value.shape);
        if (e.trainable) {
            for (std::size_t j = 0; j < e.value.size(); ++j) {
                const T orig = e.value[j];
                e.value[j] = static_cast<T>(orig + epsilon);
                const double up = loss_fn(params);
                e.value[j] = static_cast<T>(orig - epsilon);
                const double down = loss_fn(params);
                e.value[j] = orig;
                require(std::isfinite(up) && std::isfinite(down), ErrorKind::numeric,
                        "finite_difference_grad: non-finite loss perturbing " + e.name);
                g[j] = static_cast<T>((up - down) / (2.0 * epsilon));
            }
        }
        out.push_back(std::move(g));
    }
    return out;
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// max |g_analytic - g_fd| / (|g_fd| + floor) over all trainable coordinates.
/// Some coordinates have an exactly zero gradient (a batch-norm shift that a
/// later batch norm subtracts out), and their central difference is roundoff
/// of order 1e-11. The default floor keeps those from dominating the maximum.
template <class T>
GradCheckResult compare_gradients(const ParamStore<T>& analytic, const std::vector<Tensor<T>>& numeric,
                                  double floor = 1e-6) {
    GradCheckResult r;
    const auto& entries = analytic.entries();
    require(entries.size() == numeric.size(), ErrorKind::shape, "compare_gradients: entry count mismatch");
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (!entries[i].trainable) continue;
        for (std::size_t j = 0; j < entries[i].grad.size(); ++j) {
            const double a = entries[i].grad[j];
            const double n = numeric[i][j];
            const double rel = std::abs(a - n) / (std::abs(n) + floor);
            ++r.checked;
            if (rel > r.max_relative_error) {
                r.max_relative_error = rel;
                r.worst_param = entries[i].name;
                r.worst_index = j;
            }
        }
    }
    return r;
}

}  // namespace eeg2vec::nn
