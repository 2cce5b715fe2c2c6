#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "eeg2vec/error.hpp"

namespace eeg2vec::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

/// Dense row-major tensor. Batched activations carry the batch as dim 0;
/// convolutional activations are [N, channels, height(electrodes), width(time)].
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T{}) : shape(std::move(s)), data(element_count(shape), fill) {}
    Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        require(data.size() == element_count(shape), ErrorKind::shape,
                "tensor data size " + std::to_string(data.size()) + " does not match shape " +
                    nn::to_string(shape));
    }

    std::size_t size() const noexcept { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const noexcept { return shape.size(); }
    T* ptr() noexcept { return data.data(); }
    const T* ptr() const noexcept { return data.data(); }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <class U>
    Tensor<U> cast() const {
        return Tensor<U>(shape, std::vector<U>(data.begin(), data.end()));
    }

    bool operator==(const Tensor&) const = default;
};

}  // namespace eeg2vec::nn
