#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/nn/tensor.hpp"

namespace eeg2vec::nn {

/// Named parameters in insertion order, each with a same-shaped gradient slot.
/// Non-trainable entries (batch-norm running statistics) are stored and
/// checkpointed but skipped by the optimizer.
template <class T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> grad;
        bool trainable = true;
    };

    Tensor<T>& add(const std::string& name, const Shape& shape, bool trainable = true) {
        require(!index_.contains(name), ErrorKind::precondition, "duplicate parameter name " + name);
        index_.emplace(name, entries_.size());
        entries_.push_back({name, Tensor<T>(shape), Tensor<T>(shape), trainable});
        return entries_.back().value;
    }

    bool contains(const std::string& name) const { return index_.contains(name); }

    Entry& entry(const std::string& name) { return entries_[lookup(name)]; }
    const Entry& entry(const std::string& name) const { return entries_[lookup(name)]; }

    Tensor<T>& value(const std::string& name) { return entry(name).value; }
    const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
    Tensor<T>& grad(const std::string& name) { return entry(name).grad; }
    const Tensor<T>& grad(const std::string& name) const { return entry(name).grad; }

    std::vector<Entry>& entries() noexcept { return entries_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    void zero_grad() {
        for (auto& e : entries_) e.grad.fill(T{0});
    }

    std::size_t trainable_scalar_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.trainable) n += e.value.size();
        return n;
    }

    /// Same names/shapes/values at another precision; gradients zeroed.
    template <class U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries_) out.add(e.name, e.value.shape, e.trainable) = e.value.template cast<U>();
        return out;
    }

    /// Values equal (names, shapes, trainable flags and data); gradients ignored.
    bool same_values(const ParamStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const auto& a = entries_[i];
            const auto& b = other.entries_[i];
            if (a.name != b.name || a.trainable != b.trainable || !(a.value == b.value)) return false;
        }
        return true;
    }

private:
    std::size_t lookup(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), ErrorKind::precondition, "unknown parameter " + name);
        return it->second;
    }

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace eeg2vec::nn
