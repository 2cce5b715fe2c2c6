#pragma once

// Checkpoint container (little-endian):
//   magic "E2VCKPT\0" | u32 version | u32 metadata_len | metadata (UTF-8 JSON)
//   u32 n_params | n_params x { u16 name_len | name | u8 trainable | u8 ndim |
//                               u64 dims[ndim] | f32 values[prod(dims)] }
//   u8 has_adam | [u64 step | f64 lr | f64 beta1 | f64 beta2 | f64 eps |
//                  per trainable param: f32 m[..] | f32 v[..]]

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/nn/adam.hpp"
#include "eeg2vec/nn/param_store.hpp"

namespace eeg2vec::nn {

inline constexpr char kCheckpointMagic[8] = {'E', '2', 'V', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
struct Checkpoint {
    std::string metadata;
    ParamStore<T> params;
    std::optional<AdamState<T>> adam;
};

namespace detail {

class ByteWriter {
public:
    template <class V>
    void put(V v) {
        char buf[sizeof(V)];
        std::memcpy(buf, &v, sizeof(V));
        out_.append(buf, sizeof(V));
    }
    void bytes(const std::string& s) { out_ += s; }
    template <class T>
    void floats(const Tensor<T>& t) {
        for (T v : t.data) put(static_cast<float>(v));
    }
    const std::string& str() const { return out_; }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string data) : data_(std::move(data)) {}
    template <class V>
    V get() {
        need(sizeof(V));
        V v;
        std::memcpy(&v, data_.data() + pos_, sizeof(V));
        pos_ += sizeof(V);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <class T>
    void floats(Tensor<T>& t) {
        for (auto& v : t.data) v = static_cast<T>(get<float>());
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        require(pos_ + n <= data_.size(), ErrorKind::format, "checkpoint: truncated file");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
std::string serialize_checkpoint(const Checkpoint<T>& ck) {
    detail::ByteWriter w;
    w.bytes(std::string(kCheckpointMagic, sizeof(kCheckpointMagic)));
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.metadata.size()));
    w.bytes(ck.metadata);
    const auto& entries = ck.params.entries();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
        w.bytes(e.name);
        w.put<std::uint8_t>(e.trainable ? 1 : 0);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(e.value.rank()));
        for (auto d : e.value.shape) w.put<std::uint64_t>(d);
        w.floats(e.value);
    }
    w.put<std::uint8_t>(ck.adam ? 1 : 0);
    if (ck.adam) {
        const auto& a = *ck.adam;
        require(a.m.size() == entries.size(), ErrorKind::precondition, "checkpoint: adam state does not match params");
        w.put<std::uint64_t>(a.step);
        w.put<double>(a.hyper.learning_rate);
        w.put<double>(a.hyper.beta1);
        w.put<double>(a.hyper.beta2);
        w.put<double>(a.hyper.epsilon);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!entries[i].trainable) continue;
            w.floats(a.m[i]);
            w.floats(a.v[i]);
        }
    }
    return w.str();
}

template <class T>
Checkpoint<T> deserialize_checkpoint(std::string bytes) {
    detail::ByteReader r(std::move(bytes));
    require(r.bytes(sizeof(kCheckpointMagic)) == std::string(kCheckpointMagic, sizeof(kCheckpointMagic)),
            ErrorKind::format, "checkpoint: bad magic");
    const auto version = r.get<std::uint32_t>();
    require(version == kCheckpointVersion, ErrorKind::format,
            "checkpoint: unsupported version " + std::to_string(version));
    Checkpoint<T> ck;
    ck.metadata = r.bytes(r.get<std::uint32_t>());
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::string name = r.bytes(r.get<std::uint16_t>());
        const bool trainable = r.get<std::uint8_t>() != 0;
        const auto ndim = r.get<std::uint8_t>();
        Shape shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        r.floats(ck.params.add(name, shape, trainable));
    }
    if (r.get<std::uint8_t>() != 0) {
        AdamState<T> a = AdamState<T>::initialized_for(ck.params);
        a.step = r.get<std::uint64_t>();
        a.hyper.learning_rate = r.get<double>();
        a.hyper.beta1 = r.get<double>();
        a.hyper.beta2 = r.get<double>();
        a.hyper.epsilon = r.get<double>();
        for (std::size_t i = 0; i < ck.params.size(); ++i) {
            if (!ck.params.entries()[i].trainable) continue;
            r.floats(a.m[i]);
            r.floats(a.v[i]);
        }
        ck.adam = std::move(a);
    }
    require(r.done(), ErrorKind::format, "checkpoint: trailing bytes");
    return ck;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::string bytes = serialize_checkpoint(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint<T>(ss.str());
}

}  // namespace eeg2vec::nn
