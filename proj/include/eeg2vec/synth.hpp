#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "eeg2vec/dataio.hpp"
#include "eeg2vec/error.hpp"
#include "eeg2vec/model.hpp"
#include "eeg2vec/rng.hpp"

namespace eeg2vec {

enum class GenerationMode { from_prior, from_reference };

struct GenerationRequest {
    GenerationMode mode = GenerationMode::from_prior;
    int y_target = 0;
    int p_target = 0;
    std::size_t count = 1;
    std::uint64_t seed = 0;
    std::vector<std::string> reference_ids;  // from_reference only

    void validate(const ModelConfig& cfg) const {
        require(count >= 1, ErrorKind::precondition, "generate: count must be >= 1");
        require(y_target >= 0 && static_cast<std::size_t>(y_target) < cfg.L, ErrorKind::precondition,
                "generate: class " + std::to_string(y_target) + " out of range");
        require(p_target >= 0 && static_cast<std::size_t>(p_target) < cfg.P, ErrorKind::precondition,
                "generate: participant " + std::to_string(p_target) + " out of range");
        require((mode == GenerationMode::from_reference) == !reference_ids.empty(), ErrorKind::precondition,
                "generate: reference ids are required for, and only for, from-reference mode");
    }
};

inline std::string synthetic_id(const char* tag, std::uint64_t seed, int y, int p, std::size_t i) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s-%016llx-y%d-p%02d-%04zu", tag, static_cast<unsigned long long>(seed), y, p, i);
    return buf;
}

/// Decodes `count` draws z ~ N(0, I) under (y_target, p_target). Latents are
/// drawn from derive_seed(seed, "prior").
template <class T>
std::vector<Trial> generate_from_prior(const GenerationRequest& req, const Eeg2Vec<T>& model, double fs = 200.0) {
    const auto& cfg = model.config();
    req.validate(cfg);
    require(req.mode == GenerationMode::from_prior, ErrorKind::precondition,
            "generate_from_prior: request is not in from-prior mode");
    Rng rng(derive_seed(req.seed, "prior"));
    nn::Tensor<T> z({req.count, cfg.d_z});
    for (auto& v : z.data) v = static_cast<T>(rng.normal());
    const auto x = model.decode_batch(z, std::vector<int>(req.count, req.y_target),
                                      std::vector<int>(req.count, req.p_target));
    std::vector<Trial> out;
    const std::size_t ct = cfg.C * cfg.T;
    for (std::size_t i = 0; i < req.count; ++i) {
        Trial t;
        t.id = synthetic_id("prior", req.seed, req.y_target, req.p_target, i);
        t.x = Matrix<float>(cfg.C, cfg.T, std::vector<float>(x.ptr() + i * ct, x.ptr() + (i + 1) * ct));
        t.y = req.y_target;
        t.p = req.p_target;
        t.fs = fs;
        t.synthetic = true;
        out.push_back(std::move(t));
    }
    return out;
}

/// Encodes the reference, samples z from its posterior and decodes under the
/// requested labels. Keeping the reference's own labels reconstructs it;
/// changing only y (or only p) performs a label (participant) swap.
template <class T>
Trial generate_from_reference(const Trial& reference, int y_target, int p_target, const Eeg2Vec<T>& model, Rng& rng) {
    const auto& cfg = model.config();
    GenerationRequest check{GenerationMode::from_reference, y_target, p_target, 1, 0, {reference.id}};
    check.validate(cfg);
    const auto post = reparameterize(model.encode(reference.x.template cast<T>()), rng);
    Trial t;
    t.id = reference.id + "-as-y" + std::to_string(y_target) + "-p" + std::to_string(p_target);
    t.x = model.decode(post.z, y_target, p_target).template cast<float>();
    t.y = y_target;
    t.p = p_target;
    t.fs = reference.fs;
    t.synthetic = true;
    return t;
}

/// Largest-remainder apportionment of `total` items proportionally to
/// `weights`; ties go to the lower index. Each share is within 1 of exact.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights) {
    const double sum = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
    std::vector<std::size_t> out(weights.size(), 0);
    if (total == 0 || sum == 0.0) return out;
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * static_cast<double>(weights[i]) / sum;
        out[i] = static_cast<std::size_t>(std::floor(exact));
        given += out[i];
        rem.push_back({exact - static_cast<double>(out[i]), i});
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[rem[k % rem.size()].second];
    return out;
}

/// `per_class` prior samples for every class, spread evenly over
/// participants (largest remainder).
template <class T>
std::vector<Trial> prior_samples_per_class(const Eeg2Vec<T>& model, std::size_t per_class, std::uint64_t seed,
                                           double fs = 200.0) {
    const auto& m = model.config();
    std::vector<Trial> out;
    const auto quota = apportion(per_class, std::vector<std::size_t>(m.P, 1));
    for (std::size_t y = 0; y < m.L; ++y)
        for (std::size_t p = 0; p < m.P; ++p) {
            if (quota[p] == 0) continue;
            GenerationRequest req;
            req.y_target = static_cast<int>(y);
            req.p_target = static_cast<int>(p);
            req.count = quota[p];
            req.seed = derive_seed(seed, "class-samples", y * 1000003ULL + p);
            auto g = generate_from_prior(req, model, fs);
            out.insert(out.end(), g.begin(), g.end());
        }
    return out;
}

struct AugmentedSet {
    std::vector<Trial> trials;  // shuffled union
    std::size_t n_real = 0;
    std::size_t n_synthetic = 0;
};

/// Real trials plus round(fraction * |real|) prior samples. Synthetic counts
/// follow the real class distribution (largest remainder), and within each
/// class the real participant distribution.
template <class T>
AugmentedSet build_augmented_set(const std::vector<Trial>& real, double fraction, const Eeg2Vec<T>& model,
                                 std::uint64_t seed) {
    require(fraction >= 0.0 && std::isfinite(fraction), ErrorKind::precondition,
            "augment: fraction must be finite and >= 0");
    require(!real.empty(), ErrorKind::precondition, "augment: empty real set");
    const auto& cfg = model.config();
    AugmentedSet out;
    out.trials = real;
    out.n_real = real.size();
    const auto n_syn = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(real.size())));

    std::vector<std::size_t> per_class(cfg.L, 0);
    std::map<int, std::vector<std::size_t>> per_participant;  // class -> counts over participants
    for (const auto& t : real) {
        require(t.y >= 0 && static_cast<std::size_t>(t.y) < cfg.L && t.p >= 0 && static_cast<std::size_t>(t.p) < cfg.P,
                ErrorKind::precondition, "augment: trial " + t.id + " has labels outside the model range");
        ++per_class[static_cast<std::size_t>(t.y)];
        auto& v = per_participant[t.y];
        v.resize(cfg.P, 0);
        ++v[static_cast<std::size_t>(t.p)];
    }
    const auto class_quota = apportion(n_syn, per_class);
    for (std::size_t y = 0; y < cfg.L; ++y) {
        if (class_quota[y] == 0) continue;
        const auto quota = apportion(class_quota[y], per_participant[static_cast<int>(y)]);
        for (std::size_t p = 0; p < cfg.P; ++p) {
            if (quota[p] == 0) continue;
            GenerationRequest req;
            req.y_target = static_cast<int>(y);
            req.p_target = static_cast<int>(p);
            req.count = quota[p];
            req.seed = derive_seed(seed, "augment-cell", y * 1000003ULL + p);
            auto gen = generate_from_prior(req, model, real.front().fs);
            out.trials.insert(out.trials.end(), gen.begin(), gen.end());
            out.n_synthetic += gen.size();
        }
    }
    Rng rng(derive_seed(seed, "augment-shuffle"));
    rng.shuffle(out.trials.begin(), out.trials.end());
    return out;
}

}  // namespace eeg2vec
