#pragma once

// Run configuration shared by all CLI subcommands.
//
// A single top-level seed drives every random stream. Component seeds are
// derived as derive_seed(seed, <stream>) with the streams "benchmark",
// "split", "train", "generate" and "augment"; sections therefore reject a
// "seed" key of their own.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "eeg2vec/benchgen.hpp"
#include "eeg2vec/dsp.hpp"
#include "eeg2vec/error.hpp"
#include "eeg2vec/json_fields.hpp"
#include "eeg2vec/model.hpp"
#include "eeg2vec/rng.hpp"
#include "eeg2vec/train.hpp"

namespace eeg2vec {

inline constexpr int kRunConfigFormatVersion = 1;

struct SplitSection {
    double test_fraction = 0.1;
    std::size_t folds = 5;
    bool operator==(const SplitSection&) const = default;
};

struct EvaluateSection {
    std::string channel = "ch0";
    dsp::WelchParams welch;
    std::size_t generated_per_class = 30;  // prior samples per class for PSD checks
    bool operator==(const EvaluateSection&) const = default;
};

struct SweepSection {
    std::vector<double> betas{0.5, 1.0, 4.0};
    std::size_t fold = 0;
    bool operator==(const SweepSection&) const = default;
};

struct AugmentSection {
    std::vector<double> fractions{0.0, 0.05, 0.20};
    double lambda = 10.0;  // classifier weight of the retrained arms
    std::size_t fold = 0;  // fold providing train/val for generator and arms
    bool operator==(const AugmentSection&) const = default;
};

struct RunConfig {
    int format_version = kRunConfigFormatVersion;
    std::uint64_t seed = 1234;
    BenchmarkSpec benchmark;
    dsp::PreprocessConfig preprocess;
    SplitSection split;
    ModelConfig model = ModelConfig::benchmark();
    TrainConfig train;
    EvaluateSection evaluate;
    SweepSection sweep;
    AugmentSection augment;

    /// Benchmark-scale defaults (what `--config default` resolves to).
    static RunConfig defaults() { return {}; }

    /// Reference geometry (62 channels, 15 participants, d_z = 1000).
    static RunConfig reference() {
        RunConfig r;
        r.model = ModelConfig::reference();
        r.benchmark.C = 62;
        r.benchmark.P = 15;
        return r;
    }

    BenchmarkSpec resolved_benchmark() const {
        auto b = benchmark;
        b.seed = derive_seed(seed, "benchmark");
        return b;
    }
    TrainConfig resolved_train() const {
        auto t = train;
        t.seed = derive_seed(seed, "train");
        return t;
    }
    std::uint64_t split_seed() const { return derive_seed(seed, "split"); }
    std::uint64_t generate_seed() const { return derive_seed(seed, "generate"); }
    std::uint64_t augment_seed() const { return derive_seed(seed, "augment"); }

    void validate() const {
        require(format_version == kRunConfigFormatVersion, ErrorKind::config,
                "config: unsupported format_version " + std::to_string(format_version));
        benchmark.validate();
        model.validate();
        train.validate();
        require(split.test_fraction > 0.0 && split.test_fraction < 1.0, ErrorKind::config,
                "config: split.test_fraction must lie in (0, 1)");
        require(split.folds >= 2, ErrorKind::config, "config: split.folds must be >= 2");
        require(evaluate.generated_per_class >= 1, ErrorKind::config,
                "config: evaluate.generated_per_class must be >= 1");
        require(!sweep.betas.empty(), ErrorKind::config, "config: sweep.betas is empty");
        require(sweep.fold < split.folds && augment.fold < split.folds, ErrorKind::config,
                "config: sweep/augment fold index out of range");
        for (double b : sweep.betas) require(b >= 0.0, ErrorKind::config, "config: betas must be >= 0");
        require(!augment.fractions.empty(), ErrorKind::config, "config: augment.fractions is empty");
        for (double f : augment.fractions)
            require(f >= 0.0, ErrorKind::config, "config: augment fractions must be >= 0");
        require(augment.lambda >= 0.0, ErrorKind::config, "config: augment.lambda must be >= 0");
    }
};

namespace detail {

inline nlohmann::json without_seed(nlohmann::json j) {
    j.erase("seed");
    return j;
}

inline void reject_seed(const nlohmann::json& j, const std::string& section) {
    require(!j.is_object() || !j.contains("seed"), ErrorKind::config,
            "config: " + section + ".seed is not allowed; seeds derive from the top-level seed");
}

inline nlohmann::json welch_to_json(const dsp::WelchParams& w) {
    return {{"fs", w.fs}, {"nfft", w.nfft}, {"overlap", w.overlap}, {"f_min", w.f_min}, {"f_max", w.f_max}};
}

inline nlohmann::json preprocess_to_json(const dsp::PreprocessConfig& p) {
    return {{"input_fs", p.input_fs}, {"target_fs", p.target_fs},     {"low_hz", p.low_hz},
            {"high_hz", p.high_hz},   {"order", p.order},             {"total_s", p.total_s},
            {"drop_head_s", p.drop_head_s}, {"keep_s", p.keep_s},     {"window_s", p.window_s}};
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return {{"format_version", c.format_version},
            {"seed", c.seed},
            {"benchmark", detail::without_seed(benchmark_spec_to_json(c.benchmark))},
            {"preprocess", detail::preprocess_to_json(c.preprocess)},
            {"split", {{"test_fraction", c.split.test_fraction}, {"folds", c.split.folds}}},
            {"model", model_config_to_json(c.model)},
            {"train", detail::without_seed(train_config_to_json(c.train))},
            {"evaluate",
             {{"channel", c.evaluate.channel},
              {"welch", detail::welch_to_json(c.evaluate.welch)},
              {"generated_per_class", c.evaluate.generated_per_class}}},
            {"sweep", {{"betas", c.sweep.betas}, {"fold", c.sweep.fold}}},
            {"augment", {{"fractions", c.augment.fractions}, {"lambda", c.augment.lambda}, {"fold", c.augment.fold}}}};
}

/// Overlays `j` on `base`. Unknown keys anywhere are configuration errors.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = RunConfig::defaults()) {
    JsonFields f(j, "config");
    f.req("format_version", base.format_version);
    require(base.format_version == kRunConfigFormatVersion, ErrorKind::config,
            "config: unsupported format_version " + std::to_string(base.format_version));
    f.opt("seed", base.seed);
    if (const auto* s = f.child("benchmark")) {
        detail::reject_seed(*s, "benchmark");
        const auto seed = base.benchmark.seed;
        base.benchmark = benchmark_spec_from_json(*s, base.benchmark, "config.benchmark");
        base.benchmark.seed = seed;
    }
    if (const auto* s = f.child("preprocess")) {
        JsonFields g(*s, "config.preprocess");
        auto& p = base.preprocess;
        g.opt("input_fs", p.input_fs).opt("target_fs", p.target_fs).opt("low_hz", p.low_hz);
        g.opt("high_hz", p.high_hz).opt("order", p.order).opt("total_s", p.total_s);
        g.opt("drop_head_s", p.drop_head_s).opt("keep_s", p.keep_s).opt("window_s", p.window_s);
        g.finish();
    }
    if (const auto* s = f.child("split")) {
        JsonFields g(*s, "config.split");
        g.opt("test_fraction", base.split.test_fraction).opt("folds", base.split.folds);
        g.finish();
    }
    if (const auto* s = f.child("model")) base.model = model_config_from_json(*s, base.model, "config.model");
    if (const auto* s = f.child("train")) {
        detail::reject_seed(*s, "train");
        base.train = train_config_from_json(*s, base.train, "config.train");
    }
    if (const auto* s = f.child("evaluate")) {
        JsonFields g(*s, "config.evaluate");
        g.opt("channel", base.evaluate.channel).opt("generated_per_class", base.evaluate.generated_per_class);
        if (const auto* w = g.child("welch")) {
            JsonFields h(*w, "config.evaluate.welch");
            auto& wp = base.evaluate.welch;
            h.opt("fs", wp.fs).opt("nfft", wp.nfft).opt("overlap", wp.overlap).opt("f_min", wp.f_min);
            h.opt("f_max", wp.f_max);
            h.finish();
        }
        g.finish();
    }
    if (const auto* s = f.child("sweep")) {
        JsonFields g(*s, "config.sweep");
        g.opt("betas", base.sweep.betas).opt("fold", base.sweep.fold);
        g.finish();
    }
    if (const auto* s = f.child("augment")) {
        JsonFields g(*s, "config.augment");
        g.opt("fractions", base.augment.fractions).opt("lambda", base.augment.lambda).opt("fold", base.augment.fold);
        g.finish();
    }
    f.finish();
    base.validate();
    return base;
}

/// "default" and "reference" name built-in configs; anything else is a path
/// to a JSON file overlaid on the defaults.
inline RunConfig load_run_config(const std::string& spec) {
    if (spec == "default") return RunConfig::defaults();
    if (spec == "reference") return RunConfig::reference();
    return run_config_from_json(read_json_file(spec));
}

}  // namespace eeg2vec
