#pragma once

// Dataset representation, on-disk format, stratified splitting, label encoding.
//
// On-disk layout (see docs/formats.md):
//   <dir>/manifest.json      meta + one entry per trial
//   <dir>/payload/<n>.f32    raw little-endian float32, row-major C x T

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eeg2vec/error.hpp"
#include "eeg2vec/matrix.hpp"
#include "eeg2vec/rng.hpp"

namespace eeg2vec {

static_assert(std::endian::native == std::endian::little,
              "payload and checkpoint I/O assume a little-endian host");

inline constexpr int kManifestFormatVersion = 1;

struct DatasetMeta {
    std::size_t C = 0;  // channels
    std::size_t T = 0;  // samples per trial
    std::size_t L = 0;  // emotion classes
    std::size_t P = 0;  // participants
    double fs = 0.0;    // Hz
    std::vector<std::string> channel_names;

    void validate() const {
        require(C >= 1 && T >= 1, ErrorKind::format, "meta: C and T must be >= 1");
        require(L >= 1 && P >= 1, ErrorKind::format, "meta: L and P must be >= 1");
        require(fs > 0.0, ErrorKind::format, "meta: fs must be positive");
        require(channel_names.size() == C, ErrorKind::format,
                "meta: channel_names has " + std::to_string(channel_names.size()) +
                    " entries, expected C=" + std::to_string(C));
    }

    std::size_t channel_index(const std::string& name) const {
        auto it = std::find(channel_names.begin(), channel_names.end(), name);
        require(it != channel_names.end(), ErrorKind::precondition,
                "channel not found: " + name);
        return static_cast<std::size_t>(it - channel_names.begin());
    }

    /// 62-channel, 15-participant, three-class geometry at 200 Hz.
    static DatasetMeta reference() {
        DatasetMeta m;
        m.C = 62;
        m.T = 400;
        m.L = 3;
        m.P = 15;
        m.fs = 200.0;
        m.channel_names = default_channel_names(m.C);
        return m;
    }

    static std::vector<std::string> default_channel_names(std::size_t C) {
        std::vector<std::string> names;
        names.reserve(C);
        for (std::size_t c = 0; c < C; ++c) names.push_back("ch" + std::to_string(c));
        return names;
    }

    bool operator==(const DatasetMeta&) const = default;
};

struct Trial {
    std::string id;
    Matrix<float> x;  // C x T
    int y = 0;        // emotion class
    int p = 0;        // participant
    double fs = 0.0;
    bool synthetic = false;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Trial> trials;
};

inline void validate_trial(const Trial& t, const DatasetMeta& meta) {
    require(t.x.rows() == meta.C && t.x.cols() == meta.T, ErrorKind::shape,
            "trial " + t.id + ": shape " + std::to_string(t.x.rows()) + "x" +
                std::to_string(t.x.cols()) + " does not match meta " + std::to_string(meta.C) +
                "x" + std::to_string(meta.T));
    require(t.y >= 0 && static_cast<std::size_t>(t.y) < meta.L, ErrorKind::format,
            "trial " + t.id + ": label y=" + std::to_string(t.y) + " out of range [0," +
                std::to_string(meta.L) + ")");
    require(t.p >= 0 && static_cast<std::size_t>(t.p) < meta.P, ErrorKind::format,
            "trial " + t.id + ": participant p=" + std::to_string(t.p) + " out of range [0," +
                std::to_string(meta.P) + ")");
}

/// Checks the post-normalization invariant (all entries in [0, 1]).
inline void validate_normalized(const Trial& t) {
    for (float v : t.x.data()) {
        require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrorKind::precondition,
                "trial " + t.id + ": values must lie in [0,1] after normalization");
    }
}

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
    return {{"C", m.C}, {"T", m.T}, {"L", m.L}, {"P", m.P}, {"fs", m.fs},
            {"channel_names", m.channel_names}};
}

inline DatasetMeta meta_from_json(const nlohmann::json& j) {
    DatasetMeta m;
    try {
        m.C = j.at("C").get<std::size_t>();
        m.T = j.at("T").get<std::size_t>();
        m.L = j.at("L").get<std::size_t>();
        m.P = j.at("P").get<std::size_t>();
        m.fs = j.at("fs").get<double>();
        m.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("meta: ") + e.what());
    }
    m.validate();
    return m;
}

namespace detail {

inline std::vector<float> read_f32_file(const std::filesystem::path& path,
                                        std::size_t expected_count, const std::string& trial_id) {
    std::error_code ec;
    require(std::filesystem::exists(path, ec), ErrorKind::io,
            "trial " + trial_id + ": payload file missing: " + path.string());
    const auto bytes = std::filesystem::file_size(path, ec);
    require(!ec, ErrorKind::io, "trial " + trial_id + ": cannot stat " + path.string());
    const std::uintmax_t expected_bytes = expected_count * sizeof(float);
    require(bytes == expected_bytes, ErrorKind::shape,
            "trial " + trial_id + ": payload has " + std::to_string(bytes) +
                " bytes, expected " + std::to_string(expected_bytes));
    std::vector<float> out(expected_count);
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "trial " + trial_id + ": cannot open " + path.string());
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected_bytes));
    require(static_cast<bool>(in), ErrorKind::io, "trial " + trial_id + ": short read " + path.string());
    return out;
}

inline void write_f32_file(const std::filesystem::path& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

}  // namespace detail

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorKind::io, "write failed: " + path.string());
}

/// Loads a manifest and all payloads. Trial order equals manifest order.
inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
    const nlohmann::json j = read_json_file(manifest_path);
    Dataset ds;
    try {
        const int version = j.at("format_version").get<int>();
        require(version == kManifestFormatVersion, ErrorKind::format,
                "unsupported manifest format_version " + std::to_string(version));
        ds.meta = meta_from_json(j.at("meta"));
        const auto base = manifest_path.parent_path();
        std::set<std::string> seen;
        for (const auto& e : j.at("trials")) {
            Trial t;
            t.id = e.at("id").get<std::string>();
            require(seen.insert(t.id).second, ErrorKind::format, "duplicate trial id " + t.id);
            t.y = e.at("y").get<int>();
            t.p = e.at("p").get<int>();
            t.fs = ds.meta.fs;
            t.synthetic = e.value("synthetic", false);
            // Labels are checked before touching the payload so the error names the cause.
            require(t.y >= 0 && static_cast<std::size_t>(t.y) < ds.meta.L, ErrorKind::format,
                    "trial " + t.id + ": label y=" + std::to_string(t.y) + " out of range [0," +
                        std::to_string(ds.meta.L) + ")");
            require(t.p >= 0 && static_cast<std::size_t>(t.p) < ds.meta.P, ErrorKind::format,
                    "trial " + t.id + ": participant p=" + std::to_string(t.p) +
                        " out of range [0," + std::to_string(ds.meta.P) + ")");
            auto data = detail::read_f32_file(base / e.at("file").get<std::string>(),
                                              ds.meta.C * ds.meta.T, t.id);
            t.x = Matrix<float>(ds.meta.C, ds.meta.T, std::move(data));
            ds.trials.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, manifest_path.string() + ": " + e.what());
    }
    return ds;
}

/// Writes `<dir>/manifest.json` and `<dir>/payload/<index>.f32`. Returns the manifest path.
inline std::filesystem::path save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    ds.meta.validate();
    std::filesystem::create_directories(dir / "payload");
    nlohmann::json trials = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
        const Trial& t = ds.trials[i];
        validate_trial(t, ds.meta);
        char name[32];
        std::snprintf(name, sizeof(name), "payload/%06zu.f32", i);
        detail::write_f32_file(dir / name, t.x.data());
        trials.push_back({{"id", t.id}, {"y", t.y}, {"p", t.p}, {"file", name},
                          {"synthetic", t.synthetic}});
    }
    nlohmann::json j = {{"format_version", kManifestFormatVersion},
                        {"meta", meta_to_json(ds.meta)},
                        {"trials", std::move(trials)}};
    const auto manifest = dir / "manifest.json";
    write_text_file(manifest, j.dump(2) + "\n");
    return manifest;
}

/// A continuous multi-channel recording awaiting preprocessing.
struct Recording {
    std::string id;
    int y = 0;
    int p = 0;
    Matrix<double> x;  // C x N at the recordings' sampling rate
};

struct RecordingSet {
    double fs = 0.0;
    std::size_t L = 0, P = 0;
    std::vector<std::string> channel_names;
    std::vector<Recording> recordings;
};

/// Recordings manifest: {"format_version": 1, "fs", "L", "P",
/// "channel_names", "recordings": [{"id", "y", "p", "file", "samples"}]},
/// each file holding C x samples little-endian float32, row-major.
inline RecordingSet load_recordings(const std::filesystem::path& manifest_path) {
    const nlohmann::json j = read_json_file(manifest_path);
    RecordingSet rs;
    try {
        const int version = j.at("format_version").get<int>();
        require(version == kManifestFormatVersion, ErrorKind::format,
                "unsupported recordings format_version " + std::to_string(version));
        rs.fs = j.at("fs").get<double>();
        rs.L = j.at("L").get<std::size_t>();
        rs.P = j.at("P").get<std::size_t>();
        rs.channel_names = j.at("channel_names").get<std::vector<std::string>>();
        require(rs.fs > 0.0 && !rs.channel_names.empty(), ErrorKind::format, "recordings: bad fs or channels");
        const std::size_t C = rs.channel_names.size();
        for (const auto& e : j.at("recordings")) {
            Recording r;
            r.id = e.at("id").get<std::string>();
            r.y = e.at("y").get<int>();
            r.p = e.at("p").get<int>();
            require(r.y >= 0 && static_cast<std::size_t>(r.y) < rs.L && r.p >= 0 &&
                        static_cast<std::size_t>(r.p) < rs.P,
                    ErrorKind::format, "recording " + r.id + ": label out of range");
            const auto n = e.at("samples").get<std::size_t>();
            auto data = detail::read_f32_file(manifest_path.parent_path() / e.at("file").get<std::string>(), C * n,
                                              r.id);
            r.x = Matrix<double>(C, n, std::vector<double>(data.begin(), data.end()));
            rs.recordings.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, manifest_path.string() + ": " + e.what());
    }
    return rs;
}

inline void save_recordings(const std::filesystem::path& dir, const RecordingSet& rs) {
    std::filesystem::create_directories(dir);
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : rs.recordings) {
        const std::string file = r.id + ".f32";
        detail::write_f32_file(dir / file, std::vector<float>(r.x.data().begin(), r.x.data().end()));
        recs.push_back({{"id", r.id}, {"y", r.y}, {"p", r.p}, {"file", file}, {"samples", r.x.cols()}});
    }
    nlohmann::json j = {{"format_version", kManifestFormatVersion}, {"fs", rs.fs},
                        {"L", rs.L},  {"P", rs.P},
                        {"channel_names", rs.channel_names}, {"recordings", std::move(recs)}};
    write_text_file(dir / "recordings.json", j.dump(2) + "\n");
}

/// One-hot encoding of a class or participant index.
template <class T = double>
std::vector<T> one_hot(std::size_t index, std::size_t cardinality) {
    require(index < cardinality, ErrorKind::precondition,
            "one_hot: index " + std::to_string(index) + " out of range [0," +
                std::to_string(cardinality) + ")");
    std::vector<T> v(cardinality, T{0});
    v[index] = T{1};
    return v;
}

struct Fold {
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    bool operator==(const Fold&) const = default;
};

struct SplitPlan {
    std::vector<std::string> test_ids;
    std::vector<Fold> folds;
    std::uint64_t seed = 0;
    bool operator==(const SplitPlan&) const = default;
};

/// Stratified holdout + k-fold plan.
///
/// Trials are grouped into (y, p) cells visited in ascending (y, p) order.
/// Each cell's ids are sorted, then shuffled with its own derived stream; the first
/// round(test_fraction * cell_size) go to the holdout. The rest are dealt
/// round-robin into the k folds with a single counter that carries across
/// cells, so fold sizes differ by at most one overall and per-cell counts
/// differ by at most one across folds.
inline SplitPlan make_split_plan(const std::vector<Trial>& trials, double test_fraction,
                                 std::size_t k, std::uint64_t seed) {
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::precondition,
            "test_fraction must lie in (0, 1)");
    require(k >= 2, ErrorKind::precondition, "k must be >= 2");

    std::map<std::pair<int, int>, std::vector<std::string>> cells;
    for (const auto& t : trials) cells[{t.y, t.p}].push_back(t.id);

    SplitPlan plan;
    plan.seed = seed;
    std::vector<std::vector<std::string>> fold_val(k);
    std::size_t dealer = 0;
    for (auto& [key, ids] : cells) {
        require(ids.size() >= k + 1, ErrorKind::precondition,
                "insufficient trials in cell (y=" + std::to_string(key.first) +
                    ", p=" + std::to_string(key.second) + "): " + std::to_string(ids.size()) +
                    " < k+1=" + std::to_string(k + 1));
        const auto cell_index =
            static_cast<std::uint64_t>(key.first) * 1000003ULL + static_cast<std::uint64_t>(key.second);
        Rng rng(derive_seed(seed, "split-cell", cell_index));
        std::sort(ids.begin(), ids.end());  // the plan must not depend on input order
        rng.shuffle(ids.begin(), ids.end());
        const auto n_test = static_cast<std::size_t>(
            std::lround(test_fraction * static_cast<double>(ids.size())));
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i < n_test) {
                plan.test_ids.push_back(ids[i]);
            } else {
                fold_val[dealer % k].push_back(ids[i]);
                ++dealer;
            }
        }
    }
    plan.folds.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
        plan.folds[f].val_ids = fold_val[f];
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            plan.folds[f].train_ids.insert(plan.folds[f].train_ids.end(), fold_val[g].begin(),
                                           fold_val[g].end());
        }
    }
    return plan;
}

inline nlohmann::json split_plan_to_json(const SplitPlan& plan) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : plan.folds) folds.push_back({{"train", f.train_ids}, {"val", f.val_ids}});
    return {{"format_version", 1}, {"seed", plan.seed}, {"test", plan.test_ids}, {"folds", folds}};
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
    SplitPlan plan;
    try {
        plan.seed = j.at("seed").get<std::uint64_t>();
        plan.test_ids = j.at("test").get<std::vector<std::string>>();
        for (const auto& f : j.at("folds")) {
            plan.folds.push_back({f.at("train").get<std::vector<std::string>>(),
                                  f.at("val").get<std::vector<std::string>>()});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("split plan: ") + e.what());
    }
    return plan;
}

/// Trials whose ids appear in `ids`, in the order of `ids`.
inline std::vector<Trial> select_trials(const std::vector<Trial>& trials,
                                        const std::vector<std::string>& ids) {
    std::unordered_map<std::string, const Trial*> by_id;
    for (const auto& t : trials) by_id.emplace(t.id, &t);
    std::vector<Trial> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        require(it != by_id.end(), ErrorKind::precondition, "unknown trial id " + id);
        out.push_back(*it->second);
    }
    return out;
}

}  // namespace eeg2vec
