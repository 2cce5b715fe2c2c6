#pragma once

// Deterministic synthetic benchmark: each trial is a participant-specific
// spatial mixing of a class-signature sinusoid plus per-channel 1/f^alpha
// noise at a fixed SNR, min-max normalized per channel.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eeg2vec/dataio.hpp"
#include "eeg2vec/dsp.hpp"
#include "eeg2vec/error.hpp"
#include "eeg2vec/json_fields.hpp"
#include "eeg2vec/rng.hpp"

namespace eeg2vec {

struct BenchmarkSpec {
    std::size_t C = 8, T = 400, L = 3, P = 5;
    double fs = 200.0;
    std::vector<double> signature_hz{6.0, 12.0, 24.0};
    double band_half_width_hz = 1.0;  // class band = signature +- this
    double freq_jitter_hz = 0.25;     // per-trial uniform jitter of the signature
    double phase_jitter_rad = std::numbers::pi / 4.0;  // around zero phase at the window centre
    double mixing_min = 0.5, mixing_max = 1.0;         // |channel weight|, random sign
    double amplitude_min = 0.7, amplitude_max = 1.3;   // per-participant gain
    double noise_alpha = 1.0;                          // 1/f^alpha noise exponent
    double snr_db = 5.0;                               // per channel
    std::size_t trials_per_cell = 20;
    std::uint64_t seed = 1234;

    std::pair<double, double> band(std::size_t cls) const {
        return {signature_hz.at(cls) - band_half_width_hz, signature_hz.at(cls) + band_half_width_hz};
    }

    void validate() const {
        require(C >= 1 && T >= 2 && L >= 1 && P >= 1 && fs > 0.0, ErrorKind::config, "benchmark: bad geometry");
        require(signature_hz.size() == L, ErrorKind::config, "benchmark: need one signature frequency per class");
        require(trials_per_cell >= 1, ErrorKind::config, "benchmark: trials_per_cell must be >= 1");
        require(std::isfinite(snr_db), ErrorKind::config, "benchmark: SNR must be finite");
        require(band_half_width_hz > 0.0 && freq_jitter_hz >= 0.0 && freq_jitter_hz <= band_half_width_hz,
                ErrorKind::config, "benchmark: jitter must lie inside the class band");
        require(mixing_min > 0.0 && mixing_min <= mixing_max && amplitude_min > 0.0 &&
                    amplitude_min <= amplitude_max,
                ErrorKind::config, "benchmark: bad mixing/amplitude ranges");
        for (std::size_t i = 0; i < L; ++i) {
            const auto [lo, hi] = band(i);
            require(lo >= 2.0 && hi <= 40.0 && hi < fs / 2.0, ErrorKind::config,
                    "benchmark: signature band " + std::to_string(i) + " must lie within 2-40 Hz");
            for (std::size_t j = 0; j < i; ++j) {
                const auto [lo2, hi2] = band(j);
                require(hi < lo2 || hi2 < lo, ErrorKind::config, "benchmark: signature bands overlap");
            }
        }
    }

    DatasetMeta meta() const {
        return {C, T, L, P, fs, DatasetMeta::default_channel_names(C)};
    }

    std::size_t trial_count() const { return L * P * trials_per_cell; }

    bool operator==(const BenchmarkSpec&) const = default;
};

inline nlohmann::json benchmark_spec_to_json(const BenchmarkSpec& s) {
    return {{"C", s.C},
            {"T", s.T},
            {"L", s.L},
            {"P", s.P},
            {"fs", s.fs},
            {"signature_hz", s.signature_hz},
            {"band_half_width_hz", s.band_half_width_hz},
            {"freq_jitter_hz", s.freq_jitter_hz},
            {"phase_jitter_rad", s.phase_jitter_rad},
            {"mixing_min", s.mixing_min},
            {"mixing_max", s.mixing_max},
            {"amplitude_min", s.amplitude_min},
            {"amplitude_max", s.amplitude_max},
            {"noise_alpha", s.noise_alpha},
            {"snr_db", s.snr_db},
            {"trials_per_cell", s.trials_per_cell},
            {"seed", s.seed}};
}

inline BenchmarkSpec benchmark_spec_from_json(const nlohmann::json& j, BenchmarkSpec s = {},
                                              const std::string& context = "benchmark") {
    JsonFields f(j, context);
    f.opt("C", s.C).opt("T", s.T).opt("L", s.L).opt("P", s.P).opt("fs", s.fs);
    f.opt("signature_hz", s.signature_hz).opt("band_half_width_hz", s.band_half_width_hz);
    f.opt("freq_jitter_hz", s.freq_jitter_hz).opt("phase_jitter_rad", s.phase_jitter_rad);
    f.opt("mixing_min", s.mixing_min).opt("mixing_max", s.mixing_max);
    f.opt("amplitude_min", s.amplitude_min).opt("amplitude_max", s.amplitude_max);
    f.opt("noise_alpha", s.noise_alpha).opt("snr_db", s.snr_db);
    f.opt("trials_per_cell", s.trials_per_cell).opt("seed", s.seed);
    f.finish();
    s.validate();
    return s;
}

/// Per-trial generative record written to the ground-truth sidecar.
struct GroundTruth {
    std::string id;
    int y = 0, p = 0;
    double freq_hz = 0.0;
    double phase_rad = 0.0;
    double amplitude = 0.0;
};

struct Benchmark {
    Dataset dataset;
    std::vector<GroundTruth> truth;
};

/// Zero-mean, unit-variance noise with power spectrum ~ 1/f^alpha, shaped
/// in the frequency domain from white Gaussian noise.
inline std::vector<double> colored_noise(std::size_t n, double alpha, Rng& rng) {
    std::size_t m = 1;
    while (m < 2 * n) m <<= 1;
    std::vector<dsp::cd> spec(m);
    for (auto& v : spec) v = {rng.normal(), 0.0};
    dsp::fft_radix2(spec);
    spec[0] = 0.0;
    for (std::size_t k = 1; k <= m / 2; ++k) {
        const double g = std::pow(static_cast<double>(k), -alpha / 2.0);
        spec[k] *= g;
        if (k != m - k) spec[m - k] *= g;
    }
    dsp::fft_radix2(spec, true);
    std::vector<double> out(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += (out[i] = spec[i].real());
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (auto& v : out) {
        v -= mean;
        var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (auto& v : out) v /= sd;
    return out;
}

inline std::string benchmark_trial_id(int y, int p, std::size_t k) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "y%d-p%02d-%03zu", y, p, k);
    return buf;
}

/// In-memory benchmark; identical output for identical specs.
inline Benchmark make_benchmark(const BenchmarkSpec& spec) {
    spec.validate();
    Benchmark out;
    out.dataset.meta = spec.meta();

    struct Profile {
        std::vector<double> mixing;
        double amplitude;
    };
    std::vector<Profile> profiles;
    for (std::size_t p = 0; p < spec.P; ++p) {
        Rng rng(derive_seed(spec.seed, "bench-participant", p));
        Profile prof;
        for (std::size_t c = 0; c < spec.C; ++c) {
            const double mag = rng.uniform(spec.mixing_min, spec.mixing_max);
            prof.mixing.push_back(rng.uniform() < 0.5 ? -mag : mag);
        }
        prof.amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max);
        profiles.push_back(std::move(prof));
    }

    const double noise_ratio = std::pow(10.0, -spec.snr_db / 20.0);  // noise rms / signal rms
    const double t_centre = (static_cast<double>(spec.T) - 1.0) / (2.0 * spec.fs);
    std::size_t index = 0;
    for (std::size_t y = 0; y < spec.L; ++y) {
        for (std::size_t p = 0; p < spec.P; ++p) {
            for (std::size_t k = 0; k < spec.trials_per_cell; ++k, ++index) {
                Rng rng(derive_seed(spec.seed, "bench-trial", index));
                const double f = spec.signature_hz[y] + rng.uniform(-spec.freq_jitter_hz, spec.freq_jitter_hz);
                const double phase = rng.uniform(-spec.phase_jitter_rad, spec.phase_jitter_rad);
                const auto& prof = profiles[p];
                Matrix<double> x(spec.C, spec.T);
                for (std::size_t c = 0; c < spec.C; ++c) {
                    const double gain = prof.amplitude * prof.mixing[c];
                    const double noise_sd = std::abs(gain) / std::sqrt(2.0) * noise_ratio;
                    const auto noise = colored_noise(spec.T, spec.noise_alpha, rng);
                    for (std::size_t t = 0; t < spec.T; ++t) {
                        const double time = static_cast<double>(t) / spec.fs - t_centre;
                        x(c, t) = gain * std::sin(2.0 * std::numbers::pi * f * time + phase) + noise_sd * noise[t];
                    }
                }
                Trial trial;
                trial.id = benchmark_trial_id(static_cast<int>(y), static_cast<int>(p), k);
                trial.x = dsp::normalize_unit_range(x).cast<float>();
                trial.y = static_cast<int>(y);
                trial.p = static_cast<int>(p);
                trial.fs = spec.fs;
                out.truth.push_back({trial.id, trial.y, trial.p, f, phase, prof.amplitude});
                out.dataset.trials.push_back(std::move(trial));
            }
        }
    }
    return out;
}

inline std::string ground_truth_csv(const std::vector<GroundTruth>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << "trial_id,y,p,freq_hz,phase_rad,amplitude\n";
    for (const auto& r : rows)
        os << r.id << ',' << r.y << ',' << r.p << ',' << r.freq_hz << ',' << r.phase_rad << ',' << r.amplitude << '\n';
    return os.str();
}

/// Writes manifest.json, payload/ and ground_truth.csv under `dir`; returns
/// the manifest path.
inline std::filesystem::path write_benchmark(const std::filesystem::path& dir, const Benchmark& bench) {
    const auto manifest = save_dataset(dir, bench.dataset);
    write_text_file(dir / "ground_truth.csv", ground_truth_csv(bench.truth));
    return manifest;
}

/// Mean Welch PSD over the channels of one trial.
inline dsp::PsdEstimate trial_psd(const Matrix<float>& x, const dsp::WelchParams& wp) {
    std::vector<std::vector<double>> rows;
    for (std::size_t c = 0; c < x.rows(); ++c) rows.emplace_back(x.row(c).begin(), x.row(c).end());
    return dsp::welch_psd(rows, wp);
}

inline double band_power(const dsp::PsdEstimate& psd, double lo, double hi) {
    double s = 0.0;
    for (std::size_t i = 0; i < psd.freqs.size(); ++i)
        if (psd.freqs[i] >= lo - 1e-9 && psd.freqs[i] <= hi + 1e-9) s += psd.power[i];
    return s;
}

/// Reference rule: the class whose signature band holds the most Welch power
/// (channel-averaged). Uses a whole-trial segment so short trials still work.
inline int band_power_classify(const Matrix<float>& x, const BenchmarkSpec& spec) {
    dsp::WelchParams wp;
    wp.fs = spec.fs;
    wp.nfft = std::min<std::size_t>(200, x.cols());
    wp.overlap = wp.nfft / 4;
    wp.f_min = 0.0;
    wp.f_max = spec.fs / 2.0;
    const auto psd = trial_psd(x, wp);
    int best = 0;
    double best_power = -1.0;
    for (std::size_t c = 0; c < spec.L; ++c) {
        const auto [lo, hi] = spec.band(c);
        const double bp = band_power(psd, lo, hi);
        if (bp > best_power) {
            best_power = bp;
            best = static_cast<int>(c);
        }
    }
    return best;
}

/// Per class, the fraction of `trials` labelled with that class whose
/// channel-averaged Welch PSD peaks inside the class signature band.
/// Classes without trials report 0.
inline std::vector<double> signature_peak_rates(const std::vector<Trial>& trials, const BenchmarkSpec& spec,
                                                const dsp::WelchParams& wp = {}) {
    std::vector<double> hits(spec.L, 0.0), totals(spec.L, 0.0);
    for (const auto& t : trials) {
        require(t.y >= 0 && static_cast<std::size_t>(t.y) < spec.L, ErrorKind::precondition,
                "signature_peak_rates: trial " + t.id + " has a class outside the benchmark");
        const auto psd = trial_psd(t.x, wp);
        const double f = psd.freqs[psd.argmax()];
        const auto [lo, hi] = spec.band(static_cast<std::size_t>(t.y));
        hits[static_cast<std::size_t>(t.y)] += f >= lo - 1e-9 && f <= hi + 1e-9;
        totals[static_cast<std::size_t>(t.y)] += 1.0;
    }
    for (std::size_t c = 0; c < spec.L; ++c) hits[c] = totals[c] > 0.0 ? hits[c] / totals[c] : 0.0;
    return hits;
}

}  // namespace eeg2vec
