#pragma once

// Signal preprocessing (band-pass, decimation, epoching, normalization) and
// Welch power spectral density estimation.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "eeg2vec/error.hpp"
#include "eeg2vec/matrix.hpp"

namespace eeg2vec::dsp {

using cd = std::complex<double>;

struct BandpassSpec {
    double low_hz = 2.0;
    double high_hz = 40.0;
    int order = 4;
    double fs = 200.0;

    void validate() const {
        require(order >= 1, ErrorKind::precondition, "bandpass: order must be >= 1");
        require(fs > 0.0, ErrorKind::precondition, "bandpass: fs must be positive");
        require(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0, ErrorKind::precondition,
                "bandpass: need 0 < low_hz < high_hz < fs/2 (got low=" + std::to_string(low_hz) +
                    ", high=" + std::to_string(high_hz) + ", fs=" + std::to_string(fs) + ")");
    }
};

/// Second-order section, a0 normalized to 1.
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
};

struct FilterCoefficients {
    std::vector<Biquad> sections;

    /// Order of the digital filter (number of poles).
    int order() const { return static_cast<int>(2 * sections.size()); }

    /// Numerator polynomial in z^-1.
    std::vector<double> numerator() const {
        std::vector<double> poly{1.0};
        for (const auto& s : sections) poly = convolve(poly, {s.b0, s.b1, s.b2});
        return poly;
    }

    /// Denominator polynomial in z^-1 (leading 1).
    std::vector<double> denominator() const {
        std::vector<double> poly{1.0};
        for (const auto& s : sections) poly = convolve(poly, {1.0, s.a1, s.a2});
        return poly;
    }

    /// H(e^{j 2 pi f / fs}).
    cd response(double f_hz, double fs) const {
        const cd zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs);
        cd h{1.0, 0.0};
        for (const auto& s : sections) {
            const cd num = s.b0 + zinv * (s.b1 + zinv * s.b2);
            const cd den = 1.0 + zinv * (s.a1 + zinv * s.a2);
            h *= num / den;
        }
        return h;
    }

private:
    static std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> out(a.size() + b.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
        return out;
    }
};

/// Digital Butterworth band-pass: analog prototype, low-pass to band-pass
/// transform with pre-warped edges, bilinear transform, then grouped into
/// `order` biquads (each with zeros at z = +1 and z = -1).
inline FilterCoefficients design_butterworth_bandpass(const BandpassSpec& spec) {
    spec.validate();
    const int n = spec.order;
    const double fs2 = 2.0 * spec.fs;
    const double w1 = fs2 * std::tan(std::numbers::pi * spec.low_hz / spec.fs);
    const double w2 = fs2 * std::tan(std::numbers::pi * spec.high_hz / spec.fs);
    const double bw = w2 - w1;
    const double w0sq = w1 * w2;

    std::vector<cd> analog_poles;
    for (int k = 1; k <= n; ++k) {
        const double theta = std::numbers::pi * (2.0 * k + n - 1) / (2.0 * n);
        const cd proto = std::polar(1.0, theta);
        const cd half = proto * bw / 2.0;
        const cd root = std::sqrt(half * half - w0sq);
        analog_poles.push_back(half + root);
        analog_poles.push_back(half - root);
    }

    // Gain: analog k = bw^n with n zeros at s = 0; bilinear maps those to z = 1,
    // the n zeros at infinity to z = -1.
    cd gain = std::pow(cd(bw, 0.0), n) * std::pow(cd(fs2, 0.0), n);
    std::vector<cd> poles;
    for (const cd& p : analog_poles) {
        gain /= (fs2 - p);
        poles.push_back((fs2 + p) / (fs2 - p));
    }
    for (const cd& p : poles) {
        require(std::abs(p) < 1.0, ErrorKind::numeric,
                "butterworth design unstable: pole magnitude " + std::to_string(std::abs(p)));
    }

    // Pair conjugates: take upper-half-plane poles; pair leftover real poles.
    std::vector<cd> upper;
    std::vector<double> reals;
    for (const cd& p : poles) {
        if (p.imag() > 1e-12) {
            upper.push_back(p);
        } else if (std::abs(p.imag()) <= 1e-12) {
            reals.push_back(p.real());
        }
    }
    std::sort(upper.begin(), upper.end(),
              [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });
    std::sort(reals.begin(), reals.end());

    FilterCoefficients fc;
    for (const cd& p : upper) {
        fc.sections.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
    }
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
        fc.sections.push_back({1.0, 0.0, -1.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
    }
    require(static_cast<int>(fc.sections.size()) == n, ErrorKind::numeric,
            "butterworth design: could not pair poles into sections");
    const double g = gain.real();
    fc.sections.front().b0 *= g;
    fc.sections.front().b1 *= g;
    fc.sections.front().b2 *= g;
    return fc;
}

namespace detail {

/// Transposed direct form II cascade, in place, with per-section state.
inline void sos_filter(const FilterCoefficients& fc, std::vector<double>& x,
                       std::vector<std::array<double, 2>>& state) {
    for (std::size_t s = 0; s < fc.sections.size(); ++s) {
        const Biquad& q = fc.sections[s];
        double z1 = state[s][0];
        double z2 = state[s][1];
        for (double& v : x) {
            const double in = v;
            const double out = q.b0 * in + z1;
            z1 = q.b1 * in - q.a1 * out + z2;
            z2 = q.b2 * in - q.a2 * out;
            v = out;
        }
        state[s] = {z1, z2};
    }
}

/// Steady-state section states for a unit step input.
inline std::vector<std::array<double, 2>> sos_step_state(const FilterCoefficients& fc) {
    std::vector<std::array<double, 2>> zi(fc.sections.size());
    double level = 1.0;
    for (std::size_t s = 0; s < fc.sections.size(); ++s) {
        const Biquad& q = fc.sections[s];
        const double dc = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
        const double y = dc * level;
        const double z2 = q.b2 * level - q.a2 * y;
        const double z1 = q.b1 * level - q.a1 * y + z2;
        zi[s] = {z1, z2};
        level = y;
    }
    return zi;
}

}  // namespace detail

/// Edge extension used by filter_zero_phase.
inline std::size_t zero_phase_padlen(const FilterCoefficients& fc) {
    return static_cast<std::size_t>(3 * (fc.order() + 1));
}

/// Forward-backward filtering of one channel with odd edge extension and
/// steady-state initial conditions.
inline std::vector<double> filter_zero_phase(std::span<const double> x, const FilterCoefficients& fc) {
    const std::size_t n = x.size();
    const std::size_t pad = zero_phase_padlen(fc);
    require(n > pad, ErrorKind::precondition,
            "filter_zero_phase: signal length " + std::to_string(n) + " must exceed padding " +
                std::to_string(pad) + " (3 x (filter order + 1))");
    std::vector<double> ext(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) {
        ext[i] = 2.0 * x[0] - x[pad - i];
        ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
    }
    std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

    const auto zi = detail::sos_step_state(fc);
    auto state = zi;
    for (auto& s : state) s = {s[0] * ext.front(), s[1] * ext.front()};
    detail::sos_filter(fc, ext, state);

    std::reverse(ext.begin(), ext.end());
    state = zi;
    for (auto& s : state) s = {s[0] * ext.front(), s[1] * ext.front()};
    detail::sos_filter(fc, ext, state);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline Matrix<double> filter_zero_phase(const Matrix<double>& x, const FilterCoefficients& fc) {
    Matrix<double> out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto y = filter_zero_phase(x.row(r), fc);
        std::copy(y.begin(), y.end(), out.row(r).begin());
    }
    return out;
}

/// Keeps every factor-th sample starting at index 0; floor(N / factor) columns.
inline Matrix<double> downsample(const Matrix<double>& x, std::size_t factor) {
    require(factor >= 1, ErrorKind::precondition, "downsample: factor must be >= 1");
    const std::size_t n_out = x.cols() / factor;
    Matrix<double> out(x.rows(), n_out);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t t = 0; t < n_out; ++t) out(r, t) = x(r, t * factor);
    return out;
}

/// Drops the first drop_head_s seconds, keeps the next keep_s seconds and
/// cuts that span into non-overlapping windows of window_s seconds.
inline std::vector<Matrix<double>> segment_epochs(const Matrix<double>& x, double fs, double drop_head_s,
                                                  double keep_s, double window_s) {
    require(fs > 0 && drop_head_s >= 0 && keep_s > 0 && window_s > 0, ErrorKind::precondition,
            "segment_epochs: durations and fs must be positive");
    const auto start = static_cast<std::size_t>(std::llround(drop_head_s * fs));
    const auto keep = static_cast<std::size_t>(std::llround(keep_s * fs));
    const auto win = static_cast<std::size_t>(std::llround(window_s * fs));
    require(win >= 1, ErrorKind::precondition, "segment_epochs: window shorter than one sample");
    require(x.cols() >= start + keep, ErrorKind::precondition,
            "segment_epochs: recording has " + std::to_string(x.cols()) + " samples, needs " +
                std::to_string(start + keep) + " (drop + keep)");
    std::vector<Matrix<double>> epochs;
    for (std::size_t e = 0; e < keep / win; ++e) {
        Matrix<double> m(x.rows(), win);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t t = 0; t < win; ++t) m(r, t) = x(r, start + e * win + t);
        epochs.push_back(std::move(m));
    }
    return epochs;
}

/// Per-row min-max scaling to [0, 1]; constant rows map to 0.5.
template <class T>
Matrix<T> normalize_unit_range(const Matrix<T>& x) {
    Matrix<T> out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (T v : row)
            require(std::isfinite(static_cast<double>(v)), ErrorKind::numeric,
                    "normalize_unit_range: non-finite input in row " + std::to_string(r));
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        const double span = static_cast<double>(*hi) - static_cast<double>(*lo);
        for (std::size_t t = 0; t < x.cols(); ++t) {
            out(r, t) = span > 0.0
                            ? static_cast<T>((static_cast<double>(row[t]) - *lo) / span)
                            : static_cast<T>(0.5);
        }
    }
    return out;
}

struct PreprocessConfig {
    double input_fs = 1000.0;
    double target_fs = 200.0;
    double low_hz = 2.0;
    double high_hz = 40.0;
    int order = 4;
    double total_s = 185.0;  // the last total_s seconds of a recording are used
    double drop_head_s = 30.0;
    double keep_s = 155.0;
    double window_s = 2.0;
};

/// Recording (C x N at input_fs) to normalized epochs at target_fs: crop to
/// the last total_s seconds, zero-phase band-pass at the input rate,
/// decimate, drop head, epoch, normalize.
inline std::vector<Matrix<double>> preprocess_recording(const Matrix<double>& raw,
                                                        const PreprocessConfig& cfg) {
    const double ratio = cfg.input_fs / cfg.target_fs;
    const auto factor = static_cast<std::size_t>(std::llround(ratio));
    require(factor >= 1 && std::abs(ratio - static_cast<double>(factor)) < 1e-9,
            ErrorKind::precondition, "preprocess: input_fs must be an integer multiple of target_fs");
    const auto total = static_cast<std::size_t>(std::llround(cfg.total_s * cfg.input_fs));
    require(raw.cols() >= total, ErrorKind::precondition,
            "preprocess: recording has " + std::to_string(raw.cols()) + " samples, needs " +
                std::to_string(total));
    Matrix<double> cropped(raw.rows(), total);
    const std::size_t offset = raw.cols() - total;
    for (std::size_t r = 0; r < raw.rows(); ++r)
        for (std::size_t t = 0; t < total; ++t) cropped(r, t) = raw(r, offset + t);

    const auto fc = design_butterworth_bandpass({cfg.low_hz, cfg.high_hz, cfg.order, cfg.input_fs});
    const auto filtered = filter_zero_phase(cropped, fc);
    const auto decimated = downsample(filtered, factor);
    auto epochs = segment_epochs(decimated, cfg.target_fs, cfg.drop_head_s, cfg.keep_s, cfg.window_s);
    for (auto& e : epochs) e = normalize_unit_range(e);
    return epochs;
}

// ---------------------------------------------------------------------------
// Spectra

/// In-place radix-2 FFT; size must be a power of two.
inline void fft_radix2(std::vector<cd>& a, bool inverse = false) {
    const std::size_t n = a.size();
    require(n > 0 && (n & (n - 1)) == 0, ErrorKind::precondition, "fft: size must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cd wlen = std::polar(1.0, ang);
        for (std::size_t i = 0; i < n; i += len) {
            cd w{1.0, 0.0};
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cd u = a[i + j];
                const cd v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

/// One-sided DFT bins 0..n/2 of a real sequence of any length.
class RealDft {
public:
    explicit RealDft(std::size_t n) : n_(n), cos_(n), sin_(n) {
        for (std::size_t k = 0; k < n; ++k) {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            cos_[k] = std::cos(a);
            sin_[k] = std::sin(a);
        }
    }

    std::size_t bins() const { return n_ / 2 + 1; }

    /// |X_k|^2 for k = 0..n/2.
    void power(std::span<const double> x, std::vector<double>& out) const {
        out.assign(bins(), 0.0);
        for (std::size_t k = 0; k < bins(); ++k) {
            double re = 0.0, im = 0.0;
            std::size_t idx = 0;
            for (std::size_t t = 0; t < n_; ++t) {
                re += x[t] * cos_[idx];
                im -= x[t] * sin_[idx];
                idx += k;
                if (idx >= n_) idx -= n_;
            }
            out[k] = re * re + im * im;
        }
    }

private:
    std::size_t n_;
    std::vector<double> cos_, sin_;
};

inline constexpr double kDbFloor = -300.0;

inline double to_db(double power) {
    if (!(power > 0.0)) return kDbFloor;
    return std::max(kDbFloor, 10.0 * std::log10(power));
}

struct WelchParams {
    double fs = 200.0;
    std::size_t nfft = 200;
    std::size_t overlap = 50;
    double f_min = 2.0;
    double f_max = 41.0;
};

struct PsdEstimate {
    std::vector<double> freqs;     // Hz
    std::vector<double> power;     // linear, per Hz
    std::vector<double> power_db;  // 10 log10(power), floored
    std::size_t nfft = 0;
    std::size_t overlap = 0;

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(power.begin(), power.end()) - power.begin());
    }
};

/// Welch estimate: periodic Hann window, segment length nfft, hop
/// nfft - overlap, each segment mean-removed, one-sided density scaling.
/// Periodograms are averaged within each signal, then across signals.
inline PsdEstimate welch_psd(const std::vector<std::vector<double>>& signals, const WelchParams& wp) {
    require(!signals.empty(), ErrorKind::precondition, "welch_psd: no signals");
    require(wp.nfft >= 2 && wp.overlap < wp.nfft, ErrorKind::precondition,
            "welch_psd: need nfft >= 2 and 0 <= overlap < nfft");
    const std::size_t nfft = wp.nfft;
    const std::size_t hop = nfft - wp.overlap;
    std::vector<double> window(nfft);
    double wss = 0.0;
    for (std::size_t i = 0; i < nfft; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(nfft));
        wss += window[i] * window[i];
    }
    const RealDft dft(nfft);
    const std::size_t bins = dft.bins();
    std::vector<double> total(bins, 0.0);
    std::vector<double> seg(nfft), pw;
    for (const auto& s : signals) {
        require(s.size() >= nfft, ErrorKind::precondition,
                "welch_psd: signal length " + std::to_string(s.size()) + " shorter than nfft " +
                    std::to_string(nfft));
        std::vector<double> acc(bins, 0.0);
        std::size_t count = 0;
        for (std::size_t start = 0; start + nfft <= s.size(); start += hop) {
            double mean = 0.0;
            for (std::size_t i = 0; i < nfft; ++i) mean += s[start + i];
            mean /= static_cast<double>(nfft);
            for (std::size_t i = 0; i < nfft; ++i) seg[i] = (s[start + i] - mean) * window[i];
            dft.power(seg, pw);
            for (std::size_t k = 0; k < bins; ++k) acc[k] += pw[k];
            ++count;
        }
        for (std::size_t k = 0; k < bins; ++k) total[k] += acc[k] / static_cast<double>(count);
    }
    const double scale = 1.0 / (wp.fs * wss * static_cast<double>(signals.size()));
    PsdEstimate est;
    est.nfft = nfft;
    est.overlap = wp.overlap;
    for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * wp.fs / static_cast<double>(nfft);
        if (f < wp.f_min - 1e-9 || f > wp.f_max + 1e-9) continue;
        double p = total[k] * scale;
        const bool edge = (k == 0) || (nfft % 2 == 0 && k == nfft / 2);
        if (!edge) p *= 2.0;
        est.freqs.push_back(f);
        est.power.push_back(p);
        est.power_db.push_back(to_db(p));
    }
    return est;
}

}  // namespace eeg2vec::dsp
