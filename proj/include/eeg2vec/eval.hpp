#pragma once

// Evaluation harnesses: spectral fidelity, latent export and diagnostics,
// the beta sweep and the augmentation experiment.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eeg2vec/dataio.hpp"
#include "eeg2vec/dsp.hpp"
#include "eeg2vec/error.hpp"
#include "eeg2vec/metrics.hpp"
#include "eeg2vec/model.hpp"
#include "eeg2vec/synth.hpp"
#include "eeg2vec/train.hpp"

namespace eeg2vec {

// ---------------------------------------------------------------------------
// PSD fidelity

struct ClassPsd {
    int cls = 0;
    dsp::PsdEstimate real;
    dsp::PsdEstimate generated;
    double low_gap_db = 0.0;
    double high_gap_db = 0.0;
};

struct PsdComparison {
    std::string channel;
    double split_hz = 10.0;  // low band: f <= split_hz, high band: f > split_hz
    std::vector<ClassPsd> classes;
    double low_gap_db = 0.0;   // averaged over classes
    double high_gap_db = 0.0;  // averaged over classes
};

inline std::vector<std::vector<double>> channel_rows(const std::vector<Trial>& trials, std::size_t channel, int cls) {
    std::vector<std::vector<double>> rows;
    for (const auto& t : trials)
        if (t.y == cls) rows.emplace_back(t.x.row(channel).begin(), t.x.row(channel).end());
    return rows;
}

/// Class-wise mean Welch PSD of one channel for real and synthetic trials and
/// the mean absolute dB gap in the low and high bands. Classes present in
/// only one of the sets are skipped.
inline PsdComparison psd_fidelity(const std::vector<Trial>& real, const std::vector<Trial>& synthetic,
                                  const DatasetMeta& meta, const std::string& channel_name,
                                  const dsp::WelchParams& wp = {}, double split_hz = 10.0) {
    require(!real.empty() && !synthetic.empty(), ErrorKind::precondition, "psd_fidelity: empty trial set");
    const std::size_t ch = meta.channel_index(channel_name);
    PsdComparison out;
    out.channel = channel_name;
    out.split_hz = split_hz;
    for (std::size_t c = 0; c < meta.L; ++c) {
        const auto r = channel_rows(real, ch, static_cast<int>(c));
        const auto g = channel_rows(synthetic, ch, static_cast<int>(c));
        if (r.empty() || g.empty()) continue;
        ClassPsd cp;
        cp.cls = static_cast<int>(c);
        cp.real = dsp::welch_psd(r, wp);
        cp.generated = dsp::welch_psd(g, wp);
        std::size_t n_low = 0, n_high = 0;
        for (std::size_t i = 0; i < cp.real.freqs.size(); ++i) {
            const double gap = std::abs(cp.real.power_db[i] - cp.generated.power_db[i]);
            if (cp.real.freqs[i] <= split_hz + 1e-9) {
                cp.low_gap_db += gap;
                ++n_low;
            } else {
                cp.high_gap_db += gap;
                ++n_high;
            }
        }
        if (n_low) cp.low_gap_db /= static_cast<double>(n_low);
        if (n_high) cp.high_gap_db /= static_cast<double>(n_high);
        out.classes.push_back(std::move(cp));
    }
    require(!out.classes.empty(), ErrorKind::precondition, "psd_fidelity: no class present in both sets");
    for (const auto& cp : out.classes) {
        out.low_gap_db += cp.low_gap_db;
        out.high_gap_db += cp.high_gap_db;
    }
    out.low_gap_db /= static_cast<double>(out.classes.size());
    out.high_gap_db /= static_cast<double>(out.classes.size());
    return out;
}

/// freq_hz, then real_c<k>_db and generated_c<k>_db per class.
inline std::string psd_csv(const PsdComparison& cmp) {
    std::ostringstream os;
    os.precision(10);
    os << "freq_hz";
    for (const auto& c : cmp.classes) os << ",real_c" << c.cls << "_db,generated_c" << c.cls << "_db";
    os << '\n';
    const auto& freqs = cmp.classes.front().real.freqs;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        os << freqs[i];
        for (const auto& c : cmp.classes) os << ',' << c.real.power_db[i] << ',' << c.generated.power_db[i];
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Latents

/// mu of every trial, [n x d_z].
inline Matrix<double> latent_means(const Model& model, const std::vector<Trial>& trials,
                                   std::size_t batch_size = 64) {
    const auto& cfg = model.config();
    Matrix<double> out(trials.size(), cfg.d_z);
    for (std::size_t start = 0; start < trials.size(); start += batch_size) {
        std::vector<const Trial*> chunk;
        for (std::size_t i = start; i < std::min(trials.size(), start + batch_size); ++i) chunk.push_back(&trials[i]);
        const auto mu = model.encode_batch(make_batch<float>(chunk, cfg.C, cfg.T).x).first;
        for (std::size_t b = 0; b < chunk.size(); ++b)
            for (std::size_t j = 0; j < cfg.d_z; ++j) out(start + b, j) = mu[b * cfg.d_z + j];
    }
    return out;
}

inline std::string compression_note(const ModelConfig& cfg) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "latent compression: d_z/(C*T) = %zu/%zu = %.2f%%", cfg.d_z, cfg.C * cfg.T,
                  100.0 * compression_ratio(cfg));
    return buf;
}

/// CSV: trial_id, y, p, mu_0 .. mu_{d_z-1}.
inline std::string latents_csv(const std::vector<Trial>& trials, const Matrix<double>& mu) {
    std::ostringstream os;
    os.precision(9);
    os << "trial_id,y,p";
    for (std::size_t j = 0; j < mu.cols(); ++j) os << ",mu_" << j;
    os << '\n';
    for (std::size_t i = 0; i < trials.size(); ++i) {
        os << trials[i].id << ',' << trials[i].y << ',' << trials[i].p;
        for (std::size_t j = 0; j < mu.cols(); ++j) os << ',' << mu(i, j);
        os << '\n';
    }
    return os.str();
}

/// Writes the latent CSV and returns the compression note.
inline std::string export_latents(const std::vector<Trial>& trials, const Model& model,
                                  const std::filesystem::path& path) {
    write_text_file(path, latents_csv(trials, latent_means(model, trials)));
    return compression_note(model.config());
}

struct DecorrelationScore {
    double score = 0.0;           // mean |off-diagonal Pearson r|
    std::size_t used_dims = 0;
    std::size_t excluded_dims = 0;  // zero-variance columns
};

inline DecorrelationScore latent_decorrelation_score(const Matrix<double>& z) {
    require(z.rows() >= 3, ErrorKind::precondition, "decorrelation: need at least 3 samples");
    const std::size_t n = z.rows(), d = z.cols();
    std::vector<std::vector<double>> cols;
    DecorrelationScore out;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += z(i, j);
        mean /= static_cast<double>(n);
        std::vector<double> c(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = z(i, j) - mean;
            ss += c[i] * c[i];
        }
        if (!(ss > 0.0)) {
            ++out.excluded_dims;
            continue;
        }
        const double inv = 1.0 / std::sqrt(ss);
        for (auto& v : c) v *= inv;
        cols.push_back(std::move(c));
    }
    out.used_dims = cols.size();
    require(cols.size() >= 2, ErrorKind::precondition, "decorrelation: fewer than 2 dimensions with variance");
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < cols.size(); ++a)
        for (std::size_t b = a + 1; b < cols.size(); ++b, ++pairs) {
            double r = 0.0;
            for (std::size_t i = 0; i < n; ++i) r += cols[a][i] * cols[b][i];
            s += std::abs(std::clamp(r, -1.0, 1.0));
        }
    out.score = s / static_cast<double>(pairs);
    return out;
}

/// Multinomial logistic regression (full-batch gradient descent on
/// standardized features) fitted on one set and scored on another.
struct ProbeResult {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double chance = 0.0;  // majority-class rate of the test labels
};

inline ProbeResult linear_probe(const Matrix<double>& x_train, const std::vector<int>& y_train,
                                const Matrix<double>& x_test, const std::vector<int>& y_test, std::size_t classes,
                                std::size_t iterations = 500, double learning_rate = 0.5, double l2 = 1e-3) {
    require(x_train.rows() == y_train.size() && x_test.rows() == y_test.size() && x_train.cols() == x_test.cols(),
            ErrorKind::shape, "linear_probe: inconsistent inputs");
    require(!y_train.empty() && !y_test.empty(), ErrorKind::precondition, "linear_probe: empty set");
    const std::size_t n = x_train.rows(), d = x_train.cols();
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += x_train(i, j);
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) sd[j] += (x_train(i, j) - mean[j]) * (x_train(i, j) - mean[j]);
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(n)) + 1e-12;
    const auto feature = [&](const Matrix<double>& x, std::size_t i, std::size_t j) {
        return (x(i, j) - mean[j]) / sd[j];
    };

    Matrix<double> w(classes, d + 1, 0.0);
    std::vector<double> logits(classes);
    const auto scores = [&](const Matrix<double>& x, std::size_t i) {
        for (std::size_t c = 0; c < classes; ++c) {
            double s = w(c, d);
            for (std::size_t j = 0; j < d; ++j) s += w(c, j) * feature(x, i, j);
            logits[c] = s;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& l : logits) z += (l = std::exp(l - mx));
        for (auto& l : logits) l /= z;
    };
    for (std::size_t it = 0; it < iterations; ++it) {
        Matrix<double> grad(classes, d + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            scores(x_train, i);
            for (std::size_t c = 0; c < classes; ++c) {
                const double g = logits[c] - (static_cast<std::size_t>(y_train[i]) == c ? 1.0 : 0.0);
                for (std::size_t j = 0; j < d; ++j) grad(c, j) += g * feature(x_train, i, j);
                grad(c, d) += g;
            }
        }
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t j = 0; j <= d; ++j)
                w(c, j) -= learning_rate * (grad(c, j) / static_cast<double>(n) + (j < d ? l2 * w(c, j) : 0.0));
    }
    const auto accuracy = [&](const Matrix<double>& x, const std::vector<int>& y) {
        std::size_t ok = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            scores(x, i);
            const auto pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
            ok += pred == y[i];
        }
        return static_cast<double>(ok) / static_cast<double>(y.size());
    };
    ProbeResult r;
    r.train_accuracy = accuracy(x_train, y_train);
    r.test_accuracy = accuracy(x_test, y_test);
    std::vector<std::size_t> counts(classes, 0);
    for (int y : y_test) ++counts[static_cast<std::size_t>(y)];
    r.chance = static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
               static_cast<double>(y_test.size());
    return r;
}

/// Class probe versus participant probe on mu: each probe's accuracy above
/// its own chance rate, and the difference (class minus participant).
struct InvarianceReport {
    ProbeResult class_probe;
    ProbeResult participant_probe;
    double class_margin = 0.0;
    double participant_margin = 0.0;
    double gap = 0.0;
};

inline InvarianceReport participant_invariance(const Model& model, const std::vector<Trial>& fit,
                                               const std::vector<Trial>& test) {
    const auto& cfg = model.config();
    const auto zf = latent_means(model, fit), zt = latent_means(model, test);
    std::vector<int> yf, pf, yt, pt;
    for (const auto& t : fit) {
        yf.push_back(t.y);
        pf.push_back(t.p);
    }
    for (const auto& t : test) {
        yt.push_back(t.y);
        pt.push_back(t.p);
    }
    InvarianceReport r;
    r.class_probe = linear_probe(zf, yf, zt, yt, cfg.L);
    r.participant_probe = linear_probe(zf, pf, zt, pt, cfg.P);
    r.class_margin = r.class_probe.test_accuracy - r.class_probe.chance;
    r.participant_margin = r.participant_probe.test_accuracy - r.participant_probe.chance;
    r.gap = r.class_margin - r.participant_margin;
    return r;
}

// ---------------------------------------------------------------------------
// Beta sweep

struct BetaSweepRow {
    double beta = 0.0;
    double recon_mse = 0.0;  // decode(mu | true y, p) against the validation trials
    DecorrelationScore decorrelation;  // on mu of the fold's train + validation trials
    double val_accuracy = 0.0;
    std::size_t epochs = 0;  // training epochs behind the reported parameters
};

struct BetaSweepResult {
    std::vector<BetaSweepRow> rows;
    std::vector<TrainResult> runs;  // aligned with rows
};

/// Reconstruction MSE of decode(mu) under each trial's own labels.
inline double mean_reconstruction_mse(const Model& model, const std::vector<Trial>& trials) {
    const auto& cfg = model.config();
    double s = 0.0;
    for (std::size_t start = 0; start < trials.size(); start += 64) {
        std::vector<const Trial*> chunk;
        for (std::size_t i = start; i < std::min(trials.size(), start + 64); ++i) chunk.push_back(&trials[i]);
        const auto batch = make_batch<float>(chunk, cfg.C, cfg.T);
        const auto xh = model.decode_batch(model.encode_batch(batch.x).first, batch.y, batch.p);
        const std::size_t ct = cfg.C * cfg.T;
        for (std::size_t b = 0; b < chunk.size(); ++b)
            s += loss_reconstruction<float>(std::span<const float>(batch.x.ptr() + b * ct, ct),
                                            std::span<const float>(xh.ptr() + b * ct, ct));
    }
    return s / static_cast<double>(trials.size());
}

/// Trains fold `fold` of the plan once per beta with identical seeds.
///
/// The arm at the model config's own beta is trained with the normal early
/// stopping rule and its selected epoch E fixes the training length. Every
/// other arm then trains exactly E epochs and is scored on its final
/// parameters, so the arms differ only in beta and not in how long they ran.
/// The reference arm is trained even when its beta is not in `betas`.
inline BetaSweepResult run_beta_sweep(const Dataset& ds, const SplitPlan& plan, const ModelConfig& mcfg,
                                      const TrainConfig& tcfg, const std::vector<double>& betas,
                                      std::size_t fold = 0, const EpochCallback& on_epoch = {}) {
    require(!betas.empty(), ErrorKind::precondition, "beta sweep: no beta values");
    require(fold < plan.folds.size(), ErrorKind::precondition, "beta sweep: fold index out of range");
    const auto train = select_trials(ds.trials, plan.folds[fold].train_ids);
    const auto val = select_trials(ds.trials, plan.folds[fold].val_ids);
    auto pool = train;
    pool.insert(pool.end(), val.begin(), val.end());
    const auto fold_cfg = fold_train_config(tcfg, fold);

    auto reference = train_fold(train, val, mcfg, fold_cfg, on_epoch, fold);
    auto matched = fold_cfg;
    matched.max_epochs = reference.history.best_epoch;
    matched.fixed_budget = true;

    BetaSweepResult out;
    for (double beta : betas) {
        auto cfg = mcfg;
        cfg.beta = beta;
        auto run = beta == mcfg.beta ? reference : train_fold(train, val, cfg, matched, on_epoch, fold);
        BetaSweepRow row;
        row.beta = beta;
        row.recon_mse = mean_reconstruction_mse(run.model, val);
        row.decorrelation = latent_decorrelation_score(latent_means(run.model, pool));
        const auto preds = predict_labels(run.model, val);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < val.size(); ++i) ok += preds[i] == val[i].y;
        row.val_accuracy = static_cast<double>(ok) / static_cast<double>(val.size());
        row.epochs = run.history.best_epoch;
        out.rows.push_back(row);
        out.runs.push_back(std::move(run));
    }
    return out;
}

inline std::string beta_sweep_csv(const std::vector<BetaSweepRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "beta,val_recon_mse,decorrelation,used_dims,excluded_dims,val_accuracy,epochs\n";
    for (const auto& r : rows)
        os << r.beta << ',' << r.recon_mse << ',' << r.decorrelation.score << ',' << r.decorrelation.used_dims << ','
           << r.decorrelation.excluded_dims << ',' << r.val_accuracy << ',' << r.epochs << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Augmentation experiment

struct AugmentationRow {
    double fraction = 0.0;
    std::size_t n_real = 0;
    std::size_t n_synthetic = 0;
    std::size_t n_test = 0;
    EvalReport test;
};

/// For each fraction: real training trials plus prior samples from
/// `generator`, a fresh model trained with `mcfg` (the classifier-weighted
/// arm), scored on the fixed test set. Seeds are shared across arms.
inline std::vector<AugmentationRow> run_augmentation_experiment(
    const std::vector<Trial>& real_train, const std::vector<Trial>& val, const std::vector<Trial>& test,
    const std::vector<double>& fractions, const Model& generator, const ModelConfig& mcfg, const TrainConfig& tcfg,
    std::uint64_t augment_seed, const EpochCallback& on_epoch = {}) {
    require(!fractions.empty(), ErrorKind::precondition, "augmentation: no fractions");
    {
        std::set<std::string> test_ids;
        for (const auto& t : test) test_ids.insert(t.id);
        for (const auto* set : {&real_train, &val})
            for (const auto& t : *set)
                require(!test_ids.contains(t.id), ErrorKind::precondition,
                        "augmentation: trial " + t.id + " appears in the test set");
    }
    std::vector<int> labels;
    for (const auto& t : test) labels.push_back(t.y);
    std::vector<AugmentationRow> rows;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const auto aug = build_augmented_set(real_train, fractions[i], generator, augment_seed);
        auto run = train_fold(aug.trials, val, mcfg, tcfg, on_epoch, i);
        AugmentationRow row;
        row.fraction = fractions[i];
        row.n_real = aug.n_real;
        row.n_synthetic = aug.n_synthetic;
        row.n_test = test.size();
        row.test = classification_report(predict_labels(run.model, test), labels, mcfg.L);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string augmentation_csv(const std::vector<AugmentationRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "fraction,n_real,n_synthetic,n_test,accuracy,macro_f1,macro_precision,macro_recall\n";
    for (const auto& r : rows) {
        double f1 = 0.0, pr = 0.0, rc = 0.0;
        const double L = static_cast<double>(r.test.f1.size());
        for (std::size_t c = 0; c < r.test.f1.size(); ++c) {
            f1 += r.test.f1[c] / L;
            pr += r.test.precision[c] / L;
            rc += r.test.recall[c] / L;
        }
        os << r.fraction << ',' << r.n_real << ',' << r.n_synthetic << ',' << r.n_test << ',' << r.test.accuracy << ','
           << f1 << ',' << pr << ',' << rc << '\n';
    }
    return os.str();
}

}  // namespace eeg2vec
