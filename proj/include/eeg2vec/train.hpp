#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eeg2vec/dataio.hpp"
#include "eeg2vec/error.hpp"
#include "eeg2vec/json_fields.hpp"
#include "eeg2vec/metrics.hpp"
#include "eeg2vec/model.hpp"
#include "eeg2vec/nn/adam.hpp"
#include "eeg2vec/nn/checkpoint.hpp"
#include "eeg2vec/rng.hpp"

namespace eeg2vec {

/// Optimization settings. The loss weights beta and lambda are part of
/// ModelConfig.
struct TrainConfig {
    std::size_t batch_size = 50;
    std::size_t max_epochs = 2000;
    double learning_rate = 1e-3;
    std::size_t early_stop_patience = 50;
    double min_delta = 1e-5;
    std::uint64_t seed = 0;
    /// Train exactly max_epochs and return the final parameters, with no
    /// early stopping. Harnesses set this for matched-length comparison arms;
    /// it is not part of the run configuration file.
    bool fixed_budget = false;

    void validate() const {
        require(batch_size >= 1, ErrorKind::config, "train: batch_size must be >= 1");
        require(max_epochs >= 1, ErrorKind::config, "train: max_epochs must be >= 1");
        require(learning_rate > 0.0, ErrorKind::config, "train: learning_rate must be > 0");
        require(early_stop_patience >= 1, ErrorKind::config, "train: early_stop_patience must be >= 1");
        require(min_delta >= 0.0, ErrorKind::config, "train: min_delta must be >= 0");
    }

    bool operator==(const TrainConfig&) const = default;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"learning_rate", c.learning_rate},
            {"early_stop_patience", c.early_stop_patience},
            {"min_delta", c.min_delta},
            {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {},
                                          const std::string& context = "train") {
    JsonFields f(j, context);
    f.opt("batch_size", c.batch_size).opt("max_epochs", c.max_epochs).opt("learning_rate", c.learning_rate);
    f.opt("early_stop_patience", c.early_stop_patience).opt("min_delta", c.min_delta).opt("seed", c.seed);
    f.finish();
    c.validate();
    return c;
}

/// Stops once `patience` consecutive epochs fail to improve the best loss
/// by more than min_delta. Epochs are numbered from 1.
class EarlyStopping {
public:
    EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

    /// Records the loss of the next epoch; returns true if it is the new best.
    bool observe(double loss) {
        ++epoch_;
        if (best_epoch_ == 0 || loss < best_loss_ - min_delta_) {
            best_loss_ = loss;
            best_epoch_ = epoch_;
            return true;
        }
        return false;
    }

    bool should_stop() const { return best_epoch_ != 0 && epoch_ - best_epoch_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    std::size_t patience_;
    double min_delta_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    double best_loss_ = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    LossComponents train;
    LossComponents val;
    double val_accuracy = 0.0;

    bool operator==(const EpochRecord& o) const {
        const auto eq = [](const LossComponents& a, const LossComponents& b) {
            return a.recon == b.recon && a.kl == b.kl && a.cla == b.cla && a.total == b.total;
        };
        return epoch == o.epoch && eq(train, o.train) && eq(val, o.val) && val_accuracy == o.val_accuracy;
    }
};

struct RunHistory {
    std::vector<EpochRecord> epochs;
    std::vector<double> wall_seconds;  // elapsed time at the end of each epoch
    std::size_t best_epoch = 0;  // epoch whose parameters were returned (the last one under fixed_budget)
    bool stopped_early = false;
};

inline constexpr const char* kHistoryColumns =
    "epoch,train_recon,train_kl,train_cla,train_total,val_recon,val_kl,val_cla,val_total,val_accuracy";

/// Loss history CSV (deterministic; timing is kept out of it).
inline std::string history_csv(const RunHistory& h) {
    std::ostringstream os;
    os.precision(17);
    os << kHistoryColumns << "\n";
    for (const auto& e : h.epochs)
        os << e.epoch << ',' << e.train.recon << ',' << e.train.kl << ',' << e.train.cla << ',' << e.train.total
           << ',' << e.val.recon << ',' << e.val.kl << ',' << e.val.cla << ',' << e.val.total << ','
           << e.val_accuracy << '\n';
    return os.str();
}

inline std::string timing_csv(const RunHistory& h) {
    std::ostringstream os;
    os << "epoch,wall_seconds\n";
    for (std::size_t i = 0; i < h.wall_seconds.size(); ++i) os << h.epochs[i].epoch << ',' << h.wall_seconds[i] << '\n';
    return os.str();
}

using Model = Eeg2Vec<float>;

struct DatasetLoss {
    LossComponents loss;
    double accuracy = 0.0;
    std::vector<int> predictions;
};

/// Eval-mode objective over a trial set (batch-size weighted) with a fixed
/// reparameterization stream, plus classification of mu.
inline DatasetLoss evaluate_loss(const Model& model, const std::vector<Trial>& trials, std::size_t batch_size,
                                 std::uint64_t noise_seed) {
    require(!trials.empty(), ErrorKind::precondition, "evaluate_loss: empty trial set");
    const auto& cfg = model.config();
    Rng rng(noise_seed);
    DatasetLoss out;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < trials.size(); start += batch_size) {
        std::vector<const Trial*> chunk;
        for (std::size_t i = start; i < std::min(trials.size(), start + batch_size); ++i) chunk.push_back(&trials[i]);
        const auto batch = make_batch<float>(chunk, cfg.C, cfg.T);
        const auto pass = model.objective(batch, nn::Mode::eval, rng);
        const double w = static_cast<double>(chunk.size());
        out.loss.recon += w * pass.loss.recon;
        out.loss.kl += w * pass.loss.kl;
        out.loss.cla += w * pass.loss.cla;
        const auto probs = model.classify_batch(pass.mu);
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const float* row = probs.ptr() + b * cfg.L;
            const int pred = static_cast<int>(std::max_element(row, row + cfg.L) - row);
            out.predictions.push_back(pred);
            if (pred == batch.y[b]) ++correct;
        }
    }
    const double n = static_cast<double>(trials.size());
    out.loss.recon /= n;
    out.loss.kl /= n;
    out.loss.cla /= n;
    out.loss.total = combine(out.loss, cfg.beta, cfg.lambda);
    out.accuracy = static_cast<double>(correct) / n;
    return out;
}

/// argmax of classify(mu) per trial.
inline std::vector<int> predict_labels(const Model& model, const std::vector<Trial>& trials,
                                       std::size_t batch_size = 64) {
    const auto& cfg = model.config();
    std::vector<int> out;
    for (std::size_t start = 0; start < trials.size(); start += batch_size) {
        std::vector<const Trial*> chunk;
        for (std::size_t i = start; i < std::min(trials.size(), start + batch_size); ++i) chunk.push_back(&trials[i]);
        const auto batch = make_batch<float>(chunk, cfg.C, cfg.T);
        const auto probs = model.classify_batch(model.encode_batch(batch.x).first);
        for (std::size_t b = 0; b < chunk.size(); ++b) {
            const float* row = probs.ptr() + b * cfg.L;
            out.push_back(static_cast<int>(std::max_element(row, row + cfg.L) - row));
        }
    }
    return out;
}

struct EpochLog {
    std::size_t fold = 0;
    const EpochRecord* record = nullptr;
    bool improved = false;
    const Model* model = nullptr;  // current (not best) parameters
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
    Model model;  // parameters of history.best_epoch
    nn::AdamState<float> adam;  // optimizer state at the best epoch
    RunHistory history;
};

/// Indices of `trials` sorted by trial id, so batch composition does not
/// depend on the order trials were passed in.
inline std::vector<std::size_t> id_order(const std::vector<Trial>& trials) {
    std::vector<std::size_t> idx(trials.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return trials[a].id < trials[b].id; });
    return idx;
}

/// Trains one model. Every epoch reshuffles the (id-sorted) training set with
/// derive_seed(seed, "batch-order", epoch), takes one Adam step per batch
/// (the last batch may be smaller), then scores the whole validation set in
/// eval mode. Returns the parameters of the best validation epoch.
inline TrainResult train_fold(const std::vector<Trial>& train, const std::vector<Trial>& val,
                              const ModelConfig& mcfg, const TrainConfig& tcfg, const EpochCallback& on_epoch = {},
                              std::size_t fold_index = 0) {
    tcfg.validate();
    mcfg.validate();
    require(!train.empty() && !val.empty(), ErrorKind::precondition, "train_fold: empty train or validation set");
    {
        std::set<std::string> ids;
        for (const auto& t : train) ids.insert(t.id);
        for (const auto& t : val)
            require(!ids.contains(t.id), ErrorKind::precondition,
                    "train_fold: trial " + t.id + " is in both train and validation sets");
    }
    Model model(mcfg, tcfg.seed);
    nn::AdamHyper hyper;
    hyper.learning_rate = tcfg.learning_rate;
    auto adam = nn::AdamState<float>::initialized_for(model.params(), hyper);

    TrainResult best{model, adam, {}};
    EarlyStopping stopper(tcfg.early_stop_patience, tcfg.min_delta);
    const auto order = id_order(train);
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t val_noise = derive_seed(tcfg.seed, "val-noise");

    for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        auto perm = order;
        Rng shuffle_rng(derive_seed(tcfg.seed, "batch-order", epoch));
        shuffle_rng.shuffle(perm.begin(), perm.end());
        Rng noise_rng(derive_seed(tcfg.seed, "train-noise", epoch));

        EpochRecord rec;
        rec.epoch = epoch;
        for (std::size_t start = 0, batch_no = 0; start < perm.size(); start += tcfg.batch_size, ++batch_no) {
            std::vector<const Trial*> chunk;
            for (std::size_t i = start; i < std::min(perm.size(), start + tcfg.batch_size); ++i)
                chunk.push_back(&train[perm[i]]);
            const auto batch = make_batch<float>(chunk, mcfg.C, mcfg.T);
            LossComponents l;
            try {
                l = model.train_step(batch, adam, noise_rng);
            } catch (const Error& e) {
                fail(e.kind(), "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) + ": " +
                                   e.what());
            }
            const double w = static_cast<double>(chunk.size());
            rec.train.recon += w * l.recon;
            rec.train.kl += w * l.kl;
            rec.train.cla += w * l.cla;
        }
        const double n = static_cast<double>(train.size());
        rec.train.recon /= n;
        rec.train.kl /= n;
        rec.train.cla /= n;
        rec.train.total = combine(rec.train, mcfg.beta, mcfg.lambda);

        const auto v = evaluate_loss(model, val, tcfg.batch_size, val_noise);
        require(std::isfinite(v.loss.total), ErrorKind::numeric,
                "epoch " + std::to_string(epoch) + ": non-finite validation loss");
        rec.val = v.loss;
        rec.val_accuracy = v.accuracy;

        const bool improved = stopper.observe(rec.val.total);
        if (improved) {
            best.model = model;
            best.adam = adam;
        }
        best.history.epochs.push_back(rec);
        best.history.wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (on_epoch) on_epoch({fold_index, &best.history.epochs.back(), improved, &model});
        if (!tcfg.fixed_budget && stopper.should_stop()) {
            best.history.stopped_early = true;
            break;
        }
    }
    if (tcfg.fixed_budget) {
        best.model = std::move(model);
        best.adam = std::move(adam);
        best.history.best_epoch = best.history.epochs.size();
    } else {
        best.history.best_epoch = stopper.best_epoch();
    }
    return best;
}

/// Seed of fold f under a run seed: the same derivation is used by every
/// harness that trains on a fold, so their runs are comparable.
inline TrainConfig fold_train_config(TrainConfig tcfg, std::size_t fold) {
    tcfg.seed = derive_seed(tcfg.seed, "fold", fold);
    return tcfg;
}

struct FoldOutcome {
    TrainResult result;
    EvalReport holdout;
    std::vector<int> holdout_predictions;
};

struct CrossValidationResult {
    std::vector<FoldOutcome> folds;
    std::vector<std::string> holdout_ids;
    MeanStd holdout_accuracy;
};

/// One model per fold of `plan`, each scored on the fixed holdout.
inline CrossValidationResult run_cross_validation(const Dataset& ds, const SplitPlan& plan, const ModelConfig& mcfg,
                                                  const TrainConfig& tcfg, const EpochCallback& on_epoch = {}) {
    require(!plan.folds.empty(), ErrorKind::precondition, "cross-validation: split plan has no folds");
    const std::set<std::string> test(plan.test_ids.begin(), plan.test_ids.end());
    for (const auto& f : plan.folds) {
        for (const auto* ids : {&f.train_ids, &f.val_ids})
            for (const auto& id : *ids)
                require(!test.contains(id), ErrorKind::precondition,
                        "cross-validation: trial " + id + " is in a fold and in the holdout");
    }
    const auto holdout = select_trials(ds.trials, plan.test_ids);
    std::vector<int> labels;
    for (const auto& t : holdout) labels.push_back(t.y);

    CrossValidationResult out;
    out.holdout_ids = plan.test_ids;
    std::vector<double> accs;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const auto train = select_trials(ds.trials, plan.folds[f].train_ids);
        const auto val = select_trials(ds.trials, plan.folds[f].val_ids);
        FoldOutcome fo{train_fold(train, val, mcfg, fold_train_config(tcfg, f), on_epoch, f), {}, {}};
        fo.holdout_predictions = predict_labels(fo.result.model, holdout);
        fo.holdout = classification_report(fo.holdout_predictions, labels, mcfg.L);
        accs.push_back(fo.holdout.accuracy);
        out.folds.push_back(std::move(fo));
    }
    out.holdout_accuracy = mean_std(accs);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints of trained models

inline nn::Checkpoint<float> make_checkpoint(const Model& model, const nn::AdamState<float>* adam,
                                             const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json meta = {{"model", model_config_to_json(model.config())}, {"extra", extra}};
    nn::Checkpoint<float> ck{meta.dump(), model.params(), std::nullopt};
    if (adam) ck.adam = *adam;
    return ck;
}

inline void save_model(const std::filesystem::path& path, const Model& model, const nn::AdamState<float>* adam,
                       const nlohmann::json& extra = nlohmann::json::object()) {
    nn::save_checkpoint(path, make_checkpoint(model, adam, extra));
}

inline Model load_model(const std::filesystem::path& path) {
    auto ck = nn::load_checkpoint<float>(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(ck.metadata);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, "checkpoint " + path.string() + ": bad metadata: " + e.what());
    }
    require(meta.contains("model"), ErrorKind::format, "checkpoint " + path.string() + ": no model config");
    return Model(model_config_from_json(meta.at("model")), std::move(ck.params));
}

}  // namespace eeg2vec
