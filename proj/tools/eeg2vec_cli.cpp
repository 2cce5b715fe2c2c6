// eeg2vec command-line interface.
//
// Every subcommand writes only below --out: config.resolved.json plus the
// checkpoints/, reports/, latents/, psd/ and data/ subdirectories it needs.
// Failures print "error category=<kind> message=<text>" to stderr and exit
// with 2 + the error kind's index (usage errors exit 2).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eeg2vec/benchgen.hpp"
#include "eeg2vec/config.hpp"
#include "eeg2vec/dataio.hpp"
#include "eeg2vec/dsp.hpp"
#include "eeg2vec/eval.hpp"
#include "eeg2vec/metrics.hpp"
#include "eeg2vec/runtime.hpp"
#include "eeg2vec/synth.hpp"
#include "eeg2vec/train.hpp"

namespace fs = std::filesystem;
using namespace eeg2vec;

namespace {

enum class Verbosity { quiet, normal, verbose };

struct Globals {
    std::string config = "default";
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
    bool verbose = false;

    Verbosity level() const { return quiet ? Verbosity::quiet : verbose ? Verbosity::verbose : Verbosity::normal; }
};

class Log {
public:
    explicit Log(Verbosity v) : v_(v) {}
    void info(const std::string& line) const {
        if (v_ != Verbosity::quiet) std::cout << line << '\n' << std::flush;
    }
    void debug(const std::string& line) const {
        if (v_ == Verbosity::verbose) std::cout << line << '\n' << std::flush;
    }
    Verbosity level() const { return v_; }

private:
    Verbosity v_;
};

std::string kv(const std::string& event, std::initializer_list<std::pair<const char*, std::string>> fields) {
    std::ostringstream os;
    os << "event=" << event;
    for (const auto& [k, v] : fields) os << ' ' << k << '=' << v;
    return os.str();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }

RunConfig resolve_config(const Globals& g) {
    auto cfg = load_run_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    cfg.validate();
    return cfg;
}

fs::path prepare_out(const Globals& g, const RunConfig& cfg) {
    require(!g.out.empty(), ErrorKind::usage, "--out is required");
    const fs::path out(g.out);
    fs::create_directories(out);
    write_text_file(out / "config.resolved.json", run_config_to_json(cfg).dump(2) + "\n");
    return out;
}

void check_dataset_matches(const Dataset& ds, const ModelConfig& m) {
    require(ds.meta.C == m.C && ds.meta.T == m.T && ds.meta.L == m.L && ds.meta.P == m.P, ErrorKind::config,
            "dataset geometry (C=" + std::to_string(ds.meta.C) + ", T=" + std::to_string(ds.meta.T) +
                ", L=" + std::to_string(ds.meta.L) + ", P=" + std::to_string(ds.meta.P) +
                ") does not match the model config");
}

SplitPlan load_or_make_split(const std::string& split_path, const Dataset& ds, const RunConfig& cfg,
                             const fs::path& out) {
    if (!split_path.empty()) return split_plan_from_json(read_json_file(split_path));
    auto plan = make_split_plan(ds.trials, cfg.split.test_fraction, cfg.split.folds, cfg.split_seed());
    write_text_file(out / "split.json", split_plan_to_json(plan).dump(2) + "\n");
    return plan;
}

EpochCallback epoch_logger(const Log& log, const std::string& tag) {
    return [&log, tag](const EpochLog& e) {
        const auto& r = *e.record;
        const bool show = log.level() == Verbosity::verbose || (log.level() == Verbosity::normal && r.epoch % 10 == 0);
        if (!show) return;
        std::cout << kv("epoch", {{"run", tag},
                                  {"fold", num(e.fold)},
                                  {"epoch", num(r.epoch)},
                                  {"train_recon", num(r.train.recon)},
                                  {"train_kl", num(r.train.kl)},
                                  {"train_cla", num(r.train.cla)},
                                  {"train_total", num(r.train.total)},
                                  {"val_recon", num(r.val.recon)},
                                  {"val_kl", num(r.val.kl)},
                                  {"val_cla", num(r.val.cla)},
                                  {"val_total", num(r.val.total)},
                                  {"val_accuracy", num(r.val_accuracy)},
                                  {"improved", e.improved ? "1" : "0"}})
                  << '\n'
                  << std::flush;
    };
}

std::vector<int> labels_of(const std::vector<Trial>& trials) {
    std::vector<int> y;
    for (const auto& t : trials) y.push_back(t.y);
    return y;
}

std::vector<int> participants_of(const std::vector<Trial>& trials) {
    std::vector<int> p;
    for (const auto& t : trials) p.push_back(t.p);
    return p;
}

/// `per_class` prior samples for every class, spread over participants by
/// largest remainder; seeds derive from `seed` per (class, participant).
std::string beta_tag(double b) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", b);
    return buf;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_benchgen(const Globals& g, const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto bench = make_benchmark(cfg.resolved_benchmark());
    const auto manifest = write_benchmark(out / "data", bench);
    log.info(kv("benchgen", {{"trials", num(bench.dataset.trials.size())}, {"manifest", manifest.string()}}));
}

struct PreprocessArgs {
    std::string recordings;
    std::optional<double> low_hz, high_hz, window_s, drop_head_s, keep_s, total_s, target_fs;
    std::optional<int> order;
};

void cmd_preprocess(const Globals& g, const PreprocessArgs& a, const Log& log) {
    auto cfg = resolve_config(g);
    auto& pc = cfg.preprocess;
    if (a.low_hz) pc.low_hz = *a.low_hz;
    if (a.high_hz) pc.high_hz = *a.high_hz;
    if (a.order) pc.order = *a.order;
    if (a.window_s) pc.window_s = *a.window_s;
    if (a.drop_head_s) pc.drop_head_s = *a.drop_head_s;
    if (a.keep_s) pc.keep_s = *a.keep_s;
    if (a.total_s) pc.total_s = *a.total_s;
    if (a.target_fs) pc.target_fs = *a.target_fs;
    const auto rs = load_recordings(a.recordings);
    pc.input_fs = rs.fs;
    const auto out = prepare_out(g, cfg);

    Dataset ds;
    ds.meta.C = rs.channel_names.size();
    ds.meta.T = static_cast<std::size_t>(std::llround(pc.window_s * pc.target_fs));
    ds.meta.L = rs.L;
    ds.meta.P = rs.P;
    ds.meta.fs = pc.target_fs;
    ds.meta.channel_names = rs.channel_names;
    for (const auto& r : rs.recordings) {
        const auto epochs = dsp::preprocess_recording(r.x, pc);
        for (std::size_t k = 0; k < epochs.size(); ++k) {
            Trial t;
            char suffix[16];
            std::snprintf(suffix, sizeof suffix, "-e%03zu", k);
            t.id = r.id + suffix;
            t.x = epochs[k].cast<float>();
            t.y = r.y;
            t.p = r.p;
            t.fs = pc.target_fs;
            ds.trials.push_back(std::move(t));
        }
        log.debug(kv("recording", {{"id", r.id}, {"epochs", num(epochs.size())}}));
    }
    const auto manifest = save_dataset(out / "data", ds);
    log.info(kv("preprocess", {{"recordings", num(rs.recordings.size())},
                               {"trials", num(ds.trials.size())},
                               {"manifest", manifest.string()}}));
}

void cmd_split(const Globals& g, const std::string& data, const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto ds = load_dataset(data);
    const auto plan = make_split_plan(ds.trials, cfg.split.test_fraction, cfg.split.folds, cfg.split_seed());
    write_text_file(out / "split.json", split_plan_to_json(plan).dump(2) + "\n");
    log.info(kv("split", {{"test", num(plan.test_ids.size())}, {"folds", num(plan.folds.size())}}));
}

void write_fold_reports(const fs::path& out, std::size_t f, const TrainResult& r, const EvalReport& rep,
                        const ParticipantReports& pr) {
    const std::string k = std::to_string(f);
    write_text_file(out / "reports" / ("history_fold" + k + ".csv"), history_csv(r.history));
    write_text_file(out / "reports" / ("timing_fold" + k + ".csv"), timing_csv(r.history));
    write_text_file(out / "reports" / ("holdout_fold" + k + ".csv"), report_csv(rep));
    write_text_file(out / "reports" / ("holdout_fold" + k + ".txt"), report_text(rep));
    write_text_file(out / "reports" / ("participants_fold" + k + ".csv"), participant_csv(pr));
}

void cmd_train(const Globals& g, const std::string& data, const std::string& split, std::optional<std::size_t> fold,
               const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto ds = load_dataset(data);
    check_dataset_matches(ds, cfg.model);
    const auto plan = load_or_make_split(split, ds, cfg, out);
    require(!fold || *fold < plan.folds.size(), ErrorKind::usage, "--fold out of range");
    const auto holdout = select_trials(ds.trials, plan.test_ids);
    const auto labels = labels_of(holdout);
    const auto tcfg = cfg.resolved_train();

    std::ostringstream summary;
    summary << "fold,best_epoch,epochs,stopped_early,holdout_accuracy\n";
    std::vector<double> accs;
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        if (fold && f != *fold) continue;
        const auto train = select_trials(ds.trials, plan.folds[f].train_ids);
        const auto val = select_trials(ds.trials, plan.folds[f].val_ids);
        const auto run = train_fold(train, val, cfg.model, fold_train_config(tcfg, f), epoch_logger(log, "train"), f);
        const auto preds = predict_labels(run.model, holdout);
        const auto rep = classification_report(preds, labels, cfg.model.L);
        const auto pr = per_participant_report(preds, labels, participants_of(holdout), cfg.model.L, cfg.model.P);
        for (const auto& w : pr.warnings) log.info(kv("warning", {{"fold", num(f)}, {"message", "\"" + w + "\""}}));
        save_model(out / "checkpoints" / ("fold" + std::to_string(f) + ".ckpt"), run.model, &run.adam,
                   {{"fold", f}, {"best_epoch", run.history.best_epoch}});
        write_fold_reports(out, f, run, rep, pr);
        accs.push_back(rep.accuracy);
        summary << f << ',' << run.history.best_epoch << ',' << run.history.epochs.size() << ','
                << (run.history.stopped_early ? 1 : 0) << ',' << rep.accuracy << '\n';
        log.info(kv("fold_done", {{"fold", num(f)},
                                  {"best_epoch", num(run.history.best_epoch)},
                                  {"epochs", num(run.history.epochs.size())},
                                  {"holdout_accuracy", num(rep.accuracy)}}));
    }
    const auto ms = mean_std(accs);
    summary << "mean,,,," << ms.mean << "\nstd,,,," << ms.std << '\n';
    write_text_file(out / "reports" / "cv_summary.csv", summary.str());
    log.info(kv("train_done", {{"folds", num(accs.size())},
                               {"holdout_accuracy_mean", num(ms.mean)},
                               {"holdout_accuracy_std", num(ms.std)}}));
}

void cmd_encode(const Globals& g, const std::string& data, const std::string& checkpoint, const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto model = load_model(checkpoint);
    const auto ds = load_dataset(data);
    check_dataset_matches(ds, model.config());
    const auto note = export_latents(ds.trials, model, out / "latents" / "latents.csv");
    write_text_file(out / "reports" / "compression.txt", note + "\n");
    log.info(kv("encode", {{"trials", num(ds.trials.size())}, {"d_z", num(model.config().d_z)}}));
    log.info(note);
}

struct GenerateArgs {
    std::string checkpoint, mode = "prior", data;
    int y = 0, p = 0;
    std::size_t count = 1;
    std::vector<std::string> reference_ids;
    double fs = 200.0;
};

void cmd_generate(const Globals& g, const GenerateArgs& a, const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto model = load_model(a.checkpoint);
    const auto& m = model.config();
    Dataset ds;
    ds.meta = {m.C, m.T, m.L, m.P, a.fs, DatasetMeta::default_channel_names(m.C)};
    if (a.mode == "prior") {
        require(a.reference_ids.empty(), ErrorKind::usage, "--reference-ids requires --mode reference");
        GenerationRequest req{GenerationMode::from_prior, a.y, a.p, a.count, cfg.generate_seed(), {}};
        ds.trials = generate_from_prior(req, model, a.fs);
    } else if (a.mode == "reference") {
        require(!a.data.empty(), ErrorKind::usage, "--mode reference needs --data");
        const auto src = load_dataset(a.data);
        check_dataset_matches(src, m);
        ds.meta = src.meta;
        GenerationRequest check{GenerationMode::from_reference, a.y, a.p, a.count, cfg.generate_seed(), a.reference_ids};
        check.validate(m);
        const auto refs = select_trials(src.trials, a.reference_ids);
        Rng rng(derive_seed(cfg.generate_seed(), "reference"));
        for (const auto& ref : refs)
            for (std::size_t i = 0; i < a.count; ++i) {
                auto t = generate_from_reference(ref, a.y, a.p, model, rng);
                if (a.count > 1) t.id += "-" + std::to_string(i);
                ds.trials.push_back(std::move(t));
            }
    } else {
        fail(ErrorKind::usage, "--mode must be 'prior' or 'reference'");
    }
    const auto manifest = save_dataset(out / "generated", ds);
    log.info(kv("generate", {{"mode", a.mode}, {"trials", num(ds.trials.size())}, {"manifest", manifest.string()}}));
}

void cmd_evaluate(const Globals& g, const std::string& data, const std::string& split, const std::string& checkpoint,
                  const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto model = load_model(checkpoint);
    const auto ds = load_dataset(data);
    check_dataset_matches(ds, model.config());
    const auto plan = load_or_make_split(split, ds, cfg, out);
    const auto holdout = select_trials(ds.trials, plan.test_ids);
    const std::set<std::string> test(plan.test_ids.begin(), plan.test_ids.end());
    std::vector<Trial> pool;
    for (const auto& t : ds.trials)
        if (!test.contains(t.id)) pool.push_back(t);

    const auto labels = labels_of(holdout);
    const auto preds = predict_labels(model, holdout);
    const auto rep = classification_report(preds, labels, model.config().L);
    const auto pr = per_participant_report(preds, labels, participants_of(holdout), model.config().L, model.config().P);
    write_text_file(out / "reports" / "eval_report.csv", report_csv(rep));
    write_text_file(out / "reports" / "eval_report.txt", report_text(rep));
    write_text_file(out / "reports" / "participants.csv", participant_csv(pr));
    for (const auto& w : pr.warnings) log.info(kv("warning", {{"message", "\"" + w + "\""}}));

    auto wp = cfg.evaluate.welch;
    wp.fs = ds.meta.fs;
    const auto generated = prior_samples_per_class(model, cfg.evaluate.generated_per_class, cfg.generate_seed(), ds.meta.fs);
    const auto cmp = psd_fidelity(ds.trials, generated, ds.meta, cfg.evaluate.channel, wp);
    write_text_file(out / "psd" / ("psd_" + cfg.evaluate.channel + ".csv"), psd_csv(cmp));
    std::ostringstream gaps;
    gaps << "class,low_gap_db,high_gap_db\n";
    for (const auto& c : cmp.classes) gaps << c.cls << ',' << c.low_gap_db << ',' << c.high_gap_db << '\n';
    gaps << "mean," << cmp.low_gap_db << ',' << cmp.high_gap_db << '\n';
    write_text_file(out / "reports" / "psd_gaps.csv", gaps.str());

    const auto inv = participant_invariance(model, pool, holdout);
    std::ostringstream iv;
    iv << "probe,test_accuracy,chance,margin\n"
       << "class," << inv.class_probe.test_accuracy << ',' << inv.class_probe.chance << ',' << inv.class_margin << '\n'
       << "participant," << inv.participant_probe.test_accuracy << ',' << inv.participant_probe.chance << ','
       << inv.participant_margin << '\n'
       << "gap,,," << inv.gap << '\n';
    write_text_file(out / "reports" / "invariance.csv", iv.str());

    log.info(kv("evaluate", {{"holdout_accuracy", num(rep.accuracy)},
                             {"psd_low_gap_db", num(cmp.low_gap_db)},
                             {"psd_high_gap_db", num(cmp.high_gap_db)},
                             {"invariance_gap", num(inv.gap)}}));
}

void cmd_sweep_beta(const Globals& g, const std::string& data, const std::string& split, const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto ds = load_dataset(data);
    check_dataset_matches(ds, cfg.model);
    const auto plan = load_or_make_split(split, ds, cfg, out);
    const auto res = run_beta_sweep(ds, plan, cfg.model, cfg.resolved_train(), cfg.sweep.betas, cfg.sweep.fold,
                                    epoch_logger(log, "sweep"));
    write_text_file(out / "reports" / "beta_sweep.csv", beta_sweep_csv(res.rows));
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        const auto tag = beta_tag(res.rows[i].beta);
        save_model(out / "checkpoints" / ("beta_" + tag + ".ckpt"), res.runs[i].model, &res.runs[i].adam,
                   {{"beta", res.rows[i].beta}, {"fold", cfg.sweep.fold}});
        export_latents(ds.trials, res.runs[i].model, out / "latents" / ("beta_" + tag + ".csv"));
        log.info(kv("beta_row", {{"beta", num(res.rows[i].beta)},
                                 {"val_recon_mse", num(res.rows[i].recon_mse)},
                                 {"decorrelation", num(res.rows[i].decorrelation.score)},
                                 {"val_accuracy", num(res.rows[i].val_accuracy)}}));
    }
}

void cmd_augment(const Globals& g, const std::string& data, const std::string& split, const std::string& generator,
                 const Log& log) {
    const auto cfg = resolve_config(g);
    const auto out = prepare_out(g, cfg);
    const auto ds = load_dataset(data);
    check_dataset_matches(ds, cfg.model);
    const auto plan = load_or_make_split(split, ds, cfg, out);
    const auto f = cfg.augment.fold;
    const auto train = select_trials(ds.trials, plan.folds[f].train_ids);
    const auto val = select_trials(ds.trials, plan.folds[f].val_ids);
    const auto test = select_trials(ds.trials, plan.test_ids);
    const auto tcfg = fold_train_config(cfg.resolved_train(), f);

    std::optional<Model> gen;
    if (!generator.empty()) {
        gen = load_model(generator);
    } else {
        auto run = train_fold(train, val, cfg.model, tcfg, epoch_logger(log, "generator"), f);
        save_model(out / "checkpoints" / "generator.ckpt", run.model, &run.adam, {{"fold", f}});
        gen = std::move(run.model);
    }
    auto arm = cfg.model;
    arm.lambda = cfg.augment.lambda;
    const auto rows = run_augmentation_experiment(train, val, test, cfg.augment.fractions, *gen, arm, tcfg,
                                                  cfg.augment_seed(), epoch_logger(log, "augment"));
    write_text_file(out / "reports" / "augmentation.csv", augmentation_csv(rows));
    std::ostringstream txt;
    for (const auto& r : rows) {
        txt << "fraction " << r.fraction << " (real " << r.n_real << ", synthetic " << r.n_synthetic << ", test "
            << r.n_test << ")\n"
            << report_text(r.test) << '\n';
        log.info(kv("augment_row", {{"fraction", num(r.fraction)},
                                    {"n_real", num(r.n_real)},
                                    {"n_synthetic", num(r.n_synthetic)},
                                    {"accuracy", num(r.test.accuracy)}}));
    }
    write_text_file(out / "reports" / "augmentation.txt", txt.str());
}

void add_globals(CLI::App* sub, Globals& g) {
    sub->add_option("--config", g.config, "Run config: 'default', 'reference' or a JSON file")->capture_default_str();
    sub->add_option("--seed", g.seed, "Override the config's top-level seed");
    sub->add_option("--out", g.out, "Output directory")->required();
    sub->add_flag("-q,--quiet", g.quiet, "Suppress log lines");
    sub->add_flag("-v,--verbose", g.verbose, "Log every epoch");
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"eeg2vec: conditional variational EEG representation learning"};
    app.require_subcommand(1);
    Globals g;
    std::string data, split, checkpoint, generator;
    std::optional<std::size_t> fold;
    PreprocessArgs pre;
    GenerateArgs gen;

    auto* benchgen = app.add_subcommand("benchgen", "Write the synthetic benchmark dataset to <out>/data");
    add_globals(benchgen, g);

    auto* preprocess = app.add_subcommand("preprocess", "Band-pass, decimate, epoch and normalize raw recordings");
    add_globals(preprocess, g);
    preprocess->add_option("--recordings", pre.recordings, "Recordings manifest (JSON)")->required();
    preprocess->add_option("--low-hz", pre.low_hz, "Band-pass low edge (Hz)");
    preprocess->add_option("--high-hz", pre.high_hz, "Band-pass high edge (Hz)");
    preprocess->add_option("--order", pre.order, "Butterworth order");
    preprocess->add_option("--window-s", pre.window_s, "Epoch length (s)");
    preprocess->add_option("--drop-head-s", pre.drop_head_s, "Seconds dropped after cropping");
    preprocess->add_option("--keep-s", pre.keep_s, "Seconds kept after the dropped head");
    preprocess->add_option("--total-s", pre.total_s, "Trailing seconds of each recording used");
    preprocess->add_option("--target-fs", pre.target_fs, "Output sampling rate (Hz)");

    auto* split_cmd = app.add_subcommand("split", "Stratified holdout + k-fold plan to <out>/split.json");
    add_globals(split_cmd, g);
    split_cmd->add_option("--data", data, "Dataset manifest")->required();

    auto* train = app.add_subcommand("train", "Cross-validated training with holdout scoring");
    add_globals(train, g);
    train->add_option("--data", data, "Dataset manifest")->required();
    train->add_option("--split", split, "Split plan (made from the config when omitted)");
    train->add_option("--fold", fold, "Train a single fold");

    auto* encode = app.add_subcommand("encode", "Export posterior means to <out>/latents/latents.csv");
    add_globals(encode, g);
    encode->add_option("--data", data, "Dataset manifest")->required();
    encode->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();

    auto* generate = app.add_subcommand("generate", "Decode synthetic trials to <out>/generated");
    add_globals(generate, g);
    generate->add_option("--checkpoint", gen.checkpoint, "Model checkpoint")->required();
    generate->add_option("--mode", gen.mode, "prior | reference")->capture_default_str();
    generate->add_option("--y", gen.y, "Target class")->required();
    generate->add_option("--p", gen.p, "Target participant")->required();
    generate->add_option("--count", gen.count, "Trials (per reference in reference mode)")->capture_default_str();
    generate->add_option("--data", gen.data, "Dataset holding the reference trials");
    generate->add_option("--reference-ids", gen.reference_ids, "Reference trial ids")->delimiter(',');
    generate->add_option("--fs", gen.fs, "Sampling rate recorded for prior samples")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Holdout metrics, PSD fidelity and latent probes");
    add_globals(evaluate, g);
    evaluate->add_option("--data", data, "Dataset manifest")->required();
    evaluate->add_option("--split", split, "Split plan (made from the config when omitted)");
    evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();

    auto* sweep = app.add_subcommand("sweep-beta", "Train one model per beta on one fold");
    add_globals(sweep, g);
    sweep->add_option("--data", data, "Dataset manifest")->required();
    sweep->add_option("--split", split, "Split plan (made from the config when omitted)");

    auto* augment = app.add_subcommand("augment-experiment", "Retrain with prior-sampled synthetic trials");
    add_globals(augment, g);
    augment->add_option("--data", data, "Dataset manifest")->required();
    augment->add_option("--split", split, "Split plan (made from the config when omitted)");
    augment->add_option("--generator", generator, "Generator checkpoint (trained on the fold when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        if (rc == 0) return 0;
        std::cerr << "error category=usage message=\"" << e.what() << "\"\n";
        return exit_code(ErrorKind::usage);
    }

    try {
        const Log log(g.level());
        if (*benchgen) cmd_benchgen(g, log);
        else if (*preprocess) cmd_preprocess(g, pre, log);
        else if (*split_cmd) cmd_split(g, data, log);
        else if (*train) cmd_train(g, data, split, fold, log);
        else if (*encode) cmd_encode(g, data, checkpoint, log);
        else if (*generate) cmd_generate(g, gen, log);
        else if (*evaluate) cmd_evaluate(g, data, split, checkpoint, log);
        else if (*sweep) cmd_sweep_beta(g, data, split, log);
        else if (*augment) cmd_augment(g, data, split, generator, log);
    } catch (const Error& e) {
        std::cerr << "error category=" << to_string(e.kind()) << " message=\"" << e.what() << "\"\n";
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error category=io message=\"" << e.what() << "\"\n";
        return exit_code(ErrorKind::io);
    }
    return 0;
}
