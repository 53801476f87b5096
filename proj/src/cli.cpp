#include "distill/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "distill/config_io.hpp"
#include "distill/data_io.hpp"
#include "distill/detect.hpp"
#include "distill/eval.hpp"
#include "distill/teacher.hpp"
#include "distill/train.hpp"

namespace distill {

namespace {

struct DataArgs {
    std::string data;
    std::string synth;
    std::string labels;
    int index_base = 1;

    void add_to(CLI::App* cmd) {
        auto* d = cmd->add_option("--data", data, "series file: UCR archive file or multivariate CSV");
        auto* s = cmd->add_option("--synth", synth, "synthetic series spec (JSON)");
        d->excludes(s);
        cmd->add_option("--labels", labels, "labels CSV aligned with a multivariate values CSV");
        cmd->add_option("--index-base", index_base, "UCR filename index base")->check(CLI::IsMember({0, 1}));
    }

    TrainTest load() const {
        if (data.empty() && synth.empty()) throw UsageError("one of --data or --synth is required");
        std::optional<std::filesystem::path> lab;
        if (!labels.empty()) lab = labels;
        return load_any(synth.empty() ? data : synth, lab, index_base);
    }
};

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

nlohmann::ordered_json epoch_json(const EpochRecord& r) {
    nlohmann::ordered_json j = {{"epoch", r.epoch}, {"L_kd", r.loss.kd}};
    if (r.has_ce) j["L_ce"] = r.loss.ce;
    if (r.has_cs) j["L_cs"] = r.loss.cs;
    j["L_total"] = r.loss.total;
    return j;
}

ModelState run_training(const TimeSeriesDataset& train_split, const Config& config, Strategy strategy,
                        const std::string& backbone_path, std::ostream* log) {
    std::optional<BackboneSpec> backbone;
    if (!backbone_path.empty()) backbone = load_pretrained(backbone_path, config);
    TrainOptions opts;
    if (backbone) opts.backbone = &*backbone;
    if (log) opts.on_epoch = [log](const EpochRecord& r) { *log << epoch_json(r).dump() << '\n'; };
    TimeSeriesDataset unlabeled = train_split;
    unlabeled.labels.reset();
    return train(unlabeled, config, strategy, opts);
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    DataArgs data;
    std::string out;
    std::string log;
    std::string strategy = "full";
    std::string backbone;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    Config config = a.config.empty() ? Config{} : load_config(a.config);
    if (a.seed) config.seed = *a.seed;
    if (a.epochs) config.epochs = *a.epochs;
    config.validate();
    const Strategy strategy = strategy_from_string(a.strategy);
    const TrainTest data = a.data.load();

    const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
    std::ofstream log(log_path);
    if (!log) throw DataError("cannot write " + log_path);
    const ModelState state = run_training(data.train, config, strategy, a.backbone, &log);
    save_checkpoint(state, a.out);
    out << "trained " << state.epoch << " epochs, final best loss " << format_real(state.best_loss) << "; wrote "
        << a.out << '\n';
    return kExitOk;
}

// --- score ------------------------------------------------------------------

struct ScoreArgs {
    std::string ckpt;
    DataArgs data;
    std::optional<std::size_t> stride;
    std::string out;
    std::string svg;
    std::string split = "test";
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    if (!std::filesystem::exists(a.ckpt)) throw DataError("checkpoint not found: " + a.ckpt);
    const ModelState state = load_checkpoint(a.ckpt);
    const TrainTest data = a.data.load();
    const TimeSeriesDataset& series = a.split == "train" ? data.train : data.test;
    const std::size_t stride = a.stride.value_or(state.config.score_stride);
    const ScoreTrace trace = score_series(state, series, stride, state.config.aggregation);
    write_trace_csv(a.out, trace.point_scores, series.labels ? &*series.labels : nullptr);
    if (!a.svg.empty()) {
        std::optional<EventSet> truth;
        if (series.labels) truth = events_from_mask(*series.labels);
        write_svg(a.svg, trace.point_scores, truth ? &*truth : nullptr);
    }
    out << "scored " << trace.point_scores.size() << " points; wrote " << a.out << '\n';
    return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    std::string trace;
    std::string truth;
    std::string config;
    std::optional<double> quantile;
    std::optional<std::size_t> margin;
    bool point_adjust = false;
    std::string out;
    std::string dataset;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const TraceFile trace = read_trace_csv(a.trace);
    std::vector<std::uint8_t> labels;
    if (!a.truth.empty())
        labels = load_labels(a.truth);
    else if (trace.labels)
        labels = *trace.labels;
    else
        throw UsageError("no ground truth: pass --truth or score a labelled series");
    const Config config = a.config.empty() ? Config{} : load_config(a.config);

    EvalOptions opts;
    opts.quantile = a.quantile.value_or(config.threshold_quantile);
    opts.point_adjust = a.point_adjust;
    if (labels.size() == trace.scores.size() && events_from_mask(labels).size() == 1)
        opts.ucr_margin = a.margin.value_or(config.effective_ucr_margin());
    const std::string name = a.dataset.empty() ? std::filesystem::path(a.trace).stem().string() : a.dataset;
    const MetricReport report = evaluate(name, trace.scores, labels, opts);
    const auto j = report_to_json(report);
    if (a.out.empty())
        out << j.dump(2) << '\n';
    else
        write_json(a.out, j);
    return kExitOk;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string out;
    std::string labels;
    std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    SynthSpec spec = load_synth_spec(a.spec);
    if (a.seed) spec.seed = *a.seed;
    const TimeSeriesDataset ds = synth_dataset(spec);
    write_values_csv(a.out, ds.values);
    if (!a.labels.empty()) write_labels_csv(a.labels, *ds.labels);
    out << "wrote " << ds.length() << " x " << ds.channels() << " series to " << a.out << '\n';
    return kExitOk;
}

// --- sweep ------------------------------------------------------------------

struct SweepArgs {
    std::string config;
    std::string param;
    std::vector<std::string> values;
    DataArgs data;
    std::string strategy = "full";
    std::string backbone;
    std::string out;
    std::optional<std::uint64_t> seed;
};

std::size_t parse_count(const std::string& v) {
    std::size_t used = 0;
    unsigned long n = 0;
    try {
        n = std::stoul(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw UsageError("expected a positive integer, got '" + v + "'");
    return n;
}

// Applies one sweep value; returns the strategy to use for the run.
Strategy apply_sweep(Config& config, Strategy strategy, const std::string& param, const std::string& value) {
    if (param == "window") {
        config.window_size = parse_count(value);
    } else if (param == "layers") {
        config.student_layers = parse_count(value);
    } else if (param == "prototypes") {
        config.prototype_count = parse_count(value);
    } else if (param == "aug") {
        if (value == "none") return Strategy::nonaug;
        config.augmentation.kinds.clear();
        std::stringstream ss(value);
        for (std::string k; std::getline(ss, k, '+');) config.augmentation.kinds.push_back(augment_kind_from_string(k));
    } else {
        throw UsageError("unknown sweep parameter '" + param + "'");
    }
    config.validate();
    return strategy;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
    Config base = a.config.empty() ? Config{} : load_config(a.config);
    if (a.seed) base.seed = *a.seed;
    const Strategy strategy = strategy_from_string(a.strategy);
    const TrainTest data = a.data.load();
    if (!data.test.labels) throw DataError("sweep needs a labelled test series");

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw DataError("cannot write " + a.out);
    }
    std::ostream& csv = a.out.empty() ? out : file;
    csv << "param,value,Acc,AP,AR,AF1,status\n";
    const EventSet truth = events_from_mask(*data.test.labels);
    for (const auto& value : a.values) {
        csv << a.param << ',' << value << ',';
        try {
            Config config = base;
            const Strategy s = apply_sweep(config, strategy, a.param, value);
            const ModelState state = run_training(data.train, config, s, a.backbone, nullptr);
            const ScoreTrace trace = score_series(state, data.test, config.score_stride, config.aggregation);
            EvalOptions opts;
            opts.quantile = config.threshold_quantile;
            if (truth.size() == 1) opts.ucr_margin = config.effective_ucr_margin();
            const MetricReport r = evaluate(data.test.name, trace.point_scores, *data.test.labels, opts);
            csv << (r.accuracy ? format_real(*r.accuracy) : "") << ',' << format_real(r.affiliation.precision) << ','
                << format_real(r.affiliation.recall) << ',' << format_real(r.affiliation.f1) << ",ok\n";
        } catch (const std::exception& e) {
            std::string msg = e.what();
            std::replace(msg.begin(), msg.end(), ',', ';');
            std::replace(msg.begin(), msg.end(), '\n', ' ');
            csv << ",,,,failed: " << msg << '\n';
            err << "sweep " << a.param << '=' << value << " failed: " << e.what() << '\n';
        }
        csv.flush();
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-distillation time-series anomaly detector", "distill_tsad"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_cmd->add_option("--config", ta.config, "config JSON");
    ta.data.add_to(train_cmd);
    train_cmd->add_option("--out", ta.out, "checkpoint path")->required();
    train_cmd->add_option("--log", ta.log, "training log JSONL (default <out>.log.jsonl)");
    train_cmd->add_option("--strategy", ta.strategy, "full|nonaug|noct|wcs");
    train_cmd->add_option("--backbone", ta.backbone, "pretrained backbone container");
    train_cmd->add_option("--seed", ta.seed, "overrides the config seed");
    train_cmd->add_option("--epochs", ta.epochs, "overrides the config epoch count");

    ScoreArgs sa;
    auto* score_cmd = app.add_subcommand("score", "write the point anomaly-score trace");
    score_cmd->add_option("--ckpt", sa.ckpt, "checkpoint path")->required();
    sa.data.add_to(score_cmd);
    score_cmd->add_option("--stride", sa.stride, "window stride (default from config)");
    score_cmd->add_option("--out", sa.out, "trace CSV")->required();
    score_cmd->add_option("--svg", sa.svg, "optional SVG plot");
    score_cmd->add_option("--split", sa.split, "train|test")->check(CLI::IsMember({"train", "test"}));

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "compute metrics for a trace");
    eval_cmd->add_option("--trace", ea.trace, "trace CSV")->required();
    eval_cmd->add_option("--truth", ea.truth, "labels CSV (default: the trace's label column)");
    eval_cmd->add_option("--config", ea.config, "config JSON supplying quantile and UCR margin");
    eval_cmd->add_option("--quantile", ea.quantile, "threshold quantile in (0,1)");
    eval_cmd->add_option("--margin", ea.margin, "UCR argmax margin");
    eval_cmd->add_flag("--point-adjust", ea.point_adjust, "point-adjust P/R/F1");
    eval_cmd->add_option("--out", ea.out, "metrics JSON (default: stdout)");
    eval_cmd->add_option("--dataset", ea.dataset, "dataset name in the report");

    SynthArgs ya;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic series");
    synth_cmd->add_option("--spec", ya.spec, "synthetic spec JSON")->required();
    synth_cmd->add_option("--out", ya.out, "values CSV")->required();
    synth_cmd->add_option("--labels", ya.labels, "labels CSV");
    synth_cmd->add_option("--seed", ya.seed, "overrides the synthetic series seed");

    SweepArgs wa;
    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate over parameter values");
    sweep_cmd->add_option("--config", wa.config, "config JSON");
    sweep_cmd->add_option("--param", wa.param, "window|layers|prototypes|aug")
        ->required()
        ->check(CLI::IsMember({"window", "layers", "prototypes", "aug"}));
    sweep_cmd->add_option("--values", wa.values, "values to try (aug: kinds joined by '+', or none)")->required();
    wa.data.add_to(sweep_cmd);
    sweep_cmd->add_option("--strategy", wa.strategy, "full|nonaug|noct|wcs");
    sweep_cmd->add_option("--backbone", wa.backbone, "pretrained backbone container");
    sweep_cmd->add_option("--out", wa.out, "results CSV (default: stdout)");
    sweep_cmd->add_option("--seed", wa.seed, "overrides the config seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(ta, out);
        if (*score_cmd) return cmd_score(sa, out);
        if (*eval_cmd) return cmd_eval(ea, out);
        if (*synth_cmd) return cmd_synth(ya, out);
        if (*sweep_cmd) return cmd_sweep(wa, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace distill
