#include "earlywarn/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "earlywarn/error.hpp"
#include "earlywarn/pipeline.hpp"

namespace earlywarn {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::string manifest;
    std::string output;
    std::vector<std::string> overrides;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config, "Experiment config (key = value lines)");
    cmd->add_option("-m,--manifest", o.manifest, "Panel manifest; overrides the config");
    cmd->add_option("-o,--output", o.output, "Output directory");
    cmd->add_option("--set", o.overrides, "Extra key=value setting (repeatable)");
    cmd->add_option("-j,--threads", o.threads, "Worker threads (0 = all cores)");
    cmd->add_option("--seed", o.seed, "Master seed");
}

ExperimentSettings load_settings(const CommonOptions& o) {
    ExperimentSettings s;
    if (!o.config.empty()) {
        const auto file = text::KeyValueFile::read(o.config);
        s.apply(file);
        // A relative manifest in a config file is relative to that file.
        if (!s.manifest.empty() && s.manifest.is_relative())
            s.manifest = fs::path(o.config).parent_path() / s.manifest;
    }
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        s.set(std::string(text::trim(kv.substr(0, eq))), std::string(text::trim(kv.substr(eq + 1))));
    }
    if (!o.manifest.empty()) s.manifest = o.manifest;
    if (o.threads) s.threads = *o.threads;
    if (o.seed) s.seed = *o.seed;
    if (!s.manifest.empty()) s.manifest = s.manifest.lexically_normal();
    return s;
}

fs::path resolve_output(const CommonOptions& o, const ExperimentSettings& s, const std::string& command) {
    if (!o.output.empty()) return o.output;
    if (!s.output.empty()) return s.output;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / command;
    return fs::path("earlywarn-output") / command;
}

/// Echo of the settings that produced a directory. The output path itself is
/// left out so identical runs into different directories match byte for byte.
void echo_config(const fs::path& dir, ExperimentSettings s) {
    s.output.clear();
    std::ofstream out(dir / "config.resolved", std::ios::binary);
    if (!out) throw Error("cannot write '" + (dir / "config.resolved").string() + "'");
    out << s.render();
}

PreparedData load_data(const ExperimentSettings& s, std::ostream& err) {
    if (s.manifest.empty()) throw ConfigError("no panel manifest given (set 'manifest' or pass --manifest)");
    PreparedData data = prepare(load_manifest(s.manifest), s);
    if (!data.events.warning.empty()) err << "warning: " << data.events.warning << '\n';
    return data;
}

struct Prepared {
    ExperimentSettings settings;
    fs::path output;
};

Prepared begin(const CommonOptions& o, const std::string& command) {
    Prepared p{load_settings(o), {}};
    p.settings.validate();
    set_thread_count(p.settings.threads);
    p.output = resolve_output(o, p.settings, command);
    return p;
}

void report_files(const fs::path& dir, const std::string& stem, const PreparedData& data, const AlarmTrace& trace,
                  const EvaluationReport& report, const std::vector<LeadOutcome>& leads) {
    write_trace_csv(dir / (stem.empty() ? "trace.csv" : "trace_" + stem + ".csv"), data.panel.axis(), trace);
    write_report_csv(dir / (stem.empty() ? "report.csv" : "report_" + stem + ".csv"), data.panel.axis(), report,
                     leads);
    write_summary_csv(dir / (stem.empty() ? "summary.csv" : "summary_" + stem + ".csv"), report);
}

int cmd_detect(const CommonOptions& o, const std::string& model, const std::vector<std::string>& subset_flag,
               std::optional<double> lambda, std::optional<double> h, std::ostream& out, std::ostream& err) {
    Prepared p = begin(o, "detect");
    ExperimentSettings& s = p.settings;
    if (!subset_flag.empty()) s.subset = subset_flag;
    if (lambda) s.lambda = lambda;
    if (h) s.h = h;
    s.validate();

    const PreparedData data = load_data(s, err);
    for (const auto& name : s.subset) data.panel.series(name);
    fs::create_directories(p.output);
    AlarmTrace trace;
    if (model == "week-trigger") {
        const FoldPlan plan = make_folds(data.events, data.windows, 1, data.panel.weeks());
        const BaselineFit fit = fit_week_trigger(data.panel, data.events, data.windows, plan, s.week_grid);
        out << "week-trigger: week " << fit.best << '\n';
        trace = week_trigger(data.panel, WeekTriggerConfig{fit.best});
    } else if (model == "rise-trigger") {
        const FoldPlan plan = make_folds(data.events, data.windows, 1, data.panel.weeks());
        const BaselineFit fit = fit_rise_trigger(data.panel, data.events, data.windows, plan, s.rise_grid);
        out << "rise-trigger: n = " << fit.best << '\n';
        trace = rise_trigger(data.panel, RiseTriggerConfig{fit.best});
    } else {
        if (s.subset.empty()) throw ConfigError("detect needs a predictor subset (--subset a,b)");
        const NullModel null = estimate_null(data.panel, data.events, s.subset);
        DetectorConfig config{s.subset, 0.1, 0.0};
        if (s.lambda && s.h) {
            config.lambda = *s.lambda;
            config.h = *s.h;
        } else {
            CalibrationOptions calibration = s.cv_options().calibration;
            if (s.lambda) calibration.lambdas = {*s.lambda};
            const CalibrationResult result =
                optimize_params(data.panel, data.events, data.windows, s.subset, calibration);
            write_calibration_csv(p.output / "calibration.csv", result.curve);
            config.lambda = result.best.lambda;
            config.h = result.best.h;
        }
        out << "mewma: lambda " << text::format_double(config.lambda) << ", h " << text::format_double(config.h)
            << '\n';
        trace = run_scan(data.panel, null, config);
    }

    const EvaluationReport report = score(trace, data.windows, data.events, s.score_options());
    const auto leads = lead_vs_threshold(trace, data.panel.gold(), data.events, data.windows, s.reporting_epsilon);
    write_events_csv(p.output / "events.csv", data.panel.axis(), data.events, data.windows);
    report_files(p.output, "", data, trace, report, leads);
    echo_config(p.output, s);
    out << "performance " << text::format_double(report.performance) << ", wrote " << p.output.string() << '\n';
    return 0;
}

void write_selection_outputs(const fs::path& dir, const SelectionRun& run) {
    write_selection_csv(dir / "selection_traces.csv", run.traces);
    write_aggregate_csv(dir / "aggregate.csv", run.aggregate);
    std::ofstream model(dir / "selected_model.txt", std::ios::binary);
    for (const auto& name : run.aggregate.final_selection) model << name << '\n';
}

int cmd_select(const CommonOptions& o, std::ostream& out, std::ostream& err) {
    Prepared p = begin(o, "select");
    const PreparedData data = load_data(p.settings, err);
    fs::create_directories(p.output);
    write_events_csv(p.output / "events.csv", data.panel.axis(), data.events, data.windows);
    echo_config(p.output, p.settings);
    const SelectionRun run = run_selection(data, p.settings, p.output / "checkpoints");
    write_selection_outputs(p.output, run);
    if (run.resumed > 0) out << "resumed " << run.resumed << " replicate(s) from checkpoints\n";
    out << "selected:";
    for (const auto& name : run.aggregate.final_selection) out << ' ' << name;
    out << '\n';
    return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::vector<std::string>& models, std::ostream& out,
                 std::ostream& err) {
    Prepared p = begin(o, "evaluate");
    if (!models.empty()) p.settings.models = models;
    p.settings.validate();
    const PreparedData data = load_data(p.settings, err);
    const FoldPlan plan =
        make_folds(data.events, data.windows, held_out_seasons(p.settings.evaluate_folds), data.panel.weeks());
    fs::create_directories(p.output);
    write_events_csv(p.output / "events.csv", data.panel.axis(), data.events, data.windows);
    echo_config(p.output, p.settings);

    const Comparison comparison = compare_models(data, plan, p.settings);
    if (comparison.selection) write_selection_outputs(p.output, *comparison.selection);
    for (const auto& m : comparison.models) report_files(p.output, m.model, data, m.trace, m.report, m.leads);
    write_comparison_csv(p.output / "comparison.csv", comparison);
    write_fold_csv(p.output / "folds.csv", comparison);
    for (const auto& m : comparison.models)
        out << m.model << ": performance " << text::format_double(m.report.performance) << '\n';
    return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& axis, const std::vector<double>& values,
              std::ostream& out, std::ostream& err) {
    Prepared p = begin(o, "sweep");
    if (!axis.empty()) p.settings.sweep_axis = axis;
    if (!values.empty()) p.settings.sweep_values = values;
    p.settings.validate();
    if (p.settings.manifest.empty()) throw ConfigError("no panel manifest given (set 'manifest' or pass --manifest)");
    const AlignedPanel panel = load_manifest(p.settings.manifest);
    fs::create_directories(p.output);
    echo_config(p.output, p.settings);
    const auto rows = sweep(panel, p.settings);
    write_sweep_csv(p.output / "sweep.csv", rows);
    int failed = 0;
    for (const auto& r : rows)
        if (!r.ok) {
            ++failed;
            err << "sweep point " << text::format_double(r.value) << " failed: " << r.message << '\n';
        }
    out << rows.size() << " sweep point(s), " << failed << " failed\n";
    return 0;
}

int cmd_synth(const std::string& output_flag, SyntheticPanelSpec spec, const std::string& start,
              std::ostream& out) {
    if (!start.empty()) spec.start = IsoWeek::parse(start);
    fs::path dir = output_flag;
    if (dir.empty()) {
        const char* root = std::getenv(kOutputRootEnv);
        dir = (root && *root ? fs::path(root) : fs::path("earlywarn-output")) / "synth";
    }
    const AlignedPanel panel = generate_synthetic(spec);
    write_panel(dir, panel);
    out << "wrote " << panel.candidates().size() + 1 << " series (" << panel.weeks() << " weeks) to " << dir.string()
        << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multivariate EWMA early-warning detector"};
    app.require_subcommand(1);

    CommonOptions detect_o, select_o, evaluate_o, sweep_o;
    auto* detect = app.add_subcommand("detect", "Run one detector over a panel and write its alarm trace");
    add_common(detect, detect_o);
    std::vector<std::string> subset;
    std::string model = "mewma";
    std::optional<double> lambda, h;
    detect->add_option("--subset", subset, "Comma-separated predictors")->delimiter(',');
    detect->add_option("--model", model, "mewma, week-trigger or rise-trigger")
        ->check(CLI::IsMember({"mewma", "week-trigger", "rise-trigger"}));
    detect->add_option("--lambda", lambda, "Smoothing parameter (skip calibration with --threshold)");
    detect->add_option("--threshold", h, "Alarm threshold h");

    auto* select = app.add_subcommand("select", "Forward feature selection over replicates");
    add_common(select, select_o);

    auto* evaluate = app.add_subcommand("evaluate", "Compare models under cross-validation");
    add_common(evaluate, evaluate_o);
    std::vector<std::string> models;
    evaluate->add_option("--models", models, "Comma-separated model list")->delimiter(',');

    auto* sweep_cmd = app.add_subcommand("sweep", "Run select-and-evaluate over a parameter grid");
    add_common(sweep_cmd, sweep_o);
    std::string axis;
    std::vector<double> values;
    sweep_cmd->add_option("--axis", axis, "epsilon, window, atfs, training_length or gap");
    sweep_cmd->add_option("--values", values, "Comma-separated grid values")->delimiter(',');

    auto* synth = app.add_subcommand("synth", "Write a synthetic seasonal panel");
    SyntheticPanelSpec spec;
    std::string synth_output, synth_start;
    synth->add_option("-o,--output", synth_output, "Output directory");
    synth->add_option("--seasons", spec.seasons);
    synth->add_option("--weeks-per-season", spec.weeks_per_season);
    synth->add_option("--baseline", spec.baseline);
    synth->add_option("--peak", spec.peak);
    synth->add_option("--peak-jitter", spec.peak_jitter);
    synth->add_option("--noise", spec.noise);
    auto* predictors_opt = synth->add_option("--predictors", spec.predictor_count);
    synth->add_option("--lead", spec.predictor_lead);
    synth->add_option("--leads", spec.predictor_leads, "Per-predictor leads")->delimiter(',');
    synth->add_option("--seed", spec.seed);
    synth->add_option("--start", synth_start, "First week, YYYY-Www");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*detect) return cmd_detect(detect_o, model, subset, lambda, h, out, err);
        if (*select) return cmd_select(select_o, out, err);
        if (*evaluate) return cmd_evaluate(evaluate_o, models, out, err);
        if (*sweep_cmd) return cmd_sweep(sweep_o, axis, values, out, err);
        if (*synth) {
            // --leads alone fixes the predictor count
            if (!spec.predictor_leads.empty() && predictors_opt->count() == 0)
                spec.predictor_count = static_cast<int>(spec.predictor_leads.size());
            return cmd_synth(synth_output, spec, synth_start, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.is_validation() ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace earlywarn
