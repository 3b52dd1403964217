#include "earlywarn/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "earlywarn/error.hpp"

namespace earlywarn {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

double parse_real(const std::string& key, const std::string& v) {
    const auto d = text::parse_double(v);
    if (!d) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    return *d;
}

long long parse_integer(const std::string& key, const std::string& v) {
    const auto i = text::parse_int(v);
    if (!i) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    return *i;
}

std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    for (const auto& item : text::split(v, ',')) {
        const auto t = std::string(text::trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

template <class T, class Parse>
std::vector<T> parse_list_of(const std::string& key, const std::string& v, Parse parse) {
    std::vector<T> out;
    for (const auto& item : parse_list(v)) out.push_back(static_cast<T>(parse(key, item)));
    return out;
}

FoldPreset parse_preset(const std::string& key, const std::string& v) {
    if (v == "select-6fold") return FoldPreset::select_6fold;
    if (v == "compare-3fold") return FoldPreset::compare_3fold;
    throw ConfigError("'" + key + "' expects select-6fold or compare-3fold, got '" + v + "'");
}

template <class T, class Format>
std::string join(const std::vector<T>& items, Format format) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += format(items[i]);
    }
    return out;
}

std::string join_names(const std::vector<std::string>& names, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += sep;
        out += names[i];
    }
    return out;
}

std::string fmt(double v) { return text::format_double(v); }
std::string fmt_opt(const std::optional<double>& v) { return v ? text::format_double(*v) : std::string("NA"); }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

const char* to_string(FoldPreset preset) {
    return preset == FoldPreset::select_6fold ? "select-6fold" : "compare-3fold";
}

const char* to_string(SpacingMode mode) {
    return mode == SpacingMode::all_alarms ? "all-alarms" : "cluster-onsets";
}

const char* to_string(AtfsEstimator estimator) {
    return estimator == AtfsEstimator::alarm_rate ? "alarm-rate" : "within-sequence";
}

void ExperimentSettings::set(const std::string& key, const std::string& v) {
    if (key == "manifest") manifest = v;
    else if (key == "output") output = v;
    else if (key == "epsilon") epsilon = parse_real(key, v);
    else if (key == "min_duration") min_duration = static_cast<int>(parse_integer(key, v));
    else if (key == "window") window = static_cast<int>(parse_integer(key, v));
    else if (key == "lead") lead = static_cast<int>(parse_integer(key, v));
    else if (key == "clip_to_onset_minimum") clip_to_onset_minimum = parse_bool(key, v);
    else if (key == "atfs") atfs = parse_real(key, v);
    else if (key == "simulations") simulations = static_cast<int>(parse_integer(key, v));
    else if (key == "sequence_length") sequence_length = static_cast<int>(parse_integer(key, v));
    else if (key == "lambdas") lambdas = parse_list_of<double>(key, v, parse_real);
    else if (key == "secant_tolerance") secant_tolerance = parse_real(key, v);
    else if (key == "tolerance_kind") {
        if (v == "atfs") tolerance_kind = ToleranceKind::atfs;
        else if (v == "threshold") tolerance_kind = ToleranceKind::threshold;
        else throw ConfigError("'tolerance_kind' expects atfs or threshold, got '" + v + "'");
    } else if (key == "max_iterations") max_iterations = static_cast<int>(parse_integer(key, v));
    else if (key == "spacing") {
        if (v == "all-alarms") spacing = SpacingMode::all_alarms;
        else if (v == "cluster-onsets") spacing = SpacingMode::cluster_onsets;
        else throw ConfigError("'spacing' expects all-alarms or cluster-onsets, got '" + v + "'");
    } else if (key == "atfs_estimator") {
        if (v == "alarm-rate") atfs_estimator = AtfsEstimator::alarm_rate;
        else if (v == "within-sequence") atfs_estimator = AtfsEstimator::within_sequence;
        else throw ConfigError("'atfs_estimator' expects alarm-rate or within-sequence, got '" + v + "'");
    } else if (key == "burn_in") burn_in = static_cast<int>(parse_integer(key, v));
    else if (key == "k_max") k_max = static_cast<int>(parse_integer(key, v));
    else if (key == "min_improvement") min_improvement = parse_real(key, v);
    else if (key == "replicates") replicates = static_cast<int>(parse_integer(key, v));
    else if (key == "select_folds") select_folds = parse_preset(key, v);
    else if (key == "evaluate_folds") evaluate_folds = parse_preset(key, v);
    else if (key == "reset_at_fold_boundaries") reset_at_fold_boundaries = parse_bool(key, v);
    else if (key == "seed") seed = static_cast<std::uint64_t>(parse_integer(key, v));
    else if (key == "reporting_epsilon") reporting_epsilon = parse_real(key, v);
    else if (key == "raw_alarm_precision") raw_alarm_precision = parse_bool(key, v);
    else if (key == "late_onsets_as_false") late_onsets_as_false = parse_bool(key, v);
    else if (key == "candidates") candidates = parse_list(v);
    else if (key == "subset") subset = parse_list(v);
    else if (key == "lambda") lambda = v.empty() ? std::nullopt : std::optional<double>(parse_real(key, v));
    else if (key == "h") h = v.empty() ? std::nullopt : std::optional<double>(parse_real(key, v));
    else if (key == "models") models = parse_list(v);
    else if (key == "week_grid") week_grid = parse_list_of<int>(key, v, parse_integer);
    else if (key == "rise_grid") rise_grid = parse_list_of<int>(key, v, parse_integer);
    else if (key == "sweep_axis") sweep_axis = v;
    else if (key == "sweep_values") sweep_values = parse_list_of<double>(key, v, parse_real);
    else if (key == "gap_train_seasons") gap_train_seasons = static_cast<int>(parse_integer(key, v));
    else if (key == "threads") threads = static_cast<int>(parse_integer(key, v));
    else throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentSettings::apply(const text::KeyValueFile& file) {
    for (const auto& [key, value] : file.entries()) set(key, value);
}

void ExperimentSettings::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ValidationError(what);
    };
    require(min_duration >= 1, "min_duration must be at least 1");
    require(window >= 1, "window must be at least 1");
    require(lead >= 0 && lead < window, "lead must lie in [0, window)");
    require(atfs > 1.0, "atfs must exceed 1");
    require(simulations >= 1, "simulations must be at least 1");
    require(sequence_length >= 0, "sequence_length must be non-negative");
    require(!lambdas.empty(), "lambdas must not be empty");
    for (double l : lambdas) require(l > 0.0 && l < 1.0, "every lambda must lie in (0, 1)");
    require(secant_tolerance > 0.0, "secant_tolerance must be positive");
    require(max_iterations >= 2, "max_iterations must be at least 2");
    require(k_max >= 1, "k_max must be at least 1");
    require(min_improvement >= 0.0, "min_improvement must be non-negative");
    require(replicates >= 1, "replicates must be at least 1");
    require(reporting_epsilon >= epsilon, "reporting_epsilon must not be below epsilon");
    require(!lambda || (*lambda > 0.0 && *lambda < 1.0), "lambda must lie in (0, 1)");
    require(!h || *h >= 0.0, "h must be non-negative");
    require(gap_train_seasons >= 1, "gap_train_seasons must be at least 1");
    require(threads >= 0, "threads must be non-negative");
    for (const auto& m : models)
        require(m == "optimized" || m == "week-trigger" || m == "rise-trigger" || m == "univariate-gold",
                "unknown model '" + m + "'");
    require(sweep_axis == "epsilon" || sweep_axis == "window" || sweep_axis == "atfs" ||
                sweep_axis == "training_length" || sweep_axis == "gap",
            "unknown sweep axis '" + sweep_axis + "'");
}

std::string ExperimentSettings::render() const {
    std::ostringstream out;
    auto line = [&](const char* key, const std::string& value) { out << key << " = " << value << '\n'; };
    auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
    auto ints = [](const std::vector<int>& v) { return join(v, [](int i) { return std::to_string(i); }); };
    line("manifest", manifest.generic_string());
    line("output", output.generic_string());
    line("epsilon", fmt(epsilon));
    line("min_duration", std::to_string(min_duration));
    line("window", std::to_string(window));
    line("lead", std::to_string(lead));
    line("clip_to_onset_minimum", flag(clip_to_onset_minimum));
    line("atfs", fmt(atfs));
    line("simulations", std::to_string(simulations));
    line("sequence_length", std::to_string(sequence_length));
    line("lambdas", join(lambdas, fmt));
    line("secant_tolerance", fmt(secant_tolerance));
    line("tolerance_kind", tolerance_kind == ToleranceKind::atfs ? "atfs" : "threshold");
    line("max_iterations", std::to_string(max_iterations));
    line("spacing", to_string(spacing));
    line("atfs_estimator", to_string(atfs_estimator));
    line("burn_in", std::to_string(burn_in));
    line("k_max", std::to_string(k_max));
    line("min_improvement", fmt(min_improvement));
    line("replicates", std::to_string(replicates));
    line("select_folds", to_string(select_folds));
    line("evaluate_folds", to_string(evaluate_folds));
    line("reset_at_fold_boundaries", flag(reset_at_fold_boundaries));
    line("seed", std::to_string(seed));
    line("reporting_epsilon", fmt(reporting_epsilon));
    line("raw_alarm_precision", flag(raw_alarm_precision));
    line("late_onsets_as_false", flag(late_onsets_as_false));
    line("candidates", join_names(candidates));
    line("subset", join_names(subset));
    line("lambda", lambda ? fmt(*lambda) : "");
    line("h", h ? fmt(*h) : "");
    line("models", join_names(models));
    line("week_grid", ints(week_grid));
    line("rise_grid", ints(rise_grid));
    line("sweep_axis", sweep_axis);
    line("sweep_values", join(sweep_values, fmt));
    line("gap_train_seasons", std::to_string(gap_train_seasons));
    line("threads", std::to_string(threads));
    return out.str();
}

ScoreOptions ExperimentSettings::score_options() const {
    return ScoreOptions{raw_alarm_precision, late_onsets_as_false};
}

CvOptions ExperimentSettings::cv_options(Execution execution) const {
    CvOptions o;
    o.calibration.lambdas = lambdas;
    o.calibration.solve.target = atfs;
    o.calibration.solve.tolerance = secant_tolerance;
    o.calibration.solve.tolerance_kind = tolerance_kind;
    o.calibration.solve.max_iterations = max_iterations;
    o.calibration.solve.simulations = simulations;
    o.calibration.solve.sequence_length = sequence_length;
    o.calibration.solve.seed = seed;
    o.calibration.solve.spacing = spacing;
    o.calibration.solve.estimator = atfs_estimator;
    o.calibration.solve.burn_in = burn_in;
    o.calibration.solve.execution = execution;
    o.calibration.scoring = score_options();
    o.reset_at_fold_boundaries = reset_at_fold_boundaries;
    o.execution = execution;
    return o;
}

PreparedData prepare(AlignedPanel panel, const ExperimentSettings& settings) {
    EventSet events = detect_events(panel.gold(), settings.epsilon, settings.min_duration);
    DetectionWindowSet windows = build_windows(
        events, WindowOptions{settings.window, settings.lead, settings.clip_to_onset_minimum}, panel.gold());
    return PreparedData{std::move(panel), std::move(events), std::move(windows)};
}

std::string panel_digest(const AlignedPanel& panel) {
    std::uint64_t h = fnv1a(panel.axis().start().to_string());
    auto add = [&](const Series& s) {
        h = fnv1a(s.name, h);
        for (double v : s.values) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            h = fnv1a(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
        }
    };
    add(panel.gold());
    for (const auto& c : panel.candidates()) add(c);
    return hex(h);
}

namespace {

/// Fingerprint of everything that shapes a selection trace. Output location
/// and thread count are left out on purpose: neither changes the result.
std::string selection_fingerprint(const PreparedData& data, const ExperimentSettings& settings) {
    std::istringstream in(settings.render());
    std::string line, kept;
    while (std::getline(in, line))
        if (line.rfind("output ", 0) != 0 && line.rfind("threads ", 0) != 0) kept += line + '\n';
    return panel_digest(data.panel) + '-' + hex(fnv1a(kept));
}

std::vector<std::string> selection_pool(const PreparedData& data, const ExperimentSettings& settings) {
    if (settings.candidates.empty()) return data.panel.candidate_names();
    for (const auto& name : settings.candidates) data.panel.series(name);
    return settings.candidates;
}

}  // namespace

SelectionRun run_selection(const PreparedData& data, const ExperimentSettings& settings,
                           const std::optional<std::filesystem::path>& checkpoint_dir) {
    const auto pool = selection_pool(data, settings);
    const FoldPlan plan =
        make_folds(data.events, data.windows, held_out_seasons(settings.select_folds), data.panel.weeks());
    const CrossValidation cv(data.panel, data.events, data.windows, plan, settings.cv_options());
    const SelectionOptions options{settings.k_max, settings.min_improvement};
    const std::string fingerprint = selection_fingerprint(data, settings);
    if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);

    SelectionRun run;
    for (int r = 0; r < settings.replicates; ++r) {
        std::filesystem::path file;
        if (checkpoint_dir) {
            char name[32];
            std::snprintf(name, sizeof name, "replicate_%03d.csv", r);
            file = *checkpoint_dir / name;
            const std::string tag = fingerprint + '-' + std::to_string(r);
            if (auto saved = read_trace_checkpoint(file, tag)) {
                run.traces.push_back(std::move(*saved));
                ++run.resumed;
                continue;
            }
            run.traces.push_back(forward_select(cv, pool, options, settings.seed + static_cast<std::uint64_t>(r)));
            write_trace_checkpoint(file, tag, run.traces.back());
        } else {
            run.traces.push_back(forward_select(cv, pool, options, settings.seed + static_cast<std::uint64_t>(r)));
        }
    }
    run.aggregate = aggregate_replicates(run.traces, settings.k_max);
    return run;
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::vector<double> onset_offsets(const EvaluationReport& report, const EventSet& events) {
    std::vector<double> out;
    for (const auto& e : report.events)
        if (e.detected) out.push_back(static_cast<double>(e.onset - events.events[e.event].start));
    return out;
}

/// Merges per-fold held-out traces; every week takes the statistic and alarm
/// of the fold that holds it out.
AlarmTrace pool_traces(const std::vector<AlarmTrace>& traces, const FoldPlan& plan, int weeks) {
    std::vector<double> statistic(weeks, 0.0);
    std::vector<std::uint8_t> alarm(weeks, 0);
    for (std::size_t f = 0; f < traces.size(); ++f)
        for (int t = 0; t < weeks; ++t)
            if (plan.folds[f].test[t]) {
                statistic[t] = traces[f].statistic[t];
                alarm[t] = traces[f].alarm[t];
            }
    AlarmTrace pooled;
    pooled.statistic = std::move(statistic);
    pooled.onsets = cluster_onsets(alarm);
    pooled.alarm = std::move(alarm);
    return pooled;
}

void finish(ModelEvaluation& m, const PreparedData& data, const FoldPlan& plan,
            const std::vector<AlarmTrace>& fold_traces, const ExperimentSettings& settings) {
    m.trace = pool_traces(fold_traces, plan, data.panel.weeks());
    // Windows of seasons outside every test fold are left out of the pooled score.
    std::vector<int> tested;
    for (const auto& fold : plan.folds) tested.insert(tested.end(), fold.test_events.begin(), fold.test_events.end());
    std::sort(tested.begin(), tested.end());
    const DetectionWindowSet windows = data.windows.select(tested);
    m.report = score(m.trace, windows, data.events, settings.score_options());
    m.leads = lead_vs_threshold(m.trace, data.panel.gold(), data.events, windows, settings.reporting_epsilon);
    m.mean_lead = mean_lead(m.leads);
    m.mean_onset_offset = mean_of(onset_offsets(m.report, data.events));
    double sum = 0.0;
    for (const auto& f : m.folds) sum += f.performance;
    m.mean_fold_performance = m.folds.empty() ? 0.0 : sum / static_cast<double>(m.folds.size());
}

template <class MakeTrace, class Fit>
ModelEvaluation evaluate_baseline(const std::string& model, const char* parameter, const PreparedData& data,
                                  const FoldPlan& plan, const ExperimentSettings& settings, Fit fit,
                                  MakeTrace make) {
    ModelEvaluation m;
    m.model = model;
    std::vector<AlarmTrace> fold_traces;
    for (int f = 0; f < plan.fold_count(); ++f) {
        const Fold& fold = plan.folds[f];
        // Fit on training seasons only: a one-fold plan whose scored part is
        // the training block.
        FoldPlan training;
        training.folds.push_back(Fold{{}, fold.train, {}, fold.train_events});
        const BaselineFit best = fit(training);
        AlarmTrace held_out = mask_trace(make(best.best), fold.test);
        const EvaluationReport r =
            score(held_out, data.windows.select(fold.test_events), data.events, settings.score_options());
        m.folds.push_back(FoldSummary{f, std::string(parameter) + "=" + std::to_string(best.best), r.performance,
                                      mean_of(onset_offsets(r, data.events))});
        fold_traces.push_back(std::move(held_out));
    }
    finish(m, data, plan, fold_traces, settings);
    return m;
}

}  // namespace

ModelEvaluation evaluate_subset(const CrossValidation& cv, const std::string& model,
                                const std::vector<std::string>& subset, const ExperimentSettings& settings) {
    const PreparedData data{cv.panel(), cv.events(), cv.windows()};
    ModelEvaluation m;
    m.model = model;
    m.subset = subset;
    const SubsetScore s = cv.score_subset(subset, settings.seed);
    std::vector<AlarmTrace> fold_traces;
    for (const auto& f : s.folds) {
        m.folds.push_back(FoldSummary{f.fold, "lambda=" + fmt(f.chosen.lambda) + ";h=" + fmt(f.chosen.h),
                                      f.report.performance, mean_of(onset_offsets(f.report, data.events))});
        fold_traces.push_back(f.test_trace);
    }
    finish(m, data, cv.plan(), fold_traces, settings);
    return m;
}

ModelEvaluation evaluate_week_trigger(const PreparedData& data, const FoldPlan& plan,
                                      const ExperimentSettings& settings) {
    return evaluate_baseline(
        "week-trigger", "week", data, plan, settings,
        [&](const FoldPlan& p) { return fit_week_trigger(data.panel, data.events, data.windows, p, settings.week_grid); },
        [&](int w) { return week_trigger(data.panel, WeekTriggerConfig{w}); });
}

ModelEvaluation evaluate_rise_trigger(const PreparedData& data, const FoldPlan& plan,
                                      const ExperimentSettings& settings) {
    return evaluate_baseline(
        "rise-trigger", "n", data, plan, settings,
        [&](const FoldPlan& p) { return fit_rise_trigger(data.panel, data.events, data.windows, p, settings.rise_grid); },
        [&](int n) { return rise_trigger(data.panel, RiseTriggerConfig{n}); });
}

namespace {

std::vector<std::string> chosen_subset(const SelectionRun& run) {
    if (!run.aggregate.final_selection.empty()) return run.aggregate.final_selection;
    if (run.aggregate.ranking.empty()) throw CalibrationError("selection produced no predictors");
    return {run.aggregate.ranking.front().name};
}

}  // namespace

Comparison compare_models(const PreparedData& data, const FoldPlan& plan, const ExperimentSettings& settings) {
    Comparison out;
    std::optional<CrossValidation> cv;
    auto get_cv = [&]() -> const CrossValidation& {
        if (!cv) cv.emplace(data.panel, data.events, data.windows, plan, settings.cv_options());
        return *cv;
    };
    for (const auto& model : settings.models) {
        if (model == "optimized") {
            std::vector<std::string> subset = settings.subset;
            if (subset.empty()) {
                out.selection = run_selection(data, settings);
                subset = chosen_subset(*out.selection);
            }
            out.models.push_back(evaluate_subset(get_cv(), model, subset, settings));
        } else if (model == "univariate-gold") {
            out.models.push_back(evaluate_subset(get_cv(), model, {data.panel.gold().name}, settings));
        } else if (model == "week-trigger") {
            out.models.push_back(evaluate_week_trigger(data, plan, settings));
        } else if (model == "rise-trigger") {
            out.models.push_back(evaluate_rise_trigger(data, plan, settings));
        } else {
            throw ValidationError("unknown model '" + model + "'");
        }
    }
    return out;
}

void write_comparison_csv(const std::filesystem::path& path, const Comparison& comparison) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "model,performance,precision,recall,mean_lead,mean_onset_offset,subset\n";
    for (const auto& m : comparison.models)
        out << m.model << ',' << fmt(m.report.performance) << ',' << fmt(m.report.precision) << ','
            << fmt(m.report.recall) << ',' << fmt_opt(m.mean_lead) << ',' << fmt_opt(m.mean_onset_offset) << ','
            << join_names(m.subset, ';') << '\n';
}

void write_fold_csv(const std::filesystem::path& path, const Comparison& comparison) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "model,fold,parameters,performance,mean_onset_offset\n";
    for (const auto& m : comparison.models)
        for (const auto& f : m.folds)
            out << m.model << ',' << f.fold << ',' << f.parameters << ',' << fmt(f.performance) << ','
                << fmt_opt(f.mean_onset_offset) << '\n';
}

namespace {

/// Keeps the last `seasons` seasons of the panel.
AlignedPanel last_seasons(const PreparedData& data, int seasons) {
    const auto bounds = season_bounds(data.events, data.windows, data.panel.weeks());
    const int n = static_cast<int>(bounds.size());
    if (seasons < 2 || seasons > n)
        throw ValidationError("training length " + std::to_string(seasons) + " must lie in [2, " +
                              std::to_string(n) + "] seasons");
    const int first = bounds[n - seasons].first;
    return data.panel.slice(first, data.panel.weeks() - first);
}

SweepRow sweep_point(const AlignedPanel& panel, ExperimentSettings s, double value) {
    SweepRow row;
    row.axis = s.sweep_axis;
    row.value = value;
    const auto as_int = [&](const char* what) {
        if (value != static_cast<double>(static_cast<int>(value)))
            throw ValidationError(std::string(what) + " must be a whole number");
        return static_cast<int>(value);
    };

    if (s.sweep_axis == "epsilon") {
        s.epsilon = value;
        s.reporting_epsilon = std::max(s.reporting_epsilon, value);
    } else if (s.sweep_axis == "window") {
        s.window = as_int("window");
        s.lead = s.window / 2;
    } else if (s.sweep_axis == "atfs") {
        s.atfs = value;
    }
    s.validate();

    PreparedData data = prepare(panel, s);
    if (s.sweep_axis == "training_length") data = prepare(last_seasons(data, as_int("training length")), s);

    if (s.sweep_axis == "gap") {
        const int gap = as_int("gap");
        const int n = static_cast<int>(data.events.size());
        const int test = n - 1;
        const int train_end = test - gap;  // exclusive
        const int train_begin = train_end - s.gap_train_seasons;
        if (gap < 0 || train_begin < 0)
            throw ValidationError("gap " + std::to_string(gap) + " needs " + std::to_string(s.gap_train_seasons + gap + 1) +
                                  " seasons, found " + std::to_string(n));
        std::vector<int> train;
        for (int k = train_begin; k < train_end; ++k) train.push_back(k);
        const FoldPlan split = make_split(data.events, data.windows, data.panel.weeks(), train, {test});

        std::vector<std::string> subset = s.subset;
        if (subset.empty()) {
            const auto bounds = season_bounds(data.events, data.windows, data.panel.weeks());
            const int first = bounds[train_begin].first;
            const int last = bounds[train_end - 1].second;
            const PreparedData training = prepare(data.panel.slice(first, last - first), s);
            const SelectionRun run = run_selection(training, s);
            subset = chosen_subset(run);
        }
        const CrossValidation cv(data.panel, data.events, data.windows, split, s.cv_options());
        const ModelEvaluation m = evaluate_subset(cv, "optimized", subset, s);
        row.report = m.report;
        row.mean_lead = m.mean_lead;
        row.selected = subset;
        row.ok = true;
        return row;
    }

    std::vector<std::string> subset = s.subset;
    if (subset.empty()) subset = chosen_subset(run_selection(data, s));
    const FoldPlan plan = make_folds(data.events, data.windows, held_out_seasons(s.evaluate_folds), data.panel.weeks());
    const CrossValidation cv(data.panel, data.events, data.windows, plan, s.cv_options());
    const ModelEvaluation m = evaluate_subset(cv, "optimized", subset, s);
    row.report = m.report;
    row.mean_lead = m.mean_lead;
    row.selected = subset;
    row.ok = true;
    return row;
}

}  // namespace

std::vector<SweepRow> sweep(const AlignedPanel& panel, const ExperimentSettings& settings) {
    if (settings.sweep_values.empty()) throw ValidationError("sweep_values must not be empty");
    std::vector<SweepRow> rows;
    for (double value : settings.sweep_values) {
        try {
            rows.push_back(sweep_point(panel, settings, value));
        } catch (const Error& e) {
            SweepRow failed;
            failed.axis = settings.sweep_axis;
            failed.value = value;
            failed.message = e.what();
            rows.push_back(std::move(failed));
        }
    }
    return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "axis,value,status,performance,precision,recall,mean_lead,selected,message\n";
    for (const auto& r : rows) {
        std::string message = r.message;
        std::replace(message.begin(), message.end(), ',', ';');
        std::replace(message.begin(), message.end(), '\n', ' ');
        out << r.axis << ',' << fmt(r.value) << ',' << (r.ok ? "ok" : "failed") << ',';
        if (r.ok)
            out << fmt(r.report.performance) << ',' << fmt(r.report.precision) << ',' << fmt(r.report.recall) << ','
                << fmt_opt(r.mean_lead);
        else
            out << "NA,NA,NA,NA";
        out << ',' << join_names(r.selected, ';') << ',' << message << '\n';
    }
}

}  // namespace earlywarn
