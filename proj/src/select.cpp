#include "earlywarn/select.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "earlywarn/error.hpp"
#include "earlywarn/text.hpp"

namespace earlywarn {

std::vector<std::pair<int, int>> season_bounds(const EventSet& events, const DetectionWindowSet& windows, int weeks) {
    const auto n = events.events.size();
    if (windows.windows.size() != n) throw ConfigError("detection windows do not match the event set");
    std::vector<std::pair<int, int>> seasons;
    int begin = 0;
    for (std::size_t k = 1; k < n; ++k) {
        const int quiet_begin = events.events[k - 1].end + 1;
        const int window_start = windows.windows[k].start;
        int cut = quiet_begin + (window_start - quiet_begin + 1) / 2;
        cut = std::max(cut, windows.windows[k - 1].end + 1);
        cut = std::min(cut, window_start);
        seasons.emplace_back(begin, cut);
        begin = cut;
    }
    if (n > 0) seasons.emplace_back(begin, weeks);
    return seasons;
}

namespace {

FoldPlan build_plan(std::vector<std::pair<int, int>> seasons, std::vector<int> fold_of_season, int held_out,
                    int fold_count, int weeks, const std::vector<int>& train_seasons) {
    FoldPlan plan;
    plan.seasons = std::move(seasons);
    plan.fold_of_season = std::move(fold_of_season);
    plan.held_out = held_out;
    for (int f = 0; f < fold_count; ++f) {
        Fold fold;
        fold.train.assign(weeks, 0);
        fold.test.assign(weeks, 0);
        for (std::size_t k = 0; k < plan.seasons.size(); ++k) {
            const bool test = plan.fold_of_season[k] == f;
            const bool train = train_seasons.empty()
                                   ? !test
                                   : std::find(train_seasons.begin(), train_seasons.end(), static_cast<int>(k)) !=
                                         train_seasons.end();
            if (!test && !train) continue;
            auto& mask = test ? fold.test : fold.train;
            for (int t = plan.seasons[k].first; t < plan.seasons[k].second; ++t) mask[t] = 1;
            (test ? fold.test_events : fold.train_events).push_back(static_cast<int>(k));
        }
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

}  // namespace

std::vector<int> FoldPlan::boundaries(int fold) const {
    const Fold& f = folds.at(fold);
    auto category = [&](std::size_t t) { return f.test[t] ? 2 : (f.train[t] ? 1 : 0); };
    std::vector<int> out;
    for (std::size_t t = 1; t < f.train.size(); ++t)
        if (category(t) != category(t - 1)) out.push_back(static_cast<int>(t));
    return out;
}

FoldPlan make_folds(const EventSet& events, const DetectionWindowSet& windows, int held_out, int weeks) {
    const int n = static_cast<int>(events.size());
    if (n < 2) throw ValidationError("cross-validation needs at least 2 events, found " + std::to_string(n));
    if (held_out < 1 || held_out >= n)
        throw ValidationError("held-out season count " + std::to_string(held_out) + " must lie in [1, " +
                              std::to_string(n - 1) + "]");
    const int fold_count = n / held_out;
    std::vector<int> fold_of_season(n);
    for (int k = 0; k < n; ++k) fold_of_season[k] = std::min(k / held_out, fold_count - 1);
    return build_plan(season_bounds(events, windows, weeks), std::move(fold_of_season), held_out, fold_count, weeks,
                      {});
}

FoldPlan make_split(const EventSet& events, const DetectionWindowSet& windows, int weeks,
                    const std::vector<int>& train_seasons, const std::vector<int>& test_seasons) {
    const int n = static_cast<int>(events.size());
    if (train_seasons.empty() || test_seasons.empty()) throw ValidationError("split needs training and test seasons");
    std::vector<int> fold_of_season(n, -1);
    for (int k : test_seasons) {
        if (k < 0 || k >= n) throw ValidationError("test season index out of range");
        fold_of_season[k] = 0;
    }
    for (int k : train_seasons) {
        if (k < 0 || k >= n) throw ValidationError("training season index out of range");
        if (fold_of_season[k] == 0) throw ValidationError("a season cannot be both training and test");
    }
    return build_plan(season_bounds(events, windows, weeks), std::move(fold_of_season),
                      static_cast<int>(test_seasons.size()), 1, weeks, train_seasons);
}

int held_out_seasons(FoldPreset preset) { return preset == FoldPreset::select_6fold ? 1 : 2; }

CrossValidation::CrossValidation(AlignedPanel panel, EventSet events, DetectionWindowSet windows, FoldPlan plan,
                                 CvOptions options)
    : panel_(std::move(panel)),
      events_(std::move(events)),
      windows_(std::move(windows)),
      plan_(std::move(plan)),
      options_(std::move(options)),
      cache_(std::make_unique<ThresholdCache>()) {
    if (windows_.size() != events_.size()) throw ConfigError("detection windows do not match the event set");
    universe_ = panel_.candidate_names();
    if (panel_.candidate_index(panel_.gold().name) < 0) universe_.push_back(panel_.gold().name);

    const Eigen::MatrixXd x = observation_matrix(panel_, universe_);
    for (int f = 0; f < plan_.fold_count(); ++f) {
        null_masks_.push_back(baseline_mask(events_, panel_.weeks(), plan_.folds[f].train));
        moments_.push_back(estimate_moments(x, null_masks_.back(), universe_));
        ScanOptions scan;
        if (options_.reset_at_fold_boundaries) scan.reset_weeks = plan_.boundaries(f);
        tables_.emplace_back(x, moments_.back().mean, options_.calibration.lambdas, scan, options_.execution);
    }
}

std::vector<int> CrossValidation::columns_of(const std::vector<std::string>& subset) const {
    if (subset.empty()) throw ConfigError("predictor subset is empty");
    std::vector<int> cols;
    std::set<std::string> seen;
    for (const auto& name : subset) {
        if (!seen.insert(name).second) throw ValidationError("series '" + name + "' listed twice in subset");
        const auto it = std::find(universe_.begin(), universe_.end(), name);
        if (it == universe_.end()) throw ValidationError("unknown series '" + name + "'");
        cols.push_back(static_cast<int>(it - universe_.begin()));
    }
    return cols;
}

FoldOutcome CrossValidation::run_fold(const std::vector<std::string>& subset, int fold, std::uint64_t seed) const {
    const std::vector<int> cols = columns_of(subset);
    const Fold& f = plan_.folds.at(fold);
    const SharedStateTable& table = tables_.at(fold);

    FoldOutcome out;
    out.fold = fold;
    try {
        const NullModel null = moments_.at(fold).restrict(cols);
        out.ridge_applied = null.ridge_applied;

        std::vector<std::vector<double>> statistics;
        for (std::size_t li = 0; li < table.lambdas().size(); ++li)
            statistics.push_back(table.statistics(li, cols, null));

        const DetectionWindowSet train_windows = windows_.select(f.train_events);
        CalibrationOptions calibration = options_.calibration;
        calibration.solve.seed = seed;
        calibration.solve.execution = options_.execution;
        const CalibrationResult result = optimize_over_grid(
            null, calibration,
            [&](std::size_t li, double h) {
                const AlarmTrace in_sample = mask_trace(make_trace(statistics[li], h), f.train);
                return score(in_sample, train_windows, events_, calibration.scoring).performance;
            },
            cache_.get());
        out.chosen = result.best;
        out.curve = result.curve;

        const auto li = static_cast<std::size_t>(
            std::find_if(result.curve.begin(), result.curve.end(),
                         [&](const CurvePoint& p) { return p.ok && p.lambda == result.best.lambda; }) -
            result.curve.begin());
        out.test_trace = mask_trace(make_trace(statistics[li], result.best.h), f.test);
        out.report = score(out.test_trace, windows_.select(f.test_events), events_, calibration.scoring);
    } catch (const Error& e) {
        throw CalibrationError("fold " + std::to_string(fold) + ": " + e.what());
    }
    return out;
}

SubsetScore CrossValidation::score_subset(const std::vector<std::string>& subset, std::uint64_t seed) const {
    SubsetScore s;
    double sum = 0.0;
    for (int f = 0; f < plan_.fold_count(); ++f) {
        s.folds.push_back(run_fold(subset, f, seed));
        sum += s.folds.back().report.performance;
    }
    s.score = sum / static_cast<double>(plan_.fold_count());
    return s;
}

const char* to_string(StopReason reason) {
    switch (reason) {
        case StopReason::reached_k: return "reached_k";
        case StopReason::leveled_off: return "leveled_off";
        case StopReason::exhausted: return "exhausted";
    }
    return "unknown";
}

std::vector<std::string> SelectionTrace::selected() const {
    std::vector<std::string> out;
    for (const auto& s : steps) out.push_back(s.chosen);
    return out;
}

SelectionTrace forward_select(const CrossValidation& cv, const std::vector<std::string>& candidates,
                              const SelectionOptions& options, std::uint64_t seed) {
    if (candidates.empty()) throw ValidationError("candidate set is empty");
    if (options.k_max < 1) throw ValidationError("k_max must be at least 1");

    SelectionTrace trace;
    std::vector<std::string> current;
    std::vector<std::string> remaining = candidates;
    double current_score = 0.0;
    while (true) {
        if (static_cast<int>(current.size()) >= options.k_max) {
            trace.stop = StopReason::reached_k;
            break;
        }
        if (remaining.empty()) {
            trace.stop = StopReason::exhausted;
            break;
        }
        SelectionStep step;
        std::size_t best = 0;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            std::vector<std::string> trial = current;
            trial.push_back(remaining[i]);
            const double s = cv.score_subset(trial, seed).score;
            step.tried.emplace_back(remaining[i], s);
            if (i == 0 || s > step.tried[best].second) best = i;
        }
        step.chosen = remaining[best];
        step.score = step.tried[best].second;
        if (!current.empty() && step.score - current_score <= options.min_improvement) {
            trace.stop = StopReason::leveled_off;
            break;
        }
        current.push_back(step.chosen);
        current_score = step.score;
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

ReplicateAggregate aggregate_replicates(const std::vector<SelectionTrace>& traces, int k_max) {
    if (traces.empty()) throw ValidationError("no selection traces to aggregate");
    ReplicateAggregate agg;
    agg.replicates = static_cast<int>(traces.size());
    agg.k_max = k_max;

    std::vector<std::string> names;
    for (const auto& tr : traces)
        for (const auto& step : tr.steps)
            if (std::find(names.begin(), names.end(), step.chosen) == names.end()) names.push_back(step.chosen);

    for (const auto& name : names) {
        std::vector<int> ranks;
        PredictorRank r{name, 0.0, 0};
        for (const auto& tr : traces) {
            int rank = k_max + 1;
            for (std::size_t i = 0; i < tr.steps.size(); ++i)
                if (tr.steps[i].chosen == name) {
                    rank = static_cast<int>(i) + 1;
                    ++r.frequency;
                    break;
                }
            ranks.push_back(rank);
        }
        std::sort(ranks.begin(), ranks.end());
        const std::size_t m = ranks.size();
        r.median_rank = m % 2 == 1 ? ranks[m / 2] : 0.5 * (ranks[m / 2 - 1] + ranks[m / 2]);
        agg.ranking.push_back(r);
    }
    std::sort(agg.ranking.begin(), agg.ranking.end(), [](const PredictorRank& a, const PredictorRank& b) {
        if (a.median_rank != b.median_rank) return a.median_rank < b.median_rank;
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        return a.name < b.name;
    });
    for (const auto& r : agg.ranking)
        if (r.median_rank <= k_max) agg.final_selection.push_back(r.name);
    return agg;
}

void write_selection_csv(const std::filesystem::path& path, const std::vector<SelectionTrace>& traces) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "replicate,step,chosen,score\n";
    for (std::size_t r = 0; r < traces.size(); ++r)
        for (std::size_t i = 0; i < traces[r].steps.size(); ++i)
            out << r << ',' << i + 1 << ',' << traces[r].steps[i].chosen << ','
                << text::format_double(traces[r].steps[i].score) << '\n';
}

void write_aggregate_csv(const std::filesystem::path& path, const ReplicateAggregate& aggregate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "predictor,median_rank,frequency\n";
    for (const auto& r : aggregate.ranking)
        out << r.name << ',' << text::format_double(r.median_rank) << ',' << r.frequency << '\n';
}

namespace {
const std::string kCheckpointTag = "# earlywarn-checkpoint ";
}

void write_trace_checkpoint(const std::filesystem::path& path, const std::string& fingerprint,
                            const SelectionTrace& trace) {
    // Write-then-rename so an interrupted run never leaves a truncated file.
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write '" + tmp + "'");
        out << kCheckpointTag << fingerprint << '\n' << "step,chosen,score\n";
        for (std::size_t i = 0; i < trace.steps.size(); ++i)
            out << i + 1 << ',' << trace.steps[i].chosen << ',' << text::format_double(trace.steps[i].score) << '\n';
        out << "stop," << to_string(trace.stop) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::optional<SelectionTrace> read_trace_checkpoint(const std::filesystem::path& path,
                                                    const std::string& fingerprint) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointTag + fingerprint) return std::nullopt;
    if (!std::getline(in, line) || line != "step,chosen,score") return std::nullopt;
    SelectionTrace trace;
    bool stopped = false;
    while (std::getline(in, line)) {
        const auto fields = text::split(line, ',');
        if (fields.size() == 2 && fields[0] == "stop") {
            if (fields[1] == "reached_k")
                trace.stop = StopReason::reached_k;
            else if (fields[1] == "leveled_off")
                trace.stop = StopReason::leveled_off;
            else if (fields[1] == "exhausted")
                trace.stop = StopReason::exhausted;
            else
                return std::nullopt;
            stopped = true;
            break;
        }
        if (fields.size() != 3) return std::nullopt;
        const auto score = text::parse_double(fields[2]);
        if (!score) return std::nullopt;
        trace.steps.push_back(SelectionStep{fields[1], *score, {}});
    }
    if (!stopped) return std::nullopt;
    return trace;
}

}  // namespace earlywarn
