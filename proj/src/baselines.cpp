#include "earlywarn/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "earlywarn/error.hpp"
#include "earlywarn/evaluate.hpp"
#include "earlywarn/select.hpp"

namespace earlywarn {

void WeekTriggerConfig::validate() const {
    if (trigger_week < 1 || trigger_week > 53) throw ValidationError("trigger week must lie in [1, 53]");
}

void RiseTriggerConfig::validate() const {
    if (consecutive < 2) throw ValidationError("rise trigger needs at least 2 consecutive increases");
}

AlarmTrace week_trigger(const WeekAxis& axis, const WeekTriggerConfig& config) {
    config.validate();
    std::vector<double> indicator(axis.length(), 0.0);
    for (int t = 0; t < axis.length(); ++t) {
        const IsoWeek w = axis.at(t);
        if (w.week == std::min(config.trigger_week, weeks_in_iso_year(w.year))) indicator[t] = 1.0;
    }
    return make_trace(std::move(indicator), 1.0);
}

AlarmTrace week_trigger(const AlignedPanel& panel, const WeekTriggerConfig& config) {
    return week_trigger(panel.axis(), config);
}

AlarmTrace rise_trigger(const Series& series, const RiseTriggerConfig& config) {
    config.validate();
    const auto& y = series.values;
    std::vector<double> run(y.size(), 0.0);
    for (std::size_t t = 1; t < y.size(); ++t) run[t] = y[t] > y[t - 1] ? run[t - 1] + 1.0 : 0.0;
    return make_trace(std::move(run), static_cast<double>(config.consecutive));
}

AlarmTrace rise_trigger(const AlignedPanel& panel, const RiseTriggerConfig& config) {
    return rise_trigger(panel.gold(), config);
}

double cross_validated_score(const AlarmTrace& trace, const EventSet& events, const DetectionWindowSet& windows,
                             const FoldPlan& plan) {
    if (plan.folds.empty()) throw ConfigError("fold plan is empty");
    double sum = 0.0;
    for (const auto& fold : plan.folds) {
        const AlarmTrace held_out = mask_trace(trace, fold.test);
        sum += score(held_out, windows.select(fold.test_events), events).performance;
    }
    return sum / static_cast<double>(plan.folds.size());
}

namespace {

template <class MakeTrace>
BaselineFit fit_grid(const std::vector<int>& grid, const EventSet& events, const DetectionWindowSet& windows,
                     const FoldPlan& plan, MakeTrace make) {
    if (grid.empty()) throw ConfigError("baseline parameter grid is empty");
    std::vector<int> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    BaselineFit fit;
    bool first = true;
    for (int p : sorted) {
        const double s = cross_validated_score(make(p), events, windows, plan);
        fit.grid_scores.emplace_back(p, s);
        if (first || s > fit.best_score) {
            fit.best = p;
            fit.best_score = s;
            first = false;
        }
    }
    return fit;
}

}  // namespace

BaselineFit fit_week_trigger(const AlignedPanel& panel, const EventSet& events, const DetectionWindowSet& windows,
                             const FoldPlan& plan, const std::vector<int>& grid) {
    return fit_grid(grid, events, windows, plan,
                    [&](int week) { return week_trigger(panel, WeekTriggerConfig{week}); });
}

BaselineFit fit_rise_trigger(const AlignedPanel& panel, const EventSet& events, const DetectionWindowSet& windows,
                             const FoldPlan& plan, const std::vector<int>& grid) {
    return fit_grid(grid, events, windows, plan,
                    [&](int n) { return rise_trigger(panel, RiseTriggerConfig{n}); });
}

std::vector<int> default_week_grid() {
    std::vector<int> g(53);
    std::iota(g.begin(), g.end(), 1);
    return g;
}

std::vector<int> default_rise_grid() {
    std::vector<int> g(19);
    std::iota(g.begin(), g.end(), 2);
    return g;
}

}  // namespace earlywarn
