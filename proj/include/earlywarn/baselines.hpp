#pragma once

#include <vector>

#include "earlywarn/events.hpp"
#include "earlywarn/mewma.hpp"
#include "earlywarn/panel.hpp"

namespace earlywarn {

struct FoldPlan;

/// Alarms once per ISO year at `trigger_week`. Week 53 maps to the last week
/// of 52-week years.
struct WeekTriggerConfig {
    int trigger_week = 34;
    void validate() const;
};

/// Alarms when the series has risen strictly for `consecutive` weeks running.
struct RiseTriggerConfig {
    int consecutive = 4;
    void validate() const;
};

/// Statistic column is 1 at trigger weeks and 0 elsewhere.
AlarmTrace week_trigger(const WeekAxis& axis, const WeekTriggerConfig& config);
AlarmTrace week_trigger(const AlignedPanel& panel, const WeekTriggerConfig& config);

/// Statistic column is the length of the current strict-rise run.
AlarmTrace rise_trigger(const Series& series, const RiseTriggerConfig& config);
AlarmTrace rise_trigger(const AlignedPanel& panel, const RiseTriggerConfig& config);

struct BaselineFit {
    int best = 0;
    double best_score = 0.0;
    /// (parameter, mean out-of-sample score) for every grid value.
    std::vector<std::pair<int, double>> grid_scores;
};

/// Mean held-out timeliness score of a fixed trace across the folds.
double cross_validated_score(const AlarmTrace& trace, const EventSet& events, const DetectionWindowSet& windows,
                             const FoldPlan& plan);

/// Grid argmax of the cross-validated score; ties go to the smaller value.
BaselineFit fit_week_trigger(const AlignedPanel& panel, const EventSet& events, const DetectionWindowSet& windows,
                             const FoldPlan& plan, const std::vector<int>& grid);
BaselineFit fit_rise_trigger(const AlignedPanel& panel, const EventSet& events, const DetectionWindowSet& windows,
                             const FoldPlan& plan, const std::vector<int>& grid);

std::vector<int> default_week_grid();  ///< 1..53
std::vector<int> default_rise_grid();  ///< 2..20

}  // namespace earlywarn
