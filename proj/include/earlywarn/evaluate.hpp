#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "earlywarn/events.hpp"
#include "earlywarn/mewma.hpp"

namespace earlywarn {

struct ScoreOptions {
    /// Count alarm weeks instead of cluster onsets in precision (diagnostic).
    bool raw_alarm_precision = false;
    /// Count onsets inside an event but after its window as false alarms
    /// instead of leaving them out of precision entirely.
    bool late_onsets_as_false = false;
};

struct EventOutcome {
    int event = 0;   ///< index into the EventSet
    int onset = -1;  ///< first in-window onset week, -1 if none
    int delta_t = 0; ///< weeks from window start to onset, or window length
    bool detected = false;
};

/// Timeliness, precision and recall of one trace against a set of windows.
///
/// performance = mean over windows of (1 - delta_t / T_w), with delta_t = T_w
/// for undetected events. An empty trace has undefined precision, reported as
/// 1 with `precision_undefined` set.
struct EvaluationReport {
    double performance = 0.0;
    double precision = 1.0;
    double recall = 0.0;
    bool precision_undefined = true;
    int true_alarms = 0;
    int false_alarms = 0;
    int late_alarms = 0;
    std::vector<EventOutcome> events;
    std::vector<int> missed_events;
};

EvaluationReport score(const AlarmTrace& trace, const DetectionWindowSet& windows, const EventSet& events,
                       const ScoreOptions& options = {});

struct LeadOutcome {
    int event = 0;
    int crossing = -1;  ///< first week in the event at or above the reporting threshold
    int onset = -1;
    std::optional<int> lead;  ///< crossing - onset when both exist
    bool missed = false;      ///< no in-window onset
    bool excluded = false;    ///< event never reached the reporting threshold
};

/// Weeks of warning each in-window onset gives before the gold series first
/// reaches `reporting_threshold` within the same event.
std::vector<LeadOutcome> lead_vs_threshold(const AlarmTrace& trace, const Series& gold, const EventSet& events,
                                           const DetectionWindowSet& windows, double reporting_threshold);

/// Mean of the available leads; nullopt when none.
std::optional<double> mean_lead(const std::vector<LeadOutcome>& leads);

/// Per-event rows `event,onset_week,delta_t,lead_weeks,detected`.
void write_report_csv(const std::filesystem::path& path, const WeekAxis& axis, const EvaluationReport& report,
                      const std::vector<LeadOutcome>& leads);
/// Summary row `performance,precision,recall`.
void write_summary_csv(const std::filesystem::path& path, const EvaluationReport& report);

}  // namespace earlywarn
