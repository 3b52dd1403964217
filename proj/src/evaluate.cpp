#include "earlywarn/evaluate.hpp"

#include <fstream>

#include "earlywarn/error.hpp"
#include "earlywarn/text.hpp"

namespace earlywarn {

EvaluationReport score(const AlarmTrace& trace, const DetectionWindowSet& windows, const EventSet& events,
                       const ScoreOptions& options) {
    EvaluationReport report;
    const double tw = static_cast<double>(windows.length);

    for (const auto& w : windows.windows) {
        EventOutcome outcome;
        outcome.event = w.event;
        outcome.delta_t = windows.length;
        for (int onset : trace.onsets) {
            if (w.contains(onset)) {
                outcome.onset = onset;
                outcome.delta_t = onset - w.nominal_start;
                outcome.detected = true;
                break;
            }
        }
        if (!outcome.detected) report.missed_events.push_back(w.event);
        report.events.push_back(outcome);
    }

    auto classify = [&](int t, int& true_n, int& false_n, int& late_n) {
        if (windows.window_at(t) >= 0) {
            ++true_n;
        } else if (events.event_at(t) >= 0) {
            if (options.late_onsets_as_false)
                ++false_n;
            else
                ++late_n;
        } else {
            ++false_n;
        }
    };
    if (options.raw_alarm_precision) {
        for (int t = 0; t < trace.weeks(); ++t)
            if (trace.alarm[t]) classify(t, report.true_alarms, report.false_alarms, report.late_alarms);
    } else {
        for (int t : trace.onsets) classify(t, report.true_alarms, report.false_alarms, report.late_alarms);
    }

    const int counted = report.true_alarms + report.false_alarms;
    report.precision_undefined = counted == 0;
    report.precision = counted == 0 ? 1.0 : static_cast<double>(report.true_alarms) / counted;

    if (!report.events.empty()) {
        double sum = 0.0;
        int detected = 0;
        for (const auto& e : report.events) {
            sum += 1.0 - e.delta_t / tw;
            if (e.detected) ++detected;
        }
        report.performance = sum / static_cast<double>(report.events.size());
        report.recall = static_cast<double>(detected) / static_cast<double>(report.events.size());
    }
    return report;
}

std::vector<LeadOutcome> lead_vs_threshold(const AlarmTrace& trace, const Series& gold, const EventSet& events,
                                           const DetectionWindowSet& windows, double reporting_threshold) {
    if (reporting_threshold < events.threshold)
        throw ValidationError("reporting threshold must not be below the event threshold");
    std::vector<LeadOutcome> out;
    for (const auto& w : windows.windows) {
        const Event& ev = events.events.at(w.event);
        LeadOutcome lead;
        lead.event = w.event;
        for (int t = ev.start; t <= ev.end; ++t) {
            if (gold.values[t] >= reporting_threshold) {
                lead.crossing = t;
                break;
            }
        }
        for (int onset : trace.onsets) {
            if (w.contains(onset)) {
                lead.onset = onset;
                break;
            }
        }
        lead.excluded = lead.crossing < 0;
        lead.missed = lead.onset < 0;
        if (!lead.excluded && !lead.missed) lead.lead = lead.crossing - lead.onset;
        out.push_back(lead);
    }
    return out;
}

std::optional<double> mean_lead(const std::vector<LeadOutcome>& leads) {
    double sum = 0.0;
    int n = 0;
    for (const auto& l : leads)
        if (l.lead) {
            sum += *l.lead;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / n;
}

void write_report_csv(const std::filesystem::path& path, const WeekAxis& axis, const EvaluationReport& report,
                      const std::vector<LeadOutcome>& leads) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "event,onset_week,delta_t,lead_weeks,detected\n";
    for (std::size_t i = 0; i < report.events.size(); ++i) {
        const auto& e = report.events[i];
        out << e.event << ',' << (e.onset >= 0 ? axis.at(e.onset).to_string() : "") << ',' << e.delta_t << ',';
        if (i < leads.size() && leads[i].lead) out << *leads[i].lead;
        out << ',' << (e.detected ? 1 : 0) << '\n';
    }
}

void write_summary_csv(const std::filesystem::path& path, const EvaluationReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "performance,precision,recall\n"
        << text::format_double(report.performance) << ',' << text::format_double(report.precision) << ','
        << text::format_double(report.recall) << '\n';
}

}  // namespace earlywarn
