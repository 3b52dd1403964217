#include "earlywarn/events.hpp"

#include <algorithm>
#include <fstream>

#include "earlywarn/error.hpp"
#include "earlywarn/text.hpp"

namespace earlywarn {

int EventSet::event_at(int t) const {
    for (std::size_t i = 0; i < events.size(); ++i)
        if (events[i].contains(t)) return static_cast<int>(i);
    return -1;
}

EventSet detect_events(const Series& gold, double threshold, int min_duration) {
    if (min_duration < 1) throw ValidationError("minimum event duration must be at least 1 week");
    EventSet set;
    set.threshold = threshold;
    set.min_duration = min_duration;

    const auto& y = gold.values;
    if (!y.empty()) {
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        if (threshold < *lo || threshold > *hi)
            set.warning = "event threshold " + text::format_double(threshold) + " lies outside the observed range of '" +
                          gold.name + "'";
    }

    const int n = static_cast<int>(y.size());
    int t = 0;
    while (t < n) {
        if (y[t] < threshold) {
            ++t;
            continue;
        }
        int end = t;
        while (end + 1 < n && y[end + 1] >= threshold) ++end;
        if (end - t + 1 >= min_duration) set.events.push_back({t, end});
        t = end + 1;
    }
    return set;
}

int DetectionWindowSet::window_at(int t) const {
    for (std::size_t i = 0; i < windows.size(); ++i)
        if (windows[i].contains(t)) return static_cast<int>(i);
    return -1;
}

DetectionWindowSet DetectionWindowSet::select(const std::vector<int>& indices) const {
    DetectionWindowSet out{length, lead, {}};
    for (int i : indices) out.windows.push_back(windows.at(i));
    return out;
}

DetectionWindowSet build_windows(const EventSet& events, const WindowOptions& options, const Series& gold) {
    if (options.length < 1) throw ConfigError("detection window length must be at least 1 week");
    if (options.lead < 0 || options.lead > options.length)
        throw ConfigError("detection window lead must lie in [0, window length]");

    const int n = static_cast<int>(gold.values.size());
    DetectionWindowSet set{options.length, options.lead, {}};
    for (std::size_t i = 0; i < events.events.size(); ++i) {
        const Event& ev = events.events[i];
        DetectionWindow w;
        w.event = static_cast<int>(i);
        w.nominal_start = ev.start - options.lead;

        if (options.clip_to_onset_minimum && ev.start > 0) {
            const int from = std::max(0, w.nominal_start);
            int argmin = from;
            for (int t = from; t < ev.start; ++t)
                if (gold.values[t] <= gold.values[argmin]) argmin = t;  // latest trough on ties
            if (argmin > w.nominal_start) {
                w.nominal_start = argmin;
                w.shrunk = true;
            }
        }

        const int nominal_end = w.nominal_start + options.length - 1;
        w.start = std::max(0, w.nominal_start);
        w.end = std::min(n - 1, nominal_end);
        w.clipped = w.start != w.nominal_start || w.end != nominal_end;

        if (!set.windows.empty()) {
            const DetectionWindow& prev = set.windows.back();
            const Event& prev_event = events.events[i - 1];
            if (w.start <= std::max(prev.end, prev_event.end))
                throw ConfigError("detection window of event " + std::to_string(i) +
                                  " overlaps the previous event or its window; use a smaller window length");
        }
        set.windows.push_back(w);
    }
    return set;
}

WeekClass classify_week(int t, const EventSet& events, const DetectionWindowSet& windows) {
    if (windows.window_at(t) >= 0) return WeekClass::in_window;
    if (events.event_at(t) >= 0) return WeekClass::in_event_after_window;
    return WeekClass::baseline;
}

void write_events_csv(const std::filesystem::path& path, const WeekAxis& axis, const EventSet& events,
                      const DetectionWindowSet& windows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "event_index,start_week,end_week,window_start,window_end\n";
    for (std::size_t i = 0; i < events.events.size(); ++i) {
        const Event& ev = events.events[i];
        out << i << ',' << axis.at(ev.start).to_string() << ',' << axis.at(ev.end).to_string();
        if (i < windows.windows.size()) {
            const auto& w = windows.windows[i];
            out << ',' << axis.at(w.start).to_string() << ',' << axis.at(w.end).to_string();
        } else {
            out << ",,";
        }
        out << '\n';
    }
}

}  // namespace earlywarn
