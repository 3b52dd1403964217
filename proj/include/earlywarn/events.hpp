#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "earlywarn/panel.hpp"

namespace earlywarn {

/// Inclusive week-index interval.
struct Event {
    int start = 0;
    int end = 0;
    int length() const { return end - start + 1; }
    bool contains(int t) const { return t >= start && t <= end; }
};

/// Maximal runs of gold >= threshold lasting at least `min_duration` weeks,
/// disjoint and sorted.
struct EventSet {
    double threshold = 0.0;
    int min_duration = 1;
    std::vector<Event> events;
    /// Set when the threshold lies outside the observed gold range.
    std::string warning;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
    /// Index of the event containing week t, or -1.
    int event_at(int t) const;
};

EventSet detect_events(const Series& gold, double threshold, int min_duration);

/// Scoring window for one event. `nominal_start` is event start minus lead
/// (and may precede week 0); `start`/`end` are clipped to the panel.
struct DetectionWindow {
    int event = 0;
    int nominal_start = 0;
    int start = 0;
    int end = 0;
    bool clipped = false;
    /// Start was raised to the lowest pre-event observation.
    bool shrunk = false;
    bool contains(int t) const { return t >= start && t <= end; }
};

struct WindowOptions {
    int length = 16;
    int lead = 8;
    /// Raise each window start to the lowest gold observation in the
    /// pre-event stretch [event start - lead, event start), so the window
    /// does not begin before the outbreak's onset trough.
    bool clip_to_onset_minimum = false;
};

struct DetectionWindowSet {
    int length = 16;
    int lead = 8;
    std::vector<DetectionWindow> windows;

    std::size_t size() const { return windows.size(); }
    /// Window index containing t, or -1.
    int window_at(int t) const;
    /// Subset of windows in the given order.
    DetectionWindowSet select(const std::vector<int>& indices) const;
};

/// Throws ConfigError when windows of adjacent events overlap.
DetectionWindowSet build_windows(const EventSet& events, const WindowOptions& options, const Series& gold);

enum class WeekClass { in_window, in_event_after_window, baseline };

WeekClass classify_week(int t, const EventSet& events, const DetectionWindowSet& windows);

/// `event_index,start_week,end_week,window_start,window_end`
void write_events_csv(const std::filesystem::path& path, const WeekAxis& axis, const EventSet& events,
                      const DetectionWindowSet& windows);

}  // namespace earlywarn
