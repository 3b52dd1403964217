#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "earlywarn/week.hpp"

namespace earlywarn {

/// One weekly observation stream. `values.size()` always equals the owning
/// panel's axis length and every value is finite.
struct Series {
    std::string name;
    std::vector<double> values;
    std::string unit;
};

/// Gold-standard series plus candidate predictors on one shared axis.
/// Immutable once built; safe to share between threads.
class AlignedPanel {
public:
    AlignedPanel(WeekAxis axis, Series gold, std::vector<Series> candidates);

    const WeekAxis& axis() const { return axis_; }
    int weeks() const { return axis_.length(); }
    const Series& gold() const { return gold_; }
    const std::vector<Series>& candidates() const { return candidates_; }

    /// Candidate index by name, or -1.
    int candidate_index(const std::string& name) const;

    /// Resolves a predictor by name: candidates first, then the gold series.
    /// Throws ValidationError naming the series when it is unknown.
    const Series& series(const std::string& name) const;

    std::vector<std::string> candidate_names() const;

    /// Copy restricted to weeks [first, first + length).
    AlignedPanel slice(int first, int length) const;

private:
    WeekAxis axis_;
    Series gold_;
    std::vector<Series> candidates_;
};

/// A series as read from disk, before alignment.
struct WeeklyFile {
    std::string name;
    IsoWeek first;
    std::vector<double> values;
};

/// Reads one `week,value` CSV. The series name is the file stem.
WeeklyFile read_series_csv(const std::filesystem::path& path);

/// Writes `week,value` using shortest round-trip decimal text.
void write_series_csv(const std::filesystem::path& path, const WeekAxis& axis, const Series& series);

/// Loads and aligns the gold series and candidates to the intersection of
/// their week ranges.
AlignedPanel load_panel(const std::filesystem::path& gold_file,
                        const std::vector<std::filesystem::path>& candidate_files);

/// Manifest format (flat `key = value` lines, `#` comments):
///
///     gold = ilinet_us.csv
///     candidate = hhs7.csv
///     candidate = fever_cough.csv
///
/// `candidates = a.csv, b.csv` is accepted as well. Relative paths are
/// resolved against the manifest's directory.
struct PanelManifest {
    std::filesystem::path gold;
    std::vector<std::filesystem::path> candidates;
};

PanelManifest read_manifest(const std::filesystem::path& path);
AlignedPanel load_manifest(const std::filesystem::path& path);

/// Writes every series plus `manifest.txt` into `directory`.
void write_panel(const std::filesystem::path& directory, const AlignedPanel& panel);

/// Seasonal-epidemic generator used as a stand-in for ILINet-like data.
///
/// The gold standard is `baseline + peak * pulse(t)` plus uniform noise in
/// [-noise, noise], where `pulse` is a raised cosine of half-width
/// `pulse_half_width` centred on each season's peak week. Outside the pulse
/// support the noiseless signal equals `baseline` exactly, so any threshold in
/// (baseline, baseline + peak) is crossed upward exactly once per season.
///
/// Predictor k is the noiseless signal read `lead_k` weeks ahead plus its own
/// noise, truncated below at zero.
struct SyntheticPanelSpec {
    int seasons = 6;
    int weeks_per_season = 52;
    double baseline = 0.8;
    double peak = 4.0;
    int peak_jitter = 2;
    double noise = 0.05;
    int predictor_count = 5;
    int predictor_lead = 3;
    std::uint64_t seed = 7;

    IsoWeek start{2010, 1};
    /// Week within a season where the pulse peaks; < 0 means weeks_per_season / 2.
    int peak_week = -1;
    /// < 0 means weeks_per_season / 4.
    int pulse_half_width = -1;
    /// Optional per-predictor overrides of lead and noise.
    std::vector<int> predictor_leads;
    std::vector<double> predictor_noise;
    std::string gold_name = "gold";
    std::string predictor_prefix = "x";
};

AlignedPanel generate_synthetic(const SyntheticPanelSpec& spec);

}  // namespace earlywarn
