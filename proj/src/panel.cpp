#include "earlywarn/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "earlywarn/error.hpp"
#include "earlywarn/parallel.hpp"
#include "earlywarn/text.hpp"

namespace earlywarn {

namespace fs = std::filesystem;

AlignedPanel::AlignedPanel(WeekAxis axis, Series gold, std::vector<Series> candidates)
    : axis_(axis), gold_(std::move(gold)), candidates_(std::move(candidates)) {
    auto check = [&](const Series& s) {
        if (static_cast<int>(s.values.size()) != axis_.length())
            throw ValidationError("series '" + s.name + "' length does not match the week axis");
        for (double v : s.values)
            if (!std::isfinite(v)) throw MissingDataError("series '" + s.name + "' has a non-finite value");
    };
    check(gold_);
    std::set<std::string> names;
    for (const auto& c : candidates_) {
        check(c);
        if (!names.insert(c.name).second) throw ValidationError("duplicate series name '" + c.name + "'");
    }
}

int AlignedPanel::candidate_index(const std::string& name) const {
    for (std::size_t i = 0; i < candidates_.size(); ++i)
        if (candidates_[i].name == name) return static_cast<int>(i);
    return -1;
}

const Series& AlignedPanel::series(const std::string& name) const {
    if (const int i = candidate_index(name); i >= 0) return candidates_[i];
    if (gold_.name == name) return gold_;
    throw ValidationError("unknown series '" + name + "'");
}

std::vector<std::string> AlignedPanel::candidate_names() const {
    std::vector<std::string> out;
    for (const auto& c : candidates_) out.push_back(c.name);
    return out;
}

AlignedPanel AlignedPanel::slice(int first, int length) const {
    auto cut = [&](const Series& s) {
        Series r{s.name, {}, s.unit};
        r.values.assign(s.values.begin() + first, s.values.begin() + first + length);
        return r;
    };
    const WeekAxis axis = axis_.slice(first, length);
    std::vector<Series> cands;
    for (const auto& c : candidates_) cands.push_back(cut(c));
    return AlignedPanel(axis, cut(gold_), std::move(cands));
}

WeeklyFile read_series_csv(const fs::path& path) {
    std::ifstream in(path);
    const std::string file = path.string();
    if (!in) throw ParseError("cannot open '" + file + "'");

    std::string line;
    int lineno = 0;
    auto where = [&] { return file + ":" + std::to_string(lineno); };

    if (!std::getline(in, line)) throw ParseError(file + ": empty file");
    ++lineno;
    {
        const auto header = text::split(line, ',');
        if (header.size() != 2 || header[0] != "week" || header[1] != "value")
            throw ParseError(where() + ": expected header 'week,value'");
    }

    std::map<std::int64_t, double> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(line, ',');
        if (fields.size() != 2) throw ParseError(where() + ": expected 2 fields, got " + std::to_string(fields.size()));
        IsoWeek week;
        try {
            week = IsoWeek::parse(fields[0]);
        } catch (const ParseError& e) {
            throw ParseError(where() + ": " + e.what());
        }
        const std::string& raw = fields[1];
        double value = 0.0;
        if (raw.empty() || raw == "NA" || raw == "na" || raw == "NaN" || raw == "nan") {
            throw MissingDataError(where() + ": missing value for week " + week.to_string());
        } else if (auto v = text::parse_double(raw)) {
            value = *v;
        } else {
            throw ParseError(where() + ": malformed value '" + raw + "'");
        }
        if (!std::isfinite(value)) throw MissingDataError(where() + ": non-finite value for week " + week.to_string());
        if (!rows.emplace(week.serial(), value).second)
            throw DuplicateWeekError(where() + ": duplicate week " + week.to_string());
    }
    if (rows.empty()) throw ParseError(file + ": no data rows");

    WeeklyFile out;
    out.name = path.stem().string();
    out.first = IsoWeek::from_serial(rows.begin()->first);
    std::int64_t expect = rows.begin()->first;
    for (const auto& [serial, value] : rows) {
        if (serial != expect)
            throw MissingDataError(file + ": missing week " + IsoWeek::from_serial(expect).to_string());
        out.values.push_back(value);
        ++expect;
    }
    return out;
}

void write_series_csv(const fs::path& path, const WeekAxis& axis, const Series& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "week,value\n";
    for (int t = 0; t < axis.length(); ++t)
        out << axis.at(t).to_string() << ',' << text::format_double(series.values[t]) << '\n';
}

AlignedPanel load_panel(const fs::path& gold_file, const std::vector<fs::path>& candidate_files) {
    std::vector<WeeklyFile> files;
    files.push_back(read_series_csv(gold_file));
    for (const auto& p : candidate_files) files.push_back(read_series_csv(p));

    std::int64_t lo = files.front().first.serial();
    std::int64_t hi = lo + static_cast<std::int64_t>(files.front().values.size());
    for (const auto& f : files) {
        lo = std::max(lo, f.first.serial());
        hi = std::min(hi, f.first.serial() + static_cast<std::int64_t>(f.values.size()));
    }
    if (hi - lo < 3)
        throw AlignmentError("series week ranges overlap in fewer than 3 weeks");

    const WeekAxis axis(IsoWeek::from_serial(lo), static_cast<int>(hi - lo));
    auto trim_to_axis = [&](const WeeklyFile& f) {
        Series s{f.name, {}, {}};
        const auto offset = lo - f.first.serial();
        s.values.assign(f.values.begin() + offset, f.values.begin() + offset + axis.length());
        return s;
    };
    std::vector<Series> candidates;
    for (std::size_t i = 1; i < files.size(); ++i) candidates.push_back(trim_to_axis(files[i]));
    return AlignedPanel(axis, trim_to_axis(files.front()), std::move(candidates));
}

PanelManifest read_manifest(const fs::path& path) {
    const auto kv = text::KeyValueFile::read(path.string());
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    PanelManifest m;
    const auto gold = kv.get("gold");
    if (!gold) throw ParseError(path.string() + ": manifest has no 'gold' entry");
    m.gold = resolve(*gold);
    for (const auto& [key, value] : kv.entries()) {
        if (key == "candidate") {
            m.candidates.push_back(resolve(value));
        } else if (key == "candidates") {
            for (const auto& item : text::split(value, ','))
                if (!item.empty()) m.candidates.push_back(resolve(item));
        } else if (key != "gold") {
            throw ParseError(path.string() + ": unknown manifest key '" + key + "'");
        }
    }
    return m;
}

AlignedPanel load_manifest(const fs::path& path) {
    const auto m = read_manifest(path);
    return load_panel(m.gold, m.candidates);
}

void write_panel(const fs::path& directory, const AlignedPanel& panel) {
    fs::create_directories(directory);
    write_series_csv(directory / (panel.gold().name + ".csv"), panel.axis(), panel.gold());
    std::ofstream manifest(directory / "manifest.txt", std::ios::binary);
    manifest << "gold = " << panel.gold().name << ".csv\n";
    for (const auto& c : panel.candidates()) {
        write_series_csv(directory / (c.name + ".csv"), panel.axis(), c);
        manifest << "candidate = " << c.name << ".csv\n";
    }
}

AlignedPanel generate_synthetic(const SyntheticPanelSpec& spec) {
    const int weeks = spec.weeks_per_season;
    const int half = spec.pulse_half_width < 0 ? weeks / 4 : spec.pulse_half_width;
    const int centre = spec.peak_week < 0 ? weeks / 2 : spec.peak_week;

    if (spec.seasons < 1) throw ValidationError("synthetic panel needs at least one season");
    if (spec.predictor_count < 1) throw ValidationError("synthetic panel needs at least one predictor");
    if (weeks < 4) throw ValidationError("weeks per season must be at least 4");
    if (!(spec.peak > 0.0)) throw ValidationError("peak height must be positive");
    if (!(spec.noise >= 0.0)) throw ValidationError("noise scale must be non-negative");
    if (spec.baseline < 0.0) throw ValidationError("baseline level must be non-negative");
    if (spec.peak_jitter < 0) throw ValidationError("peak jitter must be non-negative");
    if (half < 1) throw ValidationError("pulse half-width must be at least 1");
    if (2 * half > weeks - 2 * spec.peak_jitter)
        throw ValidationError("pulses of adjacent seasons would overlap; reduce jitter or pulse width");
    if (!spec.predictor_leads.empty() && static_cast<int>(spec.predictor_leads.size()) != spec.predictor_count)
        throw ValidationError("predictor_leads must have predictor_count entries");
    if (!spec.predictor_noise.empty() && static_cast<int>(spec.predictor_noise.size()) != spec.predictor_count)
        throw ValidationError("predictor_noise must have predictor_count entries");
    for (double n : spec.predictor_noise)
        if (!(n >= 0.0)) throw ValidationError("predictor noise must be non-negative");

    const int length = spec.seasons * weeks;

    std::mt19937_64 gold_rng(derive_seed(spec.seed, 0));
    std::uniform_int_distribution<int> jitter(-spec.peak_jitter, spec.peak_jitter);
    std::vector<int> peaks;
    for (int s = 0; s < spec.seasons; ++s) peaks.push_back(s * weeks + centre + jitter(gold_rng));

    auto signal = [&](int t) {
        double pulse = 0.0;
        for (int p : peaks) {
            const int d = t - p;
            if (d > -half && d < half) pulse += 0.5 * (1.0 + std::cos(std::numbers::pi * d / half));
        }
        return spec.baseline + spec.peak * pulse;
    };

    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Series gold{spec.gold_name, std::vector<double>(length), "synthetic level"};
    for (int t = 0; t < length; ++t) {
        const double noise = spec.noise > 0.0 ? spec.noise * unit(gold_rng) : 0.0;
        gold.values[t] = std::max(0.0, signal(t) + noise);
    }

    std::vector<Series> predictors;
    for (int k = 0; k < spec.predictor_count; ++k) {
        const int lead = spec.predictor_leads.empty() ? spec.predictor_lead : spec.predictor_leads[k];
        const double scale = spec.predictor_noise.empty() ? spec.noise : spec.predictor_noise[k];
        std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(k) + 1));
        Series x{spec.predictor_prefix + std::to_string(k + 1), std::vector<double>(length), "synthetic level"};
        for (int t = 0; t < length; ++t) {
            const double noise = scale > 0.0 ? scale * unit(rng) : 0.0;
            x.values[t] = std::max(0.0, signal(t + lead) + noise);
        }
        predictors.push_back(std::move(x));
    }
    return AlignedPanel(WeekAxis(spec.start, length), std::move(gold), std::move(predictors));
}

}  // namespace earlywarn
