#include <doctest.h>

#include <random>

#include "earlywarn/error.hpp"
#include "earlywarn/evaluate.hpp"
#include "helpers.hpp"

using namespace earlywarn;

namespace {

// one event at weeks [20, 35], window [12, 27]
struct Fixture {
    EventSet events;
    DetectionWindowSet windows;
    Fixture() {
        events.threshold = 1.0;
        events.events = {{20, 35}};
        windows.windows = {{0, 12, 12, 27, false, false}};
    }
};

AlarmTrace alarms_at(int weeks, std::initializer_list<int> on) {
    std::vector<double> s(weeks, 0.0);
    for (int t : on) s[t] = 1.0;
    return make_trace(s, 1.0);
}

}  // namespace

TEST_CASE("score: onset at window start gives 1") {
    Fixture f;
    const auto r = score(alarms_at(60, {12, 13}), f.windows, f.events);
    CHECK(r.performance == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.events[0].delta_t == 0);
    CHECK(r.precision == 1.0);
    CHECK_FALSE(r.precision_undefined);
}

TEST_CASE("score: onset four weeks in gives 0.75") {
    Fixture f;
    const auto r = score(alarms_at(60, {16}), f.windows, f.events);
    CHECK(r.performance == 0.75);
    CHECK(r.events[0].onset == 16);
}

TEST_CASE("score: last window week and a miss") {
    Fixture f;
    CHECK(score(alarms_at(60, {27}), f.windows, f.events).performance == doctest::Approx(1.0 / 16));
    const auto miss = score(alarms_at(60, {}), f.windows, f.events);
    CHECK(miss.performance == 0.0);
    CHECK(miss.recall == 0.0);
    CHECK(miss.precision == 1.0);
    CHECK(miss.precision_undefined);
    CHECK(miss.missed_events == std::vector<int>{0});
}

TEST_CASE("score: precision counts cluster onsets and leaves late onsets out") {
    Fixture f;
    // false onset at 2, true onset at 14 (a run of 3), late onset at 30
    const AlarmTrace tr = alarms_at(60, {2, 14, 15, 16, 30});
    auto r = score(tr, f.windows, f.events);
    CHECK(r.true_alarms == 1);
    CHECK(r.false_alarms == 1);
    CHECK(r.late_alarms == 1);
    CHECK(r.precision == 0.5);

    ScoreOptions late;
    late.late_onsets_as_false = true;
    r = score(tr, f.windows, f.events, late);
    CHECK(r.precision == doctest::Approx(1.0 / 3));

    ScoreOptions raw;
    raw.raw_alarm_precision = true;
    r = score(tr, f.windows, f.events, raw);
    CHECK(r.true_alarms == 3);
    CHECK(r.precision == 0.75);
}

TEST_CASE("score: truncated window keeps its nominal start") {
    EventSet events;
    events.events = {{3, 10}};
    DetectionWindowSet windows;
    windows.windows = {{0, -5, 0, 10, true, false}};
    const auto r = score(alarms_at(20, {0}), windows, events);
    CHECK(r.events[0].delta_t == 5);
    CHECK(r.performance == doctest::Approx(1.0 - 5.0 / 16));
}

TEST_CASE("score: ten constructed traces") {
    Fixture f;
    const int onset_weeks[] = {12, 13, 14, 15, 17, 19, 20, 23, 26, 27};
    for (int w : onset_weeks) {
        const auto r = score(alarms_at(60, {w}), f.windows, f.events);
        CHECK(r.performance == 1.0 - (w - 12) / 16.0);
    }
}

TEST_CASE("score: bounds over random traces") {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.1);
    EventSet events;
    events.events = {{20, 30}, {70, 80}, {120, 125}};
    DetectionWindowSet windows;
    for (int i = 0; i < 3; ++i) {
        const int s = events.events[i].start - 8;
        windows.windows.push_back({i, s, s, s + 15, false, false});
    }
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> s(150);
        for (auto& v : s) v = coin(rng) ? 1.0 : 0.0;
        const auto r = score(make_trace(s, 1.0), windows, events);
        CHECK(r.performance >= 0.0);
        CHECK(r.performance <= 1.0);
        CHECK(r.precision >= 0.0);
        CHECK(r.precision <= 1.0);
        CHECK(r.recall >= 0.0);
        CHECK(r.recall <= 1.0);
        // zero performance exactly when nothing was detected
        CHECK((r.performance == 0.0) == (r.recall == 0.0));
    }
}

TEST_CASE("lead versus reporting threshold") {
    Fixture f;
    std::vector<double> gold(60, 0.5);
    for (int t = 20; t <= 35; ++t) gold[t] = 1.5;
    for (int t = 25; t <= 30; ++t) gold[t] = 2.5;
    const Series g = testutil::series("g", gold);

    auto leads = lead_vs_threshold(alarms_at(60, {20}), g, f.events, f.windows, 2.0);
    REQUIRE(leads.size() == 1);
    CHECK(leads[0].crossing == 25);
    CHECK(*leads[0].lead == 5);

    leads = lead_vs_threshold(alarms_at(60, {25}), g, f.events, f.windows, 2.0);
    CHECK(*leads[0].lead == 0);

    // alarms after the crossing do not move the lead
    leads = lead_vs_threshold(alarms_at(60, {22, 26, 27, 29}), g, f.events, f.windows, 2.0);
    CHECK(*leads[0].lead == 3);
    CHECK(*mean_lead(leads) == 3.0);

    leads = lead_vs_threshold(alarms_at(60, {}), g, f.events, f.windows, 2.0);
    CHECK(leads[0].missed);
    CHECK_FALSE(mean_lead(leads).has_value());

    leads = lead_vs_threshold(alarms_at(60, {20}), g, f.events, f.windows, 3.0);
    CHECK(leads[0].excluded);
    CHECK_FALSE(leads[0].lead.has_value());

    CHECK_THROWS_AS(lead_vs_threshold(alarms_at(60, {}), g, f.events, f.windows, 0.5), ValidationError);
}

TEST_CASE("report and summary files") {
    Fixture f;
    testutil::TempDir dir("eval");
    const auto r = score(alarms_at(60, {16}), f.windows, f.events);
    write_summary_csv(dir / "s.csv", r);
    CHECK(testutil::read_file(dir / "s.csv") == "performance,precision,recall\n0.75,1,1\n");
    write_report_csv(dir / "r.csv", testutil::axis(60), r, {});
    CHECK(testutil::read_file(dir / "r.csv") == "event,onset_week,delta_t,lead_weeks,detected\n0,2010-W17,4,,1\n");
}
