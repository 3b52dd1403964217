#include <doctest.h>

#include <algorithm>
#include <set>

#include "earlywarn/error.hpp"
#include "earlywarn/select.hpp"
#include "helpers.hpp"

using namespace earlywarn;

namespace {

struct Data {
    AlignedPanel panel;
    EventSet events;
    DetectionWindowSet windows;
};

Data synthetic(int seasons, std::vector<int> leads, std::uint64_t seed = 7) {
    SyntheticPanelSpec spec;
    spec.seasons = seasons;
    spec.predictor_leads = std::move(leads);
    spec.predictor_count = static_cast<int>(spec.predictor_leads.size());
    spec.seed = seed;
    AlignedPanel panel = generate_synthetic(spec);
    EventSet events = detect_events(panel.gold(), 1.25, 3);
    DetectionWindowSet windows = build_windows(events, {}, panel.gold());
    return {std::move(panel), std::move(events), std::move(windows)};
}

CvOptions fast_cv() {
    CvOptions o;
    o.calibration.lambdas = {0.2, 0.5};
    o.calibration.solve.simulations = 100;
    return o;
}

SelectionTrace make_trace_of(std::vector<std::string> names) {
    SelectionTrace t;
    for (auto& n : names) t.steps.push_back({n, 0.5, {}});
    return t;
}

}  // namespace

TEST_CASE("folds cover every season exactly once and never train on held-out weeks") {
    const Data d = synthetic(6, {3});
    REQUIRE(d.events.size() == 6);
    for (int held : {1, 2, 4}) {
        const FoldPlan plan = make_folds(d.events, d.windows, held, d.panel.weeks());
        CHECK(plan.fold_count() == 6 / held);
        std::vector<int> tested(d.events.size(), 0);
        for (int f = 0; f < plan.fold_count(); ++f) {
            const Fold& fold = plan.folds[f];
            for (int e : fold.test_events) ++tested[e];
            for (int t = 0; t < d.panel.weeks(); ++t) CHECK_FALSE((fold.train[t] && fold.test[t]));
            std::set<int> train(fold.train_events.begin(), fold.train_events.end());
            for (int e : fold.test_events) CHECK(train.count(e) == 0);
        }
        for (int n : tested) CHECK(n == 1);
        // the last fold takes the remainder
        CHECK(plan.folds.back().test_events.size() == 6 - held * (plan.fold_count() - 1));
    }
    CHECK_THROWS_AS(make_folds(d.events, d.windows, 6, d.panel.weeks()), ValidationError);
    CHECK_THROWS_AS(make_folds(d.events, d.windows, 0, d.panel.weeks()), ValidationError);
}

TEST_CASE("seasons tile the axis around events") {
    const Data d = synthetic(5, {3});
    const auto seasons = season_bounds(d.events, d.windows, d.panel.weeks());
    REQUIRE(seasons.size() == d.events.size());
    CHECK(seasons.front().first == 0);
    CHECK(seasons.back().second == d.panel.weeks());
    for (std::size_t i = 0; i < seasons.size(); ++i) {
        CHECK(seasons[i].first <= d.windows.windows[i].start);
        CHECK(seasons[i].second > d.events.events[i].end);
        if (i > 0) CHECK(seasons[i].first == seasons[i - 1].second);
    }
}

TEST_CASE("cross-validation leaks nothing from held-out seasons") {
    const Data d = synthetic(6, {3, 0});
    const FoldPlan plan = make_folds(d.events, d.windows, 2, d.panel.weeks());
    const CrossValidation cv(d.panel, d.events, d.windows, plan, fast_cv());
    for (int f = 0; f < plan.fold_count(); ++f) {
        const WeekMask& test = plan.folds[f].test;
        for (int t = 0; t < d.panel.weeks(); ++t) {
            if (test[t]) {
                CHECK(cv.null_mask(f)[t] == 0);
                CHECK(cv.calibration_mask(f)[t] == 0);
            }
            if (cv.null_mask(f)[t]) CHECK(d.events.event_at(t) < 0);
        }
        const FoldOutcome out = cv.run_fold({"x1"}, f, 3);
        for (int t = 0; t < d.panel.weeks(); ++t)
            if (out.test_trace.alarm[t]) CHECK(test[t]);
    }
}

TEST_CASE("changing held-out data leaves the fold's calibration unchanged") {
    const Data d = synthetic(6, {3, 0});
    const FoldPlan plan = make_folds(d.events, d.windows, 2, d.panel.weeks());
    // scramble the first fold's held-out weeks
    std::vector<Series> cands = d.panel.candidates();
    Series gold = d.panel.gold();
    for (int t = 0; t < d.panel.weeks(); ++t)
        if (plan.folds[0].test[t])
            for (auto& c : cands) c.values[t] = 100.0 + t;
    const AlignedPanel scrambled(d.panel.axis(), gold, cands);
    const CrossValidation a(d.panel, d.events, d.windows, plan, fast_cv());
    const CrossValidation b(scrambled, d.events, d.windows, plan, fast_cv());
    const FoldOutcome fa = a.run_fold({"x1", "x2"}, 0, 9);
    const FoldOutcome fb = b.run_fold({"x1", "x2"}, 0, 9);
    CHECK(fa.chosen.lambda == fb.chosen.lambda);
    CHECK(fa.chosen.h == fb.chosen.h);
    CHECK(fa.chosen.performance == fb.chosen.performance);
}

TEST_CASE("subset scores are deterministic across execution modes") {
    const Data d = synthetic(4, {3, 0});
    const FoldPlan plan = make_folds(d.events, d.windows, 1, d.panel.weeks());
    CvOptions serial = fast_cv();
    serial.execution = Execution::serial;
    serial.calibration.solve.execution = Execution::serial;
    const CrossValidation a(d.panel, d.events, d.windows, plan, serial);
    const CrossValidation b(d.panel, d.events, d.windows, plan, fast_cv());
    CHECK(a.score_subset({"x1", "x2"}, 4).score == b.score_subset({"x1", "x2"}, 4).score);
    CHECK_THROWS_AS(a.score_subset({"nope"}, 4), ValidationError);
}

TEST_CASE("forward selection: stop reasons and leading predictor") {
    const Data d = synthetic(4, {3, 0, -2});
    const FoldPlan plan = make_folds(d.events, d.windows, 1, d.panel.weeks());
    const CrossValidation cv(d.panel, d.events, d.windows, plan, fast_cv());
    const std::vector<std::string> cands{"x1", "x2", "x3"};

    SelectionTrace t = forward_select(cv, cands, {1, 0.0}, 2);
    CHECK(t.steps.size() == 1);
    CHECK(t.stop == StopReason::reached_k);
    CHECK(t.steps[0].tried.size() == 3);
    // chosen is the first argmax of the tried scores
    double best = -1;
    std::string arg;
    for (const auto& [n, s] : t.steps[0].tried)
        if (s > best) {
            best = s;
            arg = n;
        }
    CHECK(t.steps[0].chosen == arg);
    CHECK(t.steps[0].chosen == "x1");

    t = forward_select(cv, cands, {3, 10.0}, 2);
    CHECK(t.steps.size() == 1);
    CHECK(t.stop == StopReason::leveled_off);

    t = forward_select(cv, {"x1", "x2"}, {5, -10.0}, 2);
    CHECK(t.steps.size() == 2);
    CHECK(t.stop == StopReason::exhausted);
    CHECK(t.selected() == std::vector<std::string>{t.steps[0].chosen, t.steps[1].chosen});
}

TEST_CASE("aggregate: median ranks, absent rank k+1, ordering") {
    // k_max 3, absent rank 4
    std::vector<SelectionTrace> traces{make_trace_of({"a", "b"}), make_trace_of({"b", "a", "c"}),
                                       make_trace_of({"a", "d"}), make_trace_of({"a"})};
    const ReplicateAggregate agg = aggregate_replicates(traces, 3);
    CHECK(agg.replicates == 4);
    auto find = [&](const std::string& n) {
        return *std::find_if(agg.ranking.begin(), agg.ranking.end(), [&](auto& r) { return r.name == n; });
    };
    CHECK(find("a").median_rank == 1.0);   // 1,2,1,1
    CHECK(find("b").median_rank == 3.0);   // 2,1,4,4 -> (2+4)/2
    CHECK(find("c").median_rank == 4.0);   // 3,4,4,4
    CHECK(find("d").median_rank == 4.0);   // 4,4,2,4
    CHECK(find("a").frequency == 4);
    CHECK(find("c").frequency == 1);
    REQUIRE(agg.ranking.size() == 4);
    CHECK(agg.ranking[0].name == "a");
    CHECK(agg.ranking[1].name == "b");
    CHECK(agg.ranking[2].name == "c");  // tie on median and frequency: by name
    CHECK(agg.ranking[3].name == "d");
    CHECK(agg.final_selection == std::vector<std::string>{"a", "b"});

    const ReplicateAggregate odd = aggregate_replicates({make_trace_of({"x"}), make_trace_of({"y", "x"}),
                                                         make_trace_of({"y"})},
                                                        2);
    CHECK(odd.ranking[0].name == "y");  // medians 1 and 2... x: 1,2,3 -> 2; y: 3,1,1 -> 1
    CHECK(odd.ranking[0].median_rank == 1.0);
    CHECK(odd.ranking[1].median_rank == 2.0);
}

TEST_CASE("checkpoint round trip and fingerprint guard") {
    testutil::TempDir dir("ckpt");
    SelectionTrace t;
    t.steps = {{"x1", 0.8125, {}}, {"x3", 0.8437500000000001, {}}};
    t.stop = StopReason::leveled_off;
    write_trace_checkpoint(dir / "r.csv", "abc123", t);
    const auto back = read_trace_checkpoint(dir / "r.csv", "abc123");
    REQUIRE(back.has_value());
    REQUIRE(back->steps.size() == 2);
    CHECK(back->steps[1].chosen == "x3");
    CHECK(back->steps[1].score == t.steps[1].score);
    CHECK(back->stop == StopReason::leveled_off);
    CHECK_FALSE(read_trace_checkpoint(dir / "r.csv", "other").has_value());
    CHECK_FALSE(read_trace_checkpoint(dir / "missing.csv", "abc123").has_value());
}

TEST_CASE("selection and aggregate csv layout") {
    testutil::TempDir dir("selcsv");
    std::vector<SelectionTrace> traces{make_trace_of({"a", "b"}), make_trace_of({"b"})};
    write_selection_csv(dir / "s.csv", traces);
    CHECK(testutil::read_file(dir / "s.csv") ==
          "replicate,step,chosen,score\n0,1,a,0.5\n0,2,b,0.5\n1,1,b,0.5\n");
    write_aggregate_csv(dir / "a.csv", aggregate_replicates(traces, 2));
    CHECK(testutil::read_file(dir / "a.csv").rfind("predictor,median_rank,frequency\n", 0) == 0);
}
