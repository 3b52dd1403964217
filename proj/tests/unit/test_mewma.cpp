#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "earlywarn/error.hpp"
#include "earlywarn/mewma.hpp"
#include "helpers.hpp"

using namespace earlywarn;
using testutil::series;

namespace {

Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = n(rng);
    return a * a.transpose() + d * Eigen::MatrixXd::Identity(d, d);
}

AlignedPanel random_panel(int weeks, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(1.0, 0.5);
    std::vector<double> g(weeks);
    for (auto& v : g) v = n(rng);
    std::vector<Series> c;
    for (int k = 0; k < count; ++k) {
        std::vector<double> v(weeks);
        for (auto& x : v) x = n(rng) + 0.3 * k;
        c.push_back(series("c" + std::to_string(k), v));
    }
    return AlignedPanel(testutil::axis(weeks), series("g", g), c);
}

}  // namespace

TEST_CASE("univariate hand evaluation: E_1 = 0.75") {
    const NullModel null = NullModel::from_moments({"x"}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), 10);
    Eigen::MatrixXd x(1, 1);
    x(0, 0) = 1.0;
    const AlarmTrace tr = run_scan(x, null, DetectorConfig{{"x"}, 0.5, 0.7});
    CHECK(tr.statistic[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(tr.alarm[0] == 1);
}

TEST_CASE("null estimate: sample mean and n-1 variance") {
    const AlignedPanel p(testutil::axis(3), series("g", {0, 0, 0}), {series("x", {2, 4, 6})});
    const NullModel null = estimate_null(p, WeekMask{1, 1, 1}, {"x"});
    CHECK(null.mean(0) == 4.0);
    CHECK(null.raw_covariance(0, 0) == 4.0);
    CHECK_FALSE(null.ridge_applied);
}

TEST_CASE("null estimate: d + 2 baseline weeks required") {
    const AlignedPanel p(testutil::axis(3), series("g", {0, 0, 0}), {series("x", {2, 4, 5}), series("y", {1, 0, 3})});
    CHECK_THROWS_AS(estimate_null(p, WeekMask{1, 1, 1}, {"x", "y"}), EstimationError);
    CHECK_NOTHROW(estimate_null(p, WeekMask{1, 1, 1}, {"x"}));
}

TEST_CASE("duplicated predictor: singular covariance gets a ridge") {
    const AlignedPanel p(testutil::axis(5), series("g", {0, 0, 0, 0, 0}),
                         {series("x", {1, 3, 2, 5, 4}), series("x2", {1, 3, 2, 5, 4})});
    const NullModel null = estimate_null(p, WeekMask(5, 1), {"x", "x2"});
    CHECK(null.ridge_applied);
    CHECK(null.ridge > 0.0);
    CHECK(null.covariance(0, 0) > null.raw_covariance(0, 0));
    CHECK(Eigen::LLT<Eigen::MatrixXd>(null.covariance).info() == Eigen::Success);
}

TEST_CASE("baseline mask equals a brute-force recomputation") {
    SyntheticPanelSpec spec;
    spec.noise = 0.0;
    const AlignedPanel p = generate_synthetic(spec);
    const EventSet ev = detect_events(p.gold(), 1.25, 3);
    const WeekMask mask = baseline_mask(ev, p.weeks());
    for (int t = 0; t < p.weeks(); ++t) {
        // gold below threshold, or above it only in a run shorter than 3
        bool in_event = false;
        if (p.gold().values[t] >= 1.25) {
            int a = t, b = t;
            while (a > 0 && p.gold().values[a - 1] >= 1.25) --a;
            while (b + 1 < p.weeks() && p.gold().values[b + 1] >= 1.25) ++b;
            in_event = b - a + 1 >= 3;
        }
        CHECK(mask[t] == (in_event ? 0 : 1));
    }
    const NullModel null = estimate_null(p, ev, {"x1"});
    CHECK(null.baseline_weeks == std::count(mask.begin(), mask.end(), 1));
}

TEST_CASE("in-control observations give zero statistic") {
    const AlignedPanel p(testutil::axis(6), series("g", {0, 0, 0, 0, 0, 0}),
                         {series("a", {2, 2, 2, 2, 2, 2}), series("b", {5, 5, 5, 5, 5, 5})});
    NullModel null = NullModel::from_moments({"a", "b"}, Eigen::Vector2d(2, 5), Eigen::Matrix2d::Identity(), 6);
    const AlarmTrace tr = run_scan(p, null, DetectorConfig{{"a", "b"}, 0.3, 1e-9});
    for (double e : tr.statistic) CHECK(e == 0.0);
    CHECK(tr.onsets.empty());
}

TEST_CASE("clustering rule") {
    const AlarmTrace tr = make_trace({0, 5, 6, 0, 7}, 4.0);
    CHECK(tr.alarm == std::vector<std::uint8_t>{0, 1, 1, 0, 1});
    CHECK(tr.onsets == std::vector<int>{1, 4});
    const AlarmTrace m = mask_trace(tr, WeekMask{1, 0, 1, 1, 1});
    CHECK(m.onsets == std::vector<int>{2, 4});
}

TEST_CASE("quadratic form agrees with explicit inverse") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 6;
        const Eigen::MatrixXd cov = random_spd(d, rng);
        const double lambda = 0.05 + 0.9 * (trial % 10) / 10.0;
        Eigen::VectorXd s(d);
        for (int i = 0; i < d; ++i) s(i) = u(rng);
        const double oracle = s.dot(((lambda / (2 - lambda)) * cov).inverse() * s);
        const QuadraticForm form(cov, lambda);
        std::vector<double> scratch(d);
        const double e = form.evaluate(s.data(), scratch.data());
        CHECK(std::abs(e - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("scan properties: nonnegativity and nested alarm sets") {
    const AlignedPanel p = random_panel(150, 3, 9);
    const std::vector<std::string> names{"c0", "c1", "c2"};
    const NullModel null = estimate_null(p, WeekMask(150, 1), names);
    const Eigen::MatrixXd states = smooth_states(observation_matrix(p, names), null.mean, 0.2);
    CHECK((states.array() >= 0.0).all());
    const AlarmTrace lo = run_scan(p, null, DetectorConfig{names, 0.2, 2.0});
    const AlarmTrace hi = run_scan(p, null, DetectorConfig{names, 0.2, 4.0});
    for (int t = 0; t < 150; ++t) {
        CHECK(lo.statistic[t] >= 0.0);
        CHECK(hi.alarm[t] <= lo.alarm[t]);
    }
}

TEST_CASE("subset projection is bit-identical to the direct scan") {
    const AlignedPanel p = random_panel(120, 10, 21);
    const auto names = p.candidate_names();
    const Eigen::MatrixXd x = observation_matrix(p, names);
    const NullModel full = estimate_moments(x, WeekMask(120, 1), names);
    const std::vector<double> lambdas{0.1, 0.5, 0.9};
    const SharedStateTable table(x, full.mean, lambdas);
    CHECK(table.value_count() == 3u * 120u * 10u);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> cols(10);
        std::iota(cols.begin(), cols.end(), 0);
        std::shuffle(cols.begin(), cols.end(), rng);
        cols.resize(1 + trial % 4);
        std::vector<std::string> subset;
        for (int c : cols) subset.push_back(names[c]);
        const NullModel projected = full.restrict(cols);
        const NullModel direct = estimate_null(p, WeekMask(120, 1), subset);
        CHECK(projected.mean == direct.mean);
        CHECK(projected.covariance == direct.covariance);
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            const auto via_table = table.statistics(li, cols, projected);
            const AlarmTrace tr = run_scan(p, direct, DetectorConfig{subset, lambdas[li], 1.0});
            CHECK(via_table == tr.statistic);
        }
    }
}

TEST_CASE("state table: serial and parallel builds are identical") {
    const AlignedPanel p = random_panel(200, 12, 4);
    const Eigen::MatrixXd x = observation_matrix(p, p.candidate_names());
    const Eigen::VectorXd mean = x.colwise().mean();
    ScanOptions opts;
    opts.reset_weeks = {50, 120};
    const SharedStateTable a(x, mean, {0.1, 0.3, 0.7}, opts, Execution::serial);
    const SharedStateTable b(x, mean, {0.1, 0.3, 0.7}, opts, Execution::parallel);
    for (std::size_t li = 0; li < 3; ++li) CHECK(a.states(li) == b.states(li));
    CHECK(a.states(0).row(50) == smooth_states(x.middleRows(50, 1), mean, 0.1));
}

TEST_CASE("run_scan rejects mismatched models") {
    const AlignedPanel p = random_panel(30, 2, 1);
    const NullModel null = estimate_null(p, WeekMask(30, 1), {"c0"});
    CHECK_THROWS_AS(run_scan(p, null, DetectorConfig{{"c1"}, 0.3, 1.0}), ConfigError);
    CHECK_THROWS_AS(run_scan(p, null, DetectorConfig{{"c0"}, 1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(run_scan(p, null, DetectorConfig{{"c0"}, 0.3, -1.0}), ConfigError);
}
