#include "earlywarn/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "earlywarn/error.hpp"
#include "earlywarn/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace earlywarn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool nested() {
#ifdef _OPENMP
    return omp_in_parallel() != 0;
#else
    return false;
#endif
}

/// Null model rescaled to unit variances. The scan statistic is invariant
/// under per-coordinate positive scaling, so simulating from the correlation
/// matrix reproduces the original statistic.
struct StandardizedNull {
    int dim = 0;
    Eigen::MatrixXd correlation;
    std::vector<double> factor;  // packed lower Cholesky factor of the correlation

    explicit StandardizedNull(const NullModel& null) : dim(null.dimension()) {
        if (dim == 0) throw ConfigError("null model is empty");
        const Eigen::VectorXd sd = null.covariance.diagonal().array().sqrt();
        correlation = sd.cwiseInverse().asDiagonal() * null.covariance * sd.cwiseInverse().asDiagonal();
        for (int i = 0; i < dim; ++i) correlation(i, i) = 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt(correlation);
        if (llt.info() != Eigen::Success) throw EstimationError("null covariance is not positive definite");
        const Eigen::MatrixXd l = llt.matrixL();
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j <= i; ++j) factor.push_back(l(i, j));
    }
};

struct SpacingTally {
    long long sum = 0;
    long long count = 0;
};

SpacingTally simulate_sequence(const StandardizedNull& null, const QuadraticForm& form, double lambda, double h,
                               int burn_in, int length, std::uint64_t seed, SpacingMode mode,
                               AtfsEstimator estimator) {
    const int d = null.dim;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> z(d), s(d, 0.0), scratch(d);
    SpacingTally tally;
    int last = -1;
    bool previous = false;
    for (int t = 0; t < burn_in + length; ++t) {
        for (int j = 0; j < d; ++j) z[j] = normal(rng);
        std::size_t k = 0;
        for (int i = 0; i < d; ++i) {
            double x = 0.0;
            for (int j = 0; j <= i; ++j) x += null.factor[k++] * z[j];
            s[i] = ewma_step(s[i], x, lambda);
        }
        const bool alarm = form.evaluate(s.data(), scratch.data()) >= h;
        const bool mark = mode == SpacingMode::all_alarms ? alarm : (alarm && !previous);
        previous = alarm;
        if (t < burn_in || !mark) continue;
        if (estimator == AtfsEstimator::alarm_rate) {
            ++tally.count;
        } else {
            if (last >= 0) {
                tally.sum += t - last;
                ++tally.count;
            }
            last = t;
        }
    }
    if (estimator == AtfsEstimator::alarm_rate) tally.sum = length;
    return tally;
}

AtfsEstimate simulate_standardized(const StandardizedNull& null, double lambda, double h,
                                   const SimulationOptions& options) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("smoothing parameter lambda must lie in (0, 1)");
    if (options.simulations < 1) throw ConfigError("simulation count must be at least 1");
    if (options.sequence_length < 2) throw ConfigError("simulated sequence length must be at least 2");

    const int burn_in = options.burn_in >= 0 ? options.burn_in : default_burn_in(lambda, options.estimator);
    const QuadraticForm form(null.correlation, lambda);
    std::vector<SpacingTally> tallies(options.simulations);
    const bool parallel = options.execution == Execution::parallel && !nested();
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < options.simulations; ++i)
        tallies[i] = simulate_sequence(null, form, lambda, h, burn_in, options.sequence_length,
                                       derive_seed(options.seed, static_cast<std::uint64_t>(i)), options.spacing,
                                       options.estimator);

    long long sum = 0;
    long long count = 0;
    for (const auto& t : tallies) {
        sum += t.sum;
        count += t.count;
    }
    AtfsEstimate est;
    est.lambda = lambda;
    est.h = h;
    est.simulations = options.simulations;
    est.sequence_length = options.sequence_length;
    est.seed = options.seed;
    est.spacings = count;
    est.atfs = count == 0 ? kInf : static_cast<double>(sum) / static_cast<double>(count);
    return est;
}

ThresholdSolution solve_standardized(const StandardizedNull& null, double lambda, const SolveOptions& options) {
    const double target = options.target;
    if (!(target >= 1.0)) throw ValidationError("target ATFS must be at least 1 week");
    if (!(options.tolerance > 0.0)) throw ValidationError("secant tolerance must be positive");

    SimulationOptions sim;
    sim.simulations = options.simulations;
    sim.sequence_length =
        options.sequence_length > 0 ? options.sequence_length : static_cast<int>(std::ceil(10.0 * target));
    sim.seed = options.seed;
    sim.spacing = options.spacing;
    sim.estimator = options.estimator;
    sim.burn_in = options.burn_in;
    sim.execution = options.execution;

    ThresholdSolution sol;
    double lo = 0.0;
    double hi = 0.0;
    auto evaluate = [&](double h) {
        if (sol.iterations >= options.max_iterations)
            throw SolverError("threshold solve did not converge in " + std::to_string(options.max_iterations) +
                                  " iterations",
                              lo, hi);
        ++sol.iterations;
        const double atfs = simulate_standardized(null, lambda, h, sim).atfs;
        sol.history.emplace_back(h, atfs);
        return atfs;
    };
    auto accept = [&](double h, double atfs) {
        sol.h = h;
        sol.atfs = atfs;
        return sol;
    };
    auto close_enough = [&](double atfs) {
        return options.tolerance_kind == ToleranceKind::atfs && std::abs(atfs - target) <= options.tolerance;
    };

    // Lower end of the bracket: simulated ATFS below target.
    double atfs_lo = 0.0;
    if (options.spacing == SpacingMode::all_alarms) {
        atfs_lo = evaluate(0.0);
        if (close_enough(atfs_lo)) return accept(0.0, atfs_lo);
        if (atfs_lo > target) return accept(0.0, atfs_lo);  // every week alarms already exceeds a target below 1
    } else {
        lo = 1.0;
        atfs_lo = evaluate(lo);
        while (atfs_lo >= target) {
            if (close_enough(atfs_lo)) return accept(lo, atfs_lo);
            hi = lo;
            lo *= 0.5;
            atfs_lo = evaluate(lo);
        }
        if (close_enough(atfs_lo)) return accept(lo, atfs_lo);
    }

    // Upper end: grow geometrically until the simulated ATFS reaches the target.
    hi = std::max(2.0 * null.dim, 2.0 * lo);
    double atfs_hi = evaluate(hi);
    while (atfs_hi < target) {
        if (close_enough(atfs_hi)) return accept(hi, atfs_hi);
        lo = hi;
        atfs_lo = atfs_hi;
        hi *= 2.0;
        atfs_hi = evaluate(hi);
    }
    if (close_enough(atfs_hi)) return accept(hi, atfs_hi);

    // Secant on log(ATFS / target), which is close to linear in h. The
    // Illinois weighting stops one end from sticking; an infinite end or an
    // iterate outside the bracket falls back to bisection.
    auto g = [&](double atfs) { return atfs > 0.0 ? std::log(atfs / target) : -kInf; };
    double g_lo = g(atfs_lo);
    double g_hi = g(atfs_hi);
    int side = 0;
    while (true) {
        if (options.tolerance_kind == ToleranceKind::threshold && hi - lo <= options.tolerance)
            return std::abs(atfs_lo - target) <= std::abs(atfs_hi - target) ? accept(lo, atfs_lo)
                                                                             : accept(hi, atfs_hi);
        double c = 0.5 * (lo + hi);
        if (std::isfinite(g_lo) && std::isfinite(g_hi) && g_hi > g_lo) {
            const double secant = hi - g_hi * (hi - lo) / (g_hi - g_lo);
            if (secant > lo && secant < hi) c = secant;
        }
        const double atfs = evaluate(c);
        if (close_enough(atfs)) return accept(c, atfs);
        if (atfs < target) {
            lo = c;
            atfs_lo = atfs;
            g_lo = g(atfs);
            if (side == -1 && std::isfinite(g_hi)) g_hi *= 0.5;
            side = -1;
        } else {
            hi = c;
            atfs_hi = atfs;
            g_hi = g(atfs);
            if (side == +1 && std::isfinite(g_lo)) g_lo *= 0.5;
            side = +1;
        }
    }
}

template <class T>
void append_bytes(std::string& key, const T& value) {
    key.append(reinterpret_cast<const char*>(&value), sizeof value);
}

}  // namespace

int default_burn_in(double lambda, AtfsEstimator estimator) {
    if (estimator == AtfsEstimator::within_sequence) return 0;
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("smoothing parameter lambda must lie in (0, 1)");
    return static_cast<int>(std::ceil(std::log(1e-3) / std::log1p(-lambda)));
}

AtfsEstimate simulate_atfs(const NullModel& null, double lambda, double h, const SimulationOptions& options) {
    return simulate_standardized(StandardizedNull(null), lambda, h, options);
}

ThresholdSolution solve_threshold(const NullModel& null, double lambda, const SolveOptions& options) {
    return solve_standardized(StandardizedNull(null), lambda, options);
}

ThresholdSolution ThresholdCache::solve(const NullModel& null, double lambda, const SolveOptions& options) {
    const StandardizedNull standardized(null);
    std::string key;
    append_bytes(key, standardized.dim);
    for (Eigen::Index i = 0; i < standardized.correlation.size(); ++i)
        append_bytes(key, standardized.correlation.data()[i]);
    append_bytes(key, lambda);
    append_bytes(key, options.target);
    append_bytes(key, options.tolerance);
    append_bytes(key, options.tolerance_kind);
    append_bytes(key, options.max_iterations);
    append_bytes(key, options.simulations);
    append_bytes(key, options.sequence_length);
    append_bytes(key, options.seed);
    append_bytes(key, options.spacing);
    append_bytes(key, options.estimator);
    append_bytes(key, options.burn_in);
    {
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            ++hits_;
            return it->second;
        }
    }
    // Computed outside the lock; concurrent misses on one key produce the
    // same value, so whichever insert lands first is kept.
    ThresholdSolution sol = solve_standardized(standardized, lambda, options);
    std::lock_guard lock(mutex_);
    return entries_.emplace(std::move(key), std::move(sol)).first->second;
}

std::size_t ThresholdCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t ThresholdCache::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
    return grid;
}

std::uint64_t solve_seed(std::uint64_t master, std::size_t lambda_index) {
    return derive_seed(master, 0x5eedULL + lambda_index);
}

CalibrationResult optimize_over_grid(const NullModel& null, const CalibrationOptions& options,
                                     const std::function<double(std::size_t, double)>& in_sample,
                                     ThresholdCache* cache) {
    if (options.lambdas.empty()) throw ConfigError("lambda grid is empty");
    for (double l : options.lambdas)
        if (!(l > 0.0 && l < 1.0)) throw ConfigError("lambda grid values must lie in (0, 1)");

    const auto n = options.lambdas.size();
    std::vector<CurvePoint> curve(n);
    const bool parallel = options.solve.execution == Execution::parallel && !nested();
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long i = 0; i < static_cast<long>(n); ++i) {
        CurvePoint& p = curve[i];
        p.lambda = options.lambdas[i];
        try {
            SolveOptions solve = options.solve;
            solve.seed = solve_seed(options.solve.seed, static_cast<std::size_t>(i));
            const ThresholdSolution sol =
                cache ? cache->solve(null, p.lambda, solve) : solve_threshold(null, p.lambda, solve);
            p.h = sol.h;
            p.atfs = sol.atfs;
            p.performance = in_sample(static_cast<std::size_t>(i), sol.h);
            p.ok = true;
        } catch (const std::exception& e) {
            p.failure = e.what();
        }
    }

    CalibrationResult result;
    result.curve = curve;
    const CurvePoint* best = nullptr;
    for (const auto& p : curve) {
        if (!p.ok) continue;
        if (!best || p.performance > best->performance ||
            (p.performance == best->performance &&
             (p.lambda < best->lambda || (p.lambda == best->lambda && p.h < best->h))))
            best = &p;
    }
    if (!best) {
        std::string detail = curve.front().failure;
        throw CalibrationError("threshold solve failed for every lambda in the grid (first failure: " + detail + ")");
    }
    result.best = *best;
    return result;
}

CalibrationResult optimize_params(const AlignedPanel& panel, const EventSet& events,
                                  const DetectionWindowSet& windows, const std::vector<std::string>& subset,
                                  const CalibrationOptions& options, ThresholdCache* cache) {
    if (subset.empty()) throw ConfigError("predictor subset is empty");
    if (events.empty()) throw ConfigError("calibration needs at least one event");
    const NullModel null = estimate_null(panel, events, subset);
    const Eigen::MatrixXd x = observation_matrix(panel, subset);
    std::vector<std::vector<double>> statistics;
    for (double lambda : options.lambdas)
        statistics.push_back(scan_statistics(smooth_states(x, null.mean, lambda), null.covariance, lambda));
    return optimize_over_grid(
        null, options,
        [&](std::size_t li, double h) {
            return score(make_trace(statistics[li], h), windows, events, options.scoring).performance;
        },
        cache);
}

void write_calibration_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "lambda,h,atfs_est,performance\n";
    for (const auto& p : curve) {
        if (!p.ok) continue;
        out << text::format_double(p.lambda) << ',' << text::format_double(p.h) << ','
            << text::format_double(p.atfs) << ',' << text::format_double(p.performance) << '\n';
    }
}

}  // namespace earlywarn
