#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "earlywarn/evaluate.hpp"
#include "earlywarn/mewma.hpp"
#include "earlywarn/parallel.hpp"

namespace earlywarn {

/// Which alarms delimit the spacings that average to the ATFS.
enum class SpacingMode { all_alarms, cluster_onsets };

/// How simulated alarms turn into an ATFS estimate.
///
/// `alarm_rate` divides the counted weeks by the number of alarms, i.e. the
/// mean spacing of the alarm process read as one long in-control run. With
/// common random numbers it is exactly nondecreasing in h. `within_sequence`
/// averages only the spacings that fall inside one sequence; it drops the
/// censored gaps at both ends and so undercounts long gaps whenever alarm
/// clusters are long relative to the sequence.
enum class AtfsEstimator { alarm_rate, within_sequence };

/// Warm-up weeks discarded before counting: enough for (1 - lambda)^k to fall
/// below 1e-3 under `alarm_rate`, none under `within_sequence`.
int default_burn_in(double lambda, AtfsEstimator estimator);

/// Monte-Carlo estimate of the average time between false signals.
/// `atfs` is +infinity when no sequence produced two alarms.
struct AtfsEstimate {
    double lambda = 0.0;
    double h = 0.0;
    double atfs = 0.0;
    int simulations = 0;
    int sequence_length = 0;
    std::uint64_t seed = 0;
    /// Spacings averaged (within_sequence) or alarms counted (alarm_rate).
    long long spacings = 0;

    bool finite() const { return atfs < std::numeric_limits<double>::infinity(); }
};

struct SimulationOptions {
    int simulations = 1000;
    int sequence_length = 200;
    std::uint64_t seed = 1;
    SpacingMode spacing = SpacingMode::all_alarms;
    AtfsEstimator estimator = AtfsEstimator::alarm_rate;
    /// < 0 means default_burn_in().
    int burn_in = -1;
    Execution execution = Execution::parallel;
};

/// Draws i.i.d. N(mu, Sigma) sequences, runs the reset-free scan on each, and
/// estimates the mean spacing between consecutive alarms. Sequence i uses its own
/// generator seeded from (seed, i), so the result does not depend on the
/// execution mode or thread count.
AtfsEstimate simulate_atfs(const NullModel& null, double lambda, double h, const SimulationOptions& options);

enum class ToleranceKind { atfs, threshold };

struct SolveOptions {
    double target = 20.0;
    double tolerance = 0.5;
    ToleranceKind tolerance_kind = ToleranceKind::atfs;
    int max_iterations = 100;
    int simulations = 1000;
    /// <= 0 means 10 * target.
    int sequence_length = 0;
    std::uint64_t seed = 1;
    SpacingMode spacing = SpacingMode::all_alarms;
    AtfsEstimator estimator = AtfsEstimator::alarm_rate;
    int burn_in = -1;
    Execution execution = Execution::parallel;
};

struct ThresholdSolution {
    double h = 0.0;
    double atfs = 0.0;
    int iterations = 0;
    /// Every (h, simulated ATFS) pair evaluated, in evaluation order.
    std::vector<std::pair<double, double>> history;
};

/// Secant search on the simulated ATFS (common random numbers, so the
/// objective is deterministic), kept inside a monotone bracket [lo, hi].
/// Throws SolverError carrying the last bracket on non-convergence.
ThresholdSolution solve_threshold(const NullModel& null, double lambda, const SolveOptions& options);

/// Thread-safe memo of threshold solves. The simulated statistic depends on
/// the null model only through its correlation matrix, so solves are keyed by
/// that matrix together with lambda and the solve options.
class ThresholdCache {
public:
    ThresholdSolution solve(const NullModel& null, double lambda, const SolveOptions& options);
    std::size_t size() const;
    std::size_t hits() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, ThresholdSolution> entries_;
    std::size_t hits_ = 0;
};

std::vector<double> default_lambda_grid();

/// One (lambda, h) pair on the constraint curve for a target ATFS.
struct CurvePoint {
    double lambda = 0.0;
    double h = 0.0;
    double atfs = 0.0;
    double performance = 0.0;
    bool ok = false;
    std::string failure;
};

struct CalibrationResult {
    CurvePoint best;
    std::vector<CurvePoint> curve;
};

struct CalibrationOptions {
    std::vector<double> lambdas = default_lambda_grid();
    SolveOptions solve{};
    ScoreOptions scoring{};
};

/// Seed for the threshold solve at grid position `lambda_index`.
std::uint64_t solve_seed(std::uint64_t master, std::size_t lambda_index);

/// Solves h for every lambda, scores each pair with `in_sample`, and keeps
/// the best; ties go to the smaller lambda, then the smaller h. Throws
/// CalibrationError when every grid point fails.
CalibrationResult optimize_over_grid(const NullModel& null, const CalibrationOptions& options,
                                     const std::function<double(std::size_t lambda_index, double h)>& in_sample,
                                     ThresholdCache* cache = nullptr);

/// In-sample calibration of `subset` over the whole panel.
CalibrationResult optimize_params(const AlignedPanel& panel, const EventSet& events,
                                  const DetectionWindowSet& windows, const std::vector<std::string>& subset,
                                  const CalibrationOptions& options, ThresholdCache* cache = nullptr);

/// `lambda,h,atfs_est,performance`
void write_calibration_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

}  // namespace earlywarn
