#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "earlywarn/events.hpp"
#include "earlywarn/panel.hpp"
#include "earlywarn/parallel.hpp"

namespace earlywarn {

using WeekMask = std::vector<std::uint8_t>;

/// In-control mean and covariance of the monitored predictors, estimated
/// from baseline (non-event) weeks.
///
/// `raw_covariance` is the unbiased sample covariance as estimated;
/// `covariance` is the conditioned SPD matrix used by the scan. When the raw
/// matrix is singular or has condition number above 1e12, a ridge of
/// `delta * mean(diag)` is added, with delta starting at 1e-8 and doubling
/// until the matrix is SPD. `ridge` records the amount added to the diagonal.
struct NullModel {
    std::vector<std::string> names;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd raw_covariance;
    int baseline_weeks = 0;
    bool ridge_applied = false;
    double ridge = 0.0;

    int dimension() const { return static_cast<int>(mean.size()); }

    /// Builds a model from raw moments and conditions the covariance.
    static NullModel from_moments(std::vector<std::string> names, Eigen::VectorXd mean, Eigen::MatrixXd raw_covariance,
                                  int baseline_weeks);

    /// Coordinate projection onto `columns`, re-conditioned. Bit-identical to
    /// estimating the subset directly over the same baseline weeks. Throws
    /// EstimationError with fewer than d + 2 baseline weeks.
    NullModel restrict(const std::vector<int>& columns) const;
};

/// Weeks outside every event interval, intersected with `training` when given.
WeekMask baseline_mask(const EventSet& events, int weeks, std::span<const std::uint8_t> training = {});

/// Observation matrix (weeks x predictors) for the named series.
Eigen::MatrixXd observation_matrix(const AlignedPanel& panel, const std::vector<std::string>& names);

NullModel estimate_null(const AlignedPanel& panel, const EventSet& events, const std::vector<std::string>& subset);
NullModel estimate_null(const AlignedPanel& panel, std::span<const std::uint8_t> baseline,
                        const std::vector<std::string>& subset);
/// Raw mean and unbiased covariance over the baseline weeks, with no
/// conditioning and no minimum-sample check. Used for the all-series moments
/// that subset models are restricted from.
NullModel estimate_moments(const Eigen::MatrixXd& observations, std::span<const std::uint8_t> baseline,
                           std::vector<std::string> names);
/// Same estimator over an explicit observation matrix.
NullModel estimate_null(const Eigen::MatrixXd& observations, std::span<const std::uint8_t> baseline,
                        std::vector<std::string> names);

struct DetectorConfig {
    std::vector<std::string> names;
    double lambda = 0.1;
    double h = 1.0;

    /// Throws ConfigError unless 0 < lambda < 1, h >= 0 and names nonempty.
    void validate() const;
};

/// Per-week statistic, alarm flags (E_t >= h) and first weeks of each
/// maximal alarm run.
struct AlarmTrace {
    std::vector<double> statistic;
    std::vector<std::uint8_t> alarm;
    std::vector<int> onsets;

    int weeks() const { return static_cast<int>(alarm.size()); }
};

std::vector<int> cluster_onsets(std::span<const std::uint8_t> alarm);
AlarmTrace make_trace(std::vector<double> statistic, double h);
/// Drops alarms outside `mask` and recomputes onsets.
AlarmTrace mask_trace(const AlarmTrace& trace, std::span<const std::uint8_t> mask);

/// One-sided EWMA update for a single coordinate.
inline double ewma_step(double previous, double deviation, double lambda) {
    const double v = lambda * deviation + (1.0 - lambda) * previous;
    return v > 0.0 ? v : 0.0;
}

/// Evaluates s' (lambda / (2 - lambda) * Sigma)^-1 s through a Cholesky
/// factor, never forming the inverse.
class QuadraticForm {
public:
    QuadraticForm(const Eigen::MatrixXd& covariance, double lambda);
    /// `scratch` must hold dimension() doubles.
    double evaluate(const double* s, double* scratch) const;
    int dimension() const { return dim_; }

private:
    int dim_;
    std::vector<double> lower_;  // row-major packed lower factor
};

/// Weeks at which the smoothed state restarts from zero.
struct ScanOptions {
    std::vector<int> reset_weeks;
};

/// Smoothed states, one row per week. The state before week 0 (and before
/// each reset week) is zero.
Eigen::MatrixXd smooth_states(const Eigen::MatrixXd& observations, const Eigen::VectorXd& mean, double lambda,
                              const ScanOptions& options = {});

std::vector<double> scan_statistics(const Eigen::MatrixXd& states, const Eigen::MatrixXd& covariance, double lambda);

AlarmTrace run_scan(const AlignedPanel& panel, const NullModel& null, const DetectorConfig& config,
                    const ScanOptions& options = {});
AlarmTrace run_scan(const Eigen::MatrixXd& observations, const NullModel& null, const DetectorConfig& config,
                    const ScanOptions& options = {});

/// Smoothed-state trajectories of every series for each lambda in a grid.
/// Because the update is elementwise, a subset's trajectory is the column
/// projection of the full one and its statistic can be evaluated without
/// rescanning.
class SharedStateTable {
public:
    SharedStateTable(const Eigen::MatrixXd& observations, const Eigen::VectorXd& mean, std::vector<double> lambdas,
                     const ScanOptions& options = {}, Execution execution = Execution::parallel);

    const std::vector<double>& lambdas() const { return lambdas_; }
    const Eigen::MatrixXd& states(std::size_t lambda_index) const { return states_.at(lambda_index); }
    int weeks() const { return weeks_; }
    int width() const { return width_; }

    /// Statistic for the subset `columns` using that subset's null model.
    std::vector<double> statistics(std::size_t lambda_index, const std::vector<int>& columns,
                                   const NullModel& subset_null) const;

    std::size_t value_count() const { return lambdas_.size() * static_cast<std::size_t>(weeks_) * width_; }

private:
    std::vector<double> lambdas_;
    std::vector<Eigen::MatrixXd> states_;
    int weeks_ = 0;
    int width_ = 0;
};

SharedStateTable precompute_shared_states(const AlignedPanel& panel, const NullModel& full_null,
                                          std::vector<double> lambdas, const ScanOptions& options = {},
                                          Execution execution = Execution::parallel);

/// `week,E,alarm,cluster_onset`
void write_trace_csv(const std::filesystem::path& path, const WeekAxis& axis, const AlarmTrace& trace);

}  // namespace earlywarn
