#include "earlywarn/mewma.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "earlywarn/error.hpp"
#include "earlywarn/text.hpp"

namespace earlywarn {
namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kInitialRidge = 1e-8;

bool well_conditioned(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) return false;
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxCondition) return false;
    return Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success;
}

}  // namespace

NullModel NullModel::from_moments(std::vector<std::string> names, Eigen::VectorXd mean, Eigen::MatrixXd raw_covariance,
                                  int baseline_weeks) {
    NullModel m;
    m.names = std::move(names);
    m.mean = std::move(mean);
    m.raw_covariance = std::move(raw_covariance);
    m.baseline_weeks = baseline_weeks;
    m.covariance = m.raw_covariance;
    if (well_conditioned(m.covariance)) return m;

    double scale = m.raw_covariance.diagonal().mean();
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
    const auto identity = Eigen::MatrixXd::Identity(m.dimension(), m.dimension());
    for (double delta = kInitialRidge; delta < 1e6; delta *= 2.0) {
        Eigen::MatrixXd candidate = m.raw_covariance + (delta * scale) * identity;
        if (well_conditioned(candidate)) {
            m.covariance = std::move(candidate);
            m.ridge_applied = true;
            m.ridge = delta * scale;
            return m;
        }
    }
    throw EstimationError("covariance could not be conditioned to positive definite");
}

NullModel NullModel::restrict(const std::vector<int>& columns) const {
    const auto d = static_cast<Eigen::Index>(columns.size());
    if (d == 0) throw ConfigError("predictor subset is empty");
    if (baseline_weeks < d + 2)
        throw EstimationError("only " + std::to_string(baseline_weeks) + " baseline weeks for " + std::to_string(d) +
                              " predictors");
    std::vector<std::string> sub_names;
    Eigen::VectorXd sub_mean(d);
    Eigen::MatrixXd sub_cov(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        sub_names.push_back(names.at(columns[i]));
        sub_mean(i) = mean(columns[i]);
        for (Eigen::Index j = 0; j < d; ++j) sub_cov(i, j) = raw_covariance(columns[i], columns[j]);
    }
    return from_moments(std::move(sub_names), std::move(sub_mean), std::move(sub_cov), baseline_weeks);
}

WeekMask baseline_mask(const EventSet& events, int weeks, std::span<const std::uint8_t> training) {
    WeekMask mask(weeks, 1);
    for (const auto& ev : events.events)
        for (int t = std::max(0, ev.start); t <= std::min(weeks - 1, ev.end); ++t) mask[t] = 0;
    if (!training.empty())
        for (int t = 0; t < weeks; ++t) mask[t] = mask[t] && training[t];
    return mask;
}

Eigen::MatrixXd observation_matrix(const AlignedPanel& panel, const std::vector<std::string>& names) {
    Eigen::MatrixXd x(panel.weeks(), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto& values = panel.series(names[j]).values;
        for (int t = 0; t < panel.weeks(); ++t) x(t, static_cast<Eigen::Index>(j)) = values[t];
    }
    return x;
}

namespace {

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    int weeks = 0;
};

Moments baseline_moments(const Eigen::MatrixXd& observations, std::span<const std::uint8_t> baseline) {
    const auto d = observations.cols();
    const auto weeks = observations.rows();
    if (d == 0) throw ConfigError("predictor subset is empty");
    if (static_cast<Eigen::Index>(baseline.size()) != weeks)
        throw ConfigError("baseline mask length does not match the observation matrix");

    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = 0; t < weeks; ++t)
        if (baseline[t]) rows.push_back(t);
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (n < 2) throw EstimationError("fewer than 2 baseline weeks");

    // Explicit per-entry sums in week order so that any subset reproduces the
    // corresponding entries of the full estimate exactly.
    Moments m;
    m.weeks = static_cast<int>(n);
    m.mean.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double sum = 0.0;
        for (auto t : rows) sum += observations(t, j);
        m.mean(j) = sum / static_cast<double>(n);
    }
    m.covariance.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) {
            double sum = 0.0;
            for (auto t : rows) sum += (observations(t, i) - m.mean(i)) * (observations(t, j) - m.mean(j));
            m.covariance(i, j) = m.covariance(j, i) = sum / static_cast<double>(n - 1);
        }
    }
    return m;
}

void require_baseline(int weeks, Eigen::Index d) {
    if (weeks < d + 2)
        throw EstimationError("only " + std::to_string(weeks) + " baseline weeks for " + std::to_string(d) +
                              " predictors (need at least " + std::to_string(d + 2) + ")");
}

}  // namespace

NullModel estimate_moments(const Eigen::MatrixXd& observations, std::span<const std::uint8_t> baseline,
                           std::vector<std::string> names) {
    Moments m = baseline_moments(observations, baseline);
    NullModel null;
    null.names = std::move(names);
    null.mean = std::move(m.mean);
    null.raw_covariance = m.covariance;
    null.covariance = std::move(m.covariance);
    null.baseline_weeks = m.weeks;
    return null;
}

NullModel estimate_null(const Eigen::MatrixXd& observations, std::span<const std::uint8_t> baseline,
                        std::vector<std::string> names) {
    Moments m = baseline_moments(observations, baseline);
    require_baseline(m.weeks, observations.cols());
    return NullModel::from_moments(std::move(names), std::move(m.mean), std::move(m.covariance), m.weeks);
}

NullModel estimate_null(const AlignedPanel& panel, std::span<const std::uint8_t> baseline,
                        const std::vector<std::string>& subset) {
    return estimate_null(observation_matrix(panel, subset), baseline, subset);
}

NullModel estimate_null(const AlignedPanel& panel, const EventSet& events, const std::vector<std::string>& subset) {
    const auto mask = baseline_mask(events, panel.weeks());
    return estimate_null(panel, mask, subset);
}

void DetectorConfig::validate() const {
    if (names.empty()) throw ConfigError("detector needs at least one predictor");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("smoothing parameter lambda must lie in (0, 1)");
    if (!(h >= 0.0)) throw ConfigError("alarm threshold h must be non-negative");
}

std::vector<int> cluster_onsets(std::span<const std::uint8_t> alarm) {
    std::vector<int> onsets;
    for (std::size_t t = 0; t < alarm.size(); ++t)
        if (alarm[t] && (t == 0 || !alarm[t - 1])) onsets.push_back(static_cast<int>(t));
    return onsets;
}

AlarmTrace make_trace(std::vector<double> statistic, double h) {
    AlarmTrace trace;
    trace.alarm.resize(statistic.size());
    for (std::size_t t = 0; t < statistic.size(); ++t) trace.alarm[t] = statistic[t] >= h ? 1 : 0;
    trace.statistic = std::move(statistic);
    trace.onsets = cluster_onsets(trace.alarm);
    return trace;
}

AlarmTrace mask_trace(const AlarmTrace& trace, std::span<const std::uint8_t> mask) {
    AlarmTrace out = trace;
    for (std::size_t t = 0; t < out.alarm.size(); ++t)
        if (!mask[t]) out.alarm[t] = 0;
    out.onsets = cluster_onsets(out.alarm);
    return out;
}

QuadraticForm::QuadraticForm(const Eigen::MatrixXd& covariance, double lambda)
    : dim_(static_cast<int>(covariance.rows())) {
    const Eigen::MatrixXd scaled = (lambda / (2.0 - lambda)) * covariance;
    Eigen::LLT<Eigen::MatrixXd> llt(scaled);
    if (llt.info() != Eigen::Success) throw EstimationError("asymptotic state covariance is not positive definite");
    const Eigen::MatrixXd l = llt.matrixL();
    lower_.resize(static_cast<std::size_t>(dim_) * (dim_ + 1) / 2);
    std::size_t k = 0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j <= i; ++j) lower_[k++] = l(i, j);
}

double QuadraticForm::evaluate(const double* s, double* scratch) const {
    // Forward substitution L y = s; the form equals |y|^2.
    double total = 0.0;
    std::size_t k = 0;
    for (int i = 0; i < dim_; ++i) {
        double v = s[i];
        for (int j = 0; j < i; ++j) v -= lower_[k++] * scratch[j];
        v /= lower_[k++];
        scratch[i] = v;
        total += v * v;
    }
    return total;
}

Eigen::MatrixXd smooth_states(const Eigen::MatrixXd& observations, const Eigen::VectorXd& mean, double lambda,
                              const ScanOptions& options) {
    const auto weeks = observations.rows();
    const auto d = observations.cols();
    if (mean.size() != d) throw ConfigError("null model dimension does not match the observations");
    std::vector<std::uint8_t> reset(weeks, 0);
    for (int r : options.reset_weeks)
        if (r >= 0 && r < weeks) reset[r] = 1;

    Eigen::MatrixXd states(weeks, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double s = 0.0;
        for (Eigen::Index t = 0; t < weeks; ++t) {
            if (reset[t]) s = 0.0;
            s = ewma_step(s, observations(t, j) - mean(j), lambda);
            states(t, j) = s;
        }
    }
    return states;
}

std::vector<double> scan_statistics(const Eigen::MatrixXd& states, const Eigen::MatrixXd& covariance, double lambda) {
    const QuadraticForm form(covariance, lambda);
    const auto d = states.cols();
    std::vector<double> out(states.rows());
    std::vector<double> s(d), scratch(d);
    for (Eigen::Index t = 0; t < states.rows(); ++t) {
        for (Eigen::Index j = 0; j < d; ++j) s[j] = states(t, j);
        out[t] = form.evaluate(s.data(), scratch.data());
    }
    return out;
}

AlarmTrace run_scan(const Eigen::MatrixXd& observations, const NullModel& null, const DetectorConfig& config,
                    const ScanOptions& options) {
    config.validate();
    if (null.dimension() != static_cast<int>(config.names.size()) || observations.cols() != null.dimension())
        throw ConfigError("detector subset does not match the null model dimension");
    const Eigen::MatrixXd states = smooth_states(observations, null.mean, config.lambda, options);
    return make_trace(scan_statistics(states, null.covariance, config.lambda), config.h);
}

AlarmTrace run_scan(const AlignedPanel& panel, const NullModel& null, const DetectorConfig& config,
                    const ScanOptions& options) {
    if (null.names != config.names) throw ConfigError("null model was estimated for a different predictor subset");
    return run_scan(observation_matrix(panel, config.names), null, config, options);
}

SharedStateTable::SharedStateTable(const Eigen::MatrixXd& observations, const Eigen::VectorXd& mean,
                                   std::vector<double> lambdas, const ScanOptions& options, Execution execution)
    : lambdas_(std::move(lambdas)),
      weeks_(static_cast<int>(observations.rows())),
      width_(static_cast<int>(observations.cols())) {
    if (mean.size() != observations.cols()) throw ConfigError("null model dimension does not match the observations");
    states_.assign(lambdas_.size(), Eigen::MatrixXd(weeks_, width_));
    std::vector<std::uint8_t> reset(weeks_, 0);
    for (int r : options.reset_weeks)
        if (r >= 0 && r < weeks_) reset[r] = 1;

    const long tasks = static_cast<long>(lambdas_.size()) * width_;
#pragma omp parallel for schedule(static) if (execution == Execution::parallel)
    for (long task = 0; task < tasks; ++task) {
        const auto li = static_cast<std::size_t>(task / width_);
        const auto j = static_cast<Eigen::Index>(task % width_);
        const double lambda = lambdas_[li];
        Eigen::MatrixXd& out = states_[li];
        double s = 0.0;
        for (int t = 0; t < weeks_; ++t) {
            if (reset[t]) s = 0.0;
            s = ewma_step(s, observations(t, j) - mean(j), lambda);
            out(t, j) = s;
        }
    }
}

std::vector<double> SharedStateTable::statistics(std::size_t lambda_index, const std::vector<int>& columns,
                                                 const NullModel& subset_null) const {
    if (subset_null.dimension() != static_cast<int>(columns.size()))
        throw ConfigError("subset null model does not match the column selection");
    const QuadraticForm form(subset_null.covariance, lambdas_.at(lambda_index));
    const Eigen::MatrixXd& states = states_[lambda_index];
    std::vector<double> out(weeks_);
    std::vector<double> s(columns.size()), scratch(columns.size());
    for (int t = 0; t < weeks_; ++t) {
        for (std::size_t j = 0; j < columns.size(); ++j) s[j] = states(t, columns[j]);
        out[t] = form.evaluate(s.data(), scratch.data());
    }
    return out;
}

SharedStateTable precompute_shared_states(const AlignedPanel& panel, const NullModel& full_null,
                                          std::vector<double> lambdas, const ScanOptions& options,
                                          Execution execution) {
    return SharedStateTable(observation_matrix(panel, full_null.names), full_null.mean, std::move(lambdas), options,
                            execution);
}

void write_trace_csv(const std::filesystem::path& path, const WeekAxis& axis, const AlarmTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "week,E,alarm,cluster_onset\n";
    std::size_t next_onset = 0;
    for (int t = 0; t < trace.weeks(); ++t) {
        const bool onset = next_onset < trace.onsets.size() && trace.onsets[next_onset] == t;
        if (onset) ++next_onset;
        out << axis.at(t).to_string() << ',' << text::format_double(trace.statistic[t]) << ','
            << int(trace.alarm[t]) << ',' << (onset ? 1 : 0) << '\n';
    }
}

}  // namespace earlywarn
