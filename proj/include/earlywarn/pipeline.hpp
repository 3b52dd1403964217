#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "earlywarn/baselines.hpp"
#include "earlywarn/calibrate.hpp"
#include "earlywarn/evaluate.hpp"
#include "earlywarn/select.hpp"
#include "earlywarn/text.hpp"

namespace earlywarn {

/// Every knob of an experiment, with defaults at the usual operating
/// point. Rendered back to text for the config echo.
struct ExperimentSettings {
    std::filesystem::path manifest;
    std::filesystem::path output;

    double epsilon = 1.25;
    int min_duration = 3;
    int window = 16;
    int lead = 8;
    bool clip_to_onset_minimum = false;

    double atfs = 20.0;
    int simulations = 1000;
    int sequence_length = 0;  ///< 0 means 10 * atfs
    std::vector<double> lambdas = default_lambda_grid();
    double secant_tolerance = 0.5;
    ToleranceKind tolerance_kind = ToleranceKind::atfs;
    int max_iterations = 100;
    SpacingMode spacing = SpacingMode::all_alarms;
    AtfsEstimator atfs_estimator = AtfsEstimator::alarm_rate;
    int burn_in = -1;  ///< < 0 means automatic

    int k_max = 8;
    double min_improvement = 0.0;
    int replicates = 40;
    FoldPreset select_folds = FoldPreset::select_6fold;
    FoldPreset evaluate_folds = FoldPreset::compare_3fold;
    bool reset_at_fold_boundaries = true;
    std::uint64_t seed = 1;

    double reporting_epsilon = 2.0;
    bool raw_alarm_precision = false;
    bool late_onsets_as_false = false;

    /// Restricts the selection pool; empty means every panel candidate.
    std::vector<std::string> candidates;
    /// Fixed subset for `detect` and for the optimized model in `evaluate`;
    /// empty means run selection first.
    std::vector<std::string> subset;
    /// Fixed detector parameters for `detect`; calibrated when absent.
    std::optional<double> lambda;
    std::optional<double> h;

    std::vector<std::string> models{"optimized", "week-trigger", "rise-trigger", "univariate-gold"};
    std::vector<int> week_grid = default_week_grid();
    std::vector<int> rise_grid = default_rise_grid();

    std::string sweep_axis = "epsilon";
    std::vector<double> sweep_values;
    int gap_train_seasons = 4;

    int threads = 0;  ///< 0 = hardware concurrency

    /// Applies `key = value` pairs on top of the current values. Unknown keys
    /// and malformed values throw ConfigError.
    void apply(const text::KeyValueFile& file);
    void set(const std::string& key, const std::string& value);
    /// Checks ranges; throws ValidationError.
    void validate() const;
    /// One `key = value` line per setting, in a fixed order.
    std::string render() const;

    CvOptions cv_options(Execution execution = Execution::parallel) const;
    ScoreOptions score_options() const;
};

const char* to_string(FoldPreset preset);
const char* to_string(SpacingMode mode);
const char* to_string(AtfsEstimator estimator);

/// Panel with its events and windows under the settings' event definition.
struct PreparedData {
    AlignedPanel panel;
    EventSet events;
    DetectionWindowSet windows;
};

PreparedData prepare(AlignedPanel panel, const ExperimentSettings& settings);

/// Stable digest of panel names and values, used to fingerprint checkpoints.
std::string panel_digest(const AlignedPanel& panel);

struct SelectionRun {
    std::vector<SelectionTrace> traces;
    ReplicateAggregate aggregate;
    int resumed = 0;  ///< replicates loaded from checkpoints
};

/// Runs `replicates` forward selections (replicate r seeded with seed + r)
/// and aggregates them. With a checkpoint directory, finished replicates are
/// written there and reloaded on the next run with the same fingerprint.
SelectionRun run_selection(const PreparedData& data, const ExperimentSettings& settings,
                           const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

/// Out-of-sample behaviour of one model under a fold plan.
struct FoldSummary {
    int fold = 0;
    std::string parameters;  ///< e.g. "lambda=0.3;h=7.1" or "week=34"
    double performance = 0.0;
    /// Mean of (onset - event start) over detected held-out events.
    std::optional<double> mean_onset_offset;
};

struct ModelEvaluation {
    std::string model;
    std::vector<std::string> subset;  ///< MEWMA models only
    AlarmTrace trace;                 ///< held-out alarms of every fold, pooled
    EvaluationReport report;          ///< pooled trace scored on all windows
    double mean_fold_performance = 0.0;
    std::vector<LeadOutcome> leads;
    std::optional<double> mean_lead;
    std::optional<double> mean_onset_offset;
    std::vector<FoldSummary> folds;
};

/// MEWMA subset through cross-validated calibration.
ModelEvaluation evaluate_subset(const CrossValidation& cv, const std::string& model,
                                const std::vector<std::string>& subset, const ExperimentSettings& settings);
/// Baselines fitted on each fold's training seasons and applied to its
/// held-out seasons.
ModelEvaluation evaluate_week_trigger(const PreparedData& data, const FoldPlan& plan,
                                      const ExperimentSettings& settings);
ModelEvaluation evaluate_rise_trigger(const PreparedData& data, const FoldPlan& plan,
                                      const ExperimentSettings& settings);

struct Comparison {
    std::vector<ModelEvaluation> models;
    std::optional<SelectionRun> selection;  ///< set when the subset was selected here
};

/// Evaluates `settings.models` under `plan`. The optimized model uses
/// `settings.subset` or, when empty, the aggregate of a fresh selection run.
Comparison compare_models(const PreparedData& data, const FoldPlan& plan, const ExperimentSettings& settings);

/// `model,performance,precision,recall,mean_lead,mean_onset_offset,subset`
void write_comparison_csv(const std::filesystem::path& path, const Comparison& comparison);
/// `model,fold,parameters,performance,mean_onset_offset`
void write_fold_csv(const std::filesystem::path& path, const Comparison& comparison);

struct SweepRow {
    std::string axis;
    double value = 0.0;
    bool ok = false;
    std::string message;
    EvaluationReport report;
    std::optional<double> mean_lead;
    std::vector<std::string> selected;
};

/// Axes: `epsilon`, `window` (lead = window / 2), `atfs`, `training_length`
/// (keep the last N seasons) and `gap` (train on `gap_train_seasons` seasons
/// ending `gap` seasons before the final, held-out season). Each point runs
/// selection and evaluates the optimized model; failures are recorded and
/// the sweep moves on.
std::vector<SweepRow> sweep(const AlignedPanel& panel, const ExperimentSettings& settings);

/// `axis,value,status,performance,precision,recall,mean_lead,selected,message`
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace earlywarn
