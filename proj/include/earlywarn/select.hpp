#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "earlywarn/calibrate.hpp"
#include "earlywarn/evaluate.hpp"
#include "earlywarn/events.hpp"
#include "earlywarn/mewma.hpp"

namespace earlywarn {

/// Training and held-out weeks of one cross-validation fold.
struct Fold {
    WeekMask train;
    WeekMask test;
    std::vector<int> train_events;
    std::vector<int> test_events;
};

/// Season-wise split of the axis. Each event owns one season: a contiguous
/// block running from midway through the quiet stretch before its detection
/// window up to the next season. Every season is held out in exactly one
/// fold; training weeks exclude all held-out seasons.
struct FoldPlan {
    std::vector<std::pair<int, int>> seasons;  ///< [begin, end) week ranges
    std::vector<int> fold_of_season;            ///< -1 when a season is in no test fold
    int held_out = 1;
    std::vector<Fold> folds;

    int fold_count() const { return static_cast<int>(folds.size()); }
    /// Weeks where a fold's train/test/unused membership changes.
    std::vector<int> boundaries(int fold) const;
};

std::vector<std::pair<int, int>> season_bounds(const EventSet& events, const DetectionWindowSet& windows, int weeks);

/// Contiguous folds of `held_out` seasons each; the last fold takes any
/// remainder. Throws ValidationError when held_out >= number of events.
FoldPlan make_folds(const EventSet& events, const DetectionWindowSet& windows, int held_out, int weeks);

/// One explicit train/test split over seasons (seasons in neither list are
/// left out entirely).
FoldPlan make_split(const EventSet& events, const DetectionWindowSet& windows, int weeks,
                    const std::vector<int>& train_seasons, const std::vector<int>& test_seasons);

enum class FoldPreset { select_6fold, compare_3fold };
int held_out_seasons(FoldPreset preset);

struct CvOptions {
    CalibrationOptions calibration{};
    /// Restart the smoothed state where a fold's train/test membership
    /// changes, so held-out weeks never feed training statistics.
    bool reset_at_fold_boundaries = true;
    Execution execution = Execution::parallel;
};

struct FoldOutcome {
    int fold = 0;
    CurvePoint chosen;
    std::vector<CurvePoint> curve;
    bool ridge_applied = false;
    AlarmTrace test_trace;  ///< alarms restricted to held-out weeks
    EvaluationReport report;
};

struct SubsetScore {
    double score = 0.0;  ///< mean held-out timeliness across folds
    std::vector<FoldOutcome> folds;
};

/// Cross-validation context shared by every subset evaluation: per-fold null
/// moments over all series and the precomputed smoothed-state tables.
class CrossValidation {
public:
    CrossValidation(AlignedPanel panel, EventSet events, DetectionWindowSet windows, FoldPlan plan,
                    CvOptions options);

    SubsetScore score_subset(const std::vector<std::string>& subset, std::uint64_t seed) const;
    FoldOutcome run_fold(const std::vector<std::string>& subset, int fold, std::uint64_t seed) const;

    const AlignedPanel& panel() const { return panel_; }
    const EventSet& events() const { return events_; }
    const DetectionWindowSet& windows() const { return windows_; }
    const FoldPlan& plan() const { return plan_; }
    const CvOptions& options() const { return options_; }
    /// Candidates followed by the gold series when it is not itself a candidate.
    const std::vector<std::string>& universe() const { return universe_; }

    /// Baseline weeks that fed fold `fold`'s null estimate.
    const WeekMask& null_mask(int fold) const { return null_masks_.at(fold); }
    /// Weeks whose alarms were scored when choosing (lambda, h).
    const WeekMask& calibration_mask(int fold) const { return plan_.folds.at(fold).train; }
    /// Unconditioned moments over the whole universe for one fold.
    const NullModel& fold_moments(int fold) const { return moments_.at(fold); }
    const SharedStateTable& table(int fold) const { return tables_.at(fold); }
    ThresholdCache& cache() const { return *cache_; }

private:
    std::vector<int> columns_of(const std::vector<std::string>& subset) const;

    AlignedPanel panel_;
    EventSet events_;
    DetectionWindowSet windows_;
    FoldPlan plan_;
    CvOptions options_;
    std::vector<std::string> universe_;
    std::vector<WeekMask> null_masks_;
    std::vector<NullModel> moments_;
    std::vector<SharedStateTable> tables_;
    std::unique_ptr<ThresholdCache> cache_;
};

struct SelectionStep {
    std::string chosen;
    double score = 0.0;
    /// Score of every candidate tried at this step, in candidate order.
    std::vector<std::pair<std::string, double>> tried;
};

enum class StopReason { reached_k, leveled_off, exhausted };
const char* to_string(StopReason reason);

struct SelectionTrace {
    std::vector<SelectionStep> steps;
    StopReason stop = StopReason::reached_k;
    std::vector<std::string> selected() const;
};

struct SelectionOptions {
    int k_max = 8;
    /// A step must improve the score by more than this to be kept.
    double min_improvement = 0.0;
};

/// Greedy forward selection: start empty, add the candidate whose union with
/// the current set scores best, stop at k_max or when the best improvement is
/// not above `min_improvement`. The first step is always taken. Ties go to
/// the earlier candidate.
SelectionTrace forward_select(const CrossValidation& cv, const std::vector<std::string>& candidates,
                              const SelectionOptions& options, std::uint64_t seed);

struct PredictorRank {
    std::string name;
    double median_rank = 0.0;
    int frequency = 0;
};

/// Predictors ranked by median selection position across replicates
/// (k_max + 1 where absent); ties by frequency, then name.
struct ReplicateAggregate {
    int replicates = 0;
    int k_max = 0;
    std::vector<PredictorRank> ranking;
    /// Predictors whose median rank is within k_max, in ranking order.
    std::vector<std::string> final_selection;
};

ReplicateAggregate aggregate_replicates(const std::vector<SelectionTrace>& traces, int k_max);

/// `replicate,step,chosen,score`
void write_selection_csv(const std::filesystem::path& path, const std::vector<SelectionTrace>& traces);
/// `predictor,median_rank,frequency`
void write_aggregate_csv(const std::filesystem::path& path, const ReplicateAggregate& aggregate);

/// Single-replicate checkpoint (header line, then one `step,chosen,score` row
/// per step and a trailing `stop,<reason>` row).
void write_trace_checkpoint(const std::filesystem::path& path, const std::string& fingerprint,
                            const SelectionTrace& trace);
/// Returns nothing when the file is missing or was written under another
/// fingerprint.
std::optional<SelectionTrace> read_trace_checkpoint(const std::filesystem::path& path,
                                                    const std::string& fingerprint);

}  // namespace earlywarn
