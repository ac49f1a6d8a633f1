#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vct {

enum class GlycemicRange { severe_hypo, hypo, normo, hyper, severe_hyper };
inline constexpr std::size_t kRangeCount = 5;

/// Half-open partition: <3, [3, 3.9), [3.9, 10), [10, 13.9), >=13.9 mmol/L.
GlycemicRange classify_bg(double bg);
std::string_view to_string(GlycemicRange range) noexcept;

/// Time-below-threshold grid: 0.5 to 25.0 mmol/L in 0.1 mmol/L steps.
inline constexpr std::size_t kThresholdCount = 246;
std::span<const double> threshold_grid() noexcept;
/// Number of grid thresholds <= bg, i.e. bg counts towards thresholds [index, kThresholdCount).
std::size_t threshold_index(double bg) noexcept;

/// Per-patient TIR fractions are binned at 0.5 % resolution.
inline constexpr std::size_t kTirBins = 200;

enum class DoseAggregation { patient_day, patient_mean };

struct HistogramSpec {
  double bin_width = 1.0;
  std::size_t bins = 100;  // plus one overflow bin

  bool operator==(const HistogramSpec&) const = default;
};

struct AnalyticsConfig {
  HistogramSpec basal{1.0, 100};      // U/day
  HistogramSpec bolus{2.0, 100};      // U/day
  HistogramSpec glucagon{20.0, 100};  // ug/day
  DoseAggregation dose_aggregation = DoseAggregation::patient_day;
  std::int64_t time_grid_s = 3600;

  bool operator==(const AnalyticsConfig&) const = default;
};

struct DailyDose {
  double basal_u = 0.0;
  double bolus_u = 0.0;
  double glucagon_ug = 0.0;

  bool operator==(const DailyDose&) const = default;
};

/// Streaming per-patient statistics, updated once per integration step.
/// Occupancy is kept as integer tick counts so range times sum to the
/// horizon exactly.
class PatientStats {
 public:
  PatientStats() = default;
  PatientStats(std::int64_t dt_s, const AnalyticsConfig& config);

  /// Sample at time t_s (start of a dt interval) with the doses delivered during it.
  void accumulate_sample(std::int64_t t_s, double bg, double basal_u, double bolus_u, double glucagon_ug);

  std::int64_t dt_s() const noexcept { return dt_s_; }
  std::int64_t ticks() const noexcept { return ticks_; }
  const std::array<std::int64_t, kRangeCount>& range_ticks() const noexcept { return range_ticks_; }
  /// Ticks below each grid threshold (nondecreasing in threshold).
  std::vector<std::int64_t> below_ticks() const;
  double min_bg() const noexcept { return min_bg_; }
  double max_bg() const noexcept { return max_bg_; }
  double mean_bg() const noexcept { return ticks_ > 0 ? bg_sum_ / static_cast<double>(ticks_) : 0.0; }
  const std::vector<double>& grid_bg() const noexcept { return grid_bg_; }
  const std::vector<DailyDose>& daily() const noexcept { return daily_; }
  std::int64_t safety_violations() const noexcept { return safety_violations_; }
  void add_safety_violations(std::int64_t n) noexcept { safety_violations_ += n; }

  bool operator==(const PatientStats&) const = default;

 private:
  std::int64_t dt_s_ = 0;
  std::int64_t time_grid_s_ = 3600;
  std::int64_t ticks_ = 0;
  std::array<std::int64_t, kRangeCount> range_ticks_{};
  std::vector<std::int64_t> bin_ticks_;  // kThresholdCount + 1 bins between grid thresholds
  double min_bg_ = 0.0;
  double max_bg_ = 0.0;
  double bg_sum_ = 0.0;
  std::vector<double> grid_bg_;
  std::vector<DailyDose> daily_;
  std::int64_t safety_violations_ = 0;
};

/// Everything two accumulators must share to be mergeable.
struct GridSpec {
  std::int64_t dt_s = 30;
  std::int64_t horizon_ticks = 0;
  AnalyticsConfig analytics;

  std::size_t time_points() const;
  bool operator==(const GridSpec&) const = default;
};

struct DoseHistogram {
  std::vector<std::int64_t> counts;  // bins + overflow
  std::int64_t sum_micro = 0;        // sum of aggregated values, 1e-6 units
  std::int64_t samples = 0;

  bool operator==(const DoseHistogram&) const = default;
};

/// Full record of the patient that reached the lowest glucose.
struct WorstCase {
  std::uint64_t patient_id = 0;
  double min_bg = 0.0;
  std::array<std::int64_t, kRangeCount> range_ticks{};
  std::vector<std::int64_t> below_ticks;
  std::int64_t mean_bg_micro = 0;

  bool operator==(const WorstCase&) const = default;
};

/// True when `a` is worse than `b`: lower minimum glucose, then more time
/// below 3 mmol/L, then lower patient id.
bool worse_than(const WorstCase& a, const WorstCase& b) noexcept;

/// Mergeable population statistics. All sums are integers (tick counts or
/// fixed-point values), so merge is exactly associative and commutative and
/// an accumulator with no patients is its identity.
class TrialAccumulator {
 public:
  TrialAccumulator() = default;
  explicit TrialAccumulator(const GridSpec& grid);

  void add_patient(std::uint64_t patient_id, const PatientStats& stats);
  void add_aborted(std::uint64_t patient_id);
  /// Throws GridMismatchError unless both share a GridSpec.
  void merge(const TrialAccumulator& other);

  const GridSpec& grid() const noexcept { return grid_; }
  std::uint64_t patients() const noexcept { return patients_; }
  const std::vector<std::uint64_t>& aborted() const noexcept { return aborted_; }

  bool operator==(const TrialAccumulator&) const = default;

  // Raw fields are public for reporting and serialization.
  GridSpec grid_;
  std::uint64_t patients_ = 0;
  std::vector<std::uint64_t> aborted_;  // sorted
  std::array<std::int64_t, kRangeCount> range_ticks_{};
  std::array<std::vector<std::int64_t>, kRangeCount> tir_count_;  // kTirBins each
  std::array<std::vector<std::int64_t>, kRangeCount> tir_ticks_;  // range ticks summed per bin
  std::vector<std::int64_t> below_sum_;
  std::vector<std::int64_t> below_min_;
  std::vector<std::int64_t> below_max_;
  std::int64_t mean_bg_sum_micro_ = 0;
  std::optional<double> min_bg_;
  std::optional<double> max_bg_;
  std::vector<std::int64_t> grid_sum_micro_;
  std::vector<double> grid_min_;
  std::vector<double> grid_max_;
  DoseHistogram basal_;
  DoseHistogram bolus_;
  DoseHistogram glucagon_;
  std::int64_t safety_violations_ = 0;
  std::optional<WorstCase> worst_;
};

TrialAccumulator merge(TrialAccumulator a, const TrialAccumulator& b);

// ---------------------------------------------------------------------------
// Reports

struct BoxStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<std::pair<double, std::int64_t>> outliers;  // (fraction, patients)

  bool operator==(const BoxStats&) const = default;
};

struct TirReport {
  std::uint64_t patients = 0;
  std::array<double, kRangeCount> mean{};
  std::array<BoxStats, kRangeCount> box{};
  std::optional<std::array<double, kRangeCount>> worst;

  bool operator==(const TirReport&) const = default;
};

struct CdfReport {
  std::vector<double> thresholds;
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;
  std::vector<double> worst;

  bool operator==(const CdfReport&) const = default;
};

struct HistogramReport {
  double bin_width = 0.0;
  std::vector<std::int64_t> counts;  // last entry is the overflow bin
  std::int64_t samples = 0;
  double mean = 0.0;

  bool operator==(const HistogramReport&) const = default;
};

struct DoseReport {
  HistogramReport basal;
  HistogramReport bolus;
  HistogramReport glucagon;

  bool operator==(const DoseReport&) const = default;
};

struct TimeSeriesReport {
  std::int64_t period_s = 0;
  std::vector<double> mean;
  std::vector<double> min;
  std::vector<double> max;

  bool operator==(const TimeSeriesReport&) const = default;
};

/// Throws Error on an accumulator without patients.
TirReport tir_report(const TrialAccumulator& acc);
CdfReport bg_cdf_report(const TrialAccumulator& acc);
DoseReport dose_report(const TrialAccumulator& acc);
TimeSeriesReport time_series_report(const TrialAccumulator& acc);
double mean_bg(const TrialAccumulator& acc);

/// Quantile (linear interpolation between order statistics) of binned per-patient TIR fractions.
double binned_quantile(const TrialAccumulator& acc, GlycemicRange range, double q);

/// Identifies the run a report belongs to; part of the report bytes.
struct TrialMetadata {
  std::string trial_id;
  std::uint64_t seed = 0;
  std::string model_id;
  std::string controller_id;
  std::string profile_hash;
  std::int64_t controller_period_s = 0;

  bool operator==(const TrialMetadata&) const = default;
};

struct TrialReport {
  TrialMetadata metadata;
  TrialAccumulator accumulator;
  TirReport tir;
  CdfReport cdf;
  DoseReport doses;
  TimeSeriesReport time_series;
  double mean_bg = 0.0;

  bool operator==(const TrialReport&) const = default;
};

TrialReport make_report(const TrialMetadata& metadata, const TrialAccumulator& acc);

struct ComparisonDeltas {
  std::array<double, kRangeCount> mean_tir{};
  double mean_bg = 0.0;
  double mean_daily_basal_u = 0.0;
  double mean_daily_bolus_u = 0.0;
  double mean_daily_glucagon_ug = 0.0;
  double worst_min_bg = 0.0;

  bool operator==(const ComparisonDeltas&) const = default;
};

/// Overlaid CDFs, side-by-side TIR data and overlaid dose histograms; deltas are b - a.
struct ComparisonReport {
  CdfReport cdf_a;
  CdfReport cdf_b;
  TirReport tir_a;
  TirReport tir_b;
  DoseReport doses_a;
  DoseReport doses_b;
  ComparisonDeltas deltas;

  bool operator==(const ComparisonReport&) const = default;
};

/// Throws GridMismatchError when the reports were built on different grids.
ComparisonReport compare_trials(const TrialReport& a, const TrialReport& b);

}  // namespace vct
