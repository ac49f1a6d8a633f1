#include "vct/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vct/errors.hpp"

namespace vct {

namespace {

constexpr double kMicro = 1e6;
constexpr std::int64_t kSecondsPerDayInt = 86400;

std::array<double, kThresholdCount> make_grid() {
  std::array<double, kThresholdCount> g{};
  for (std::size_t j = 0; j < kThresholdCount; ++j) g[j] = static_cast<double>(5 + j) / 10.0;
  return g;
}

const std::array<double, kThresholdCount>& grid_storage() {
  static const auto grid = make_grid();
  return grid;
}

std::int64_t to_micro(double v) { return std::llround(v * kMicro); }
double from_micro(std::int64_t v) { return static_cast<double>(v) / kMicro; }

void add_into(std::vector<std::int64_t>& dst, const std::vector<std::int64_t>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_dose(DoseHistogram& h, const HistogramSpec& spec, double value) {
  const double idx = std::floor(value / spec.bin_width);
  std::size_t bin = spec.bins;
  if (idx >= 0.0 && idx < static_cast<double>(spec.bins)) bin = static_cast<std::size_t>(idx);
  if (idx < 0.0) bin = 0;
  ++h.counts[bin];
  h.sum_micro += to_micro(value);
  ++h.samples;
}

void merge_dose(DoseHistogram& a, const DoseHistogram& b) {
  add_into(a.counts, b.counts);
  a.sum_micro += b.sum_micro;
  a.samples += b.samples;
}

WorstCase worst_case_of(std::uint64_t id, const PatientStats& stats) {
  WorstCase w;
  w.patient_id = id;
  w.min_bg = stats.min_bg();
  w.range_ticks = stats.range_ticks();
  w.below_ticks = stats.below_ticks();
  w.mean_bg_micro = to_micro(stats.mean_bg());
  return w;
}

void require_patients(const TrialAccumulator& acc) {
  if (acc.patients() == 0) throw Error("trial accumulator holds no completed patients");
}

double tir_rep(const TrialAccumulator& acc, std::size_t r, std::size_t bin) {
  return static_cast<double>(acc.tir_ticks_[r][bin]) /
         (static_cast<double>(acc.tir_count_[r][bin]) * static_cast<double>(acc.grid_.horizon_ticks));
}

// Representative value of the i-th smallest per-patient fraction.
double order_statistic(const TrialAccumulator& acc, std::size_t r, std::int64_t rank) {
  std::int64_t seen = 0;
  for (std::size_t b = 0; b < kTirBins; ++b) {
    seen += acc.tir_count_[r][b];
    if (rank < seen) return tir_rep(acc, r, b);
  }
  throw Error("rank outside the population");
}

HistogramReport histogram_report(const DoseHistogram& h, const HistogramSpec& spec) {
  HistogramReport out;
  out.bin_width = spec.bin_width;
  out.counts = h.counts;
  out.samples = h.samples;
  out.mean = h.samples > 0 ? from_micro(h.sum_micro) / static_cast<double>(h.samples) : 0.0;
  return out;
}

}  // namespace

GlycemicRange classify_bg(double bg) {
  if (bg < 3.0) return GlycemicRange::severe_hypo;
  if (bg < 3.9) return GlycemicRange::hypo;
  if (bg < 10.0) return GlycemicRange::normo;
  if (bg < 13.9) return GlycemicRange::hyper;
  return GlycemicRange::severe_hyper;
}

std::string_view to_string(GlycemicRange range) noexcept {
  switch (range) {
    case GlycemicRange::severe_hypo: return "severe_hypo";
    case GlycemicRange::hypo: return "hypo";
    case GlycemicRange::normo: return "normo";
    case GlycemicRange::hyper: return "hyper";
    case GlycemicRange::severe_hyper: return "severe_hyper";
  }
  return "?";
}

std::span<const double> threshold_grid() noexcept { return grid_storage(); }

std::size_t threshold_index(double bg) noexcept {
  const auto& g = grid_storage();
  if (!(bg >= g.front())) return 0;
  if (bg >= g.back()) return kThresholdCount;
  return static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), bg) - g.begin());
}

// ---------------------------------------------------------------------------

PatientStats::PatientStats(std::int64_t dt_s, const AnalyticsConfig& config)
    : dt_s_(dt_s), time_grid_s_(config.time_grid_s), bin_ticks_(kThresholdCount + 1, 0) {
  if (dt_s <= 0 || config.time_grid_s <= 0) throw ConfigError("analytics: step and time grid must be positive");
}

void PatientStats::accumulate_sample(std::int64_t t_s, double bg, double basal_u, double bolus_u,
                                     double glucagon_ug) {
  if (ticks_ == 0) {
    min_bg_ = bg;
    max_bg_ = bg;
  } else {
    min_bg_ = std::min(min_bg_, bg);
    max_bg_ = std::max(max_bg_, bg);
  }
  ++ticks_;
  ++range_ticks_[static_cast<std::size_t>(classify_bg(bg))];
  ++bin_ticks_[threshold_index(bg)];
  bg_sum_ += bg;
  if (t_s % time_grid_s_ == 0) grid_bg_.push_back(bg);

  const auto day = static_cast<std::size_t>(t_s / kSecondsPerDayInt);
  if (daily_.size() <= day) daily_.resize(day + 1);
  daily_[day].basal_u += basal_u;
  daily_[day].bolus_u += bolus_u;
  daily_[day].glucagon_ug += glucagon_ug;
}

std::vector<std::int64_t> PatientStats::below_ticks() const {
  std::vector<std::int64_t> out(kThresholdCount, 0);
  if (bin_ticks_.empty()) return out;
  std::int64_t running = 0;
  for (std::size_t j = 0; j < kThresholdCount; ++j) {
    running += bin_ticks_[j];
    out[j] = running;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t GridSpec::time_points() const {
  const std::int64_t horizon = horizon_ticks * dt_s;
  return static_cast<std::size_t>((horizon + analytics.time_grid_s - 1) / analytics.time_grid_s);
}

bool worse_than(const WorstCase& a, const WorstCase& b) noexcept {
  if (a.min_bg != b.min_bg) return a.min_bg < b.min_bg;
  const auto sa = a.range_ticks[0];
  const auto sb = b.range_ticks[0];
  if (sa != sb) return sa > sb;
  return a.patient_id < b.patient_id;
}

TrialAccumulator::TrialAccumulator(const GridSpec& grid) : grid_(grid) {
  if (grid.dt_s <= 0 || grid.horizon_ticks <= 0) throw ConfigError("analytics: grid must have positive step and horizon");
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    tir_count_[r].assign(kTirBins, 0);
    tir_ticks_[r].assign(kTirBins, 0);
  }
  below_sum_.assign(kThresholdCount, 0);
  below_min_.assign(kThresholdCount, std::numeric_limits<std::int64_t>::max());
  below_max_.assign(kThresholdCount, std::numeric_limits<std::int64_t>::min());
  const auto points = grid.time_points();
  grid_sum_micro_.assign(points, 0);
  grid_min_.assign(points, std::numeric_limits<double>::infinity());
  grid_max_.assign(points, -std::numeric_limits<double>::infinity());
  basal_.counts.assign(grid.analytics.basal.bins + 1, 0);
  bolus_.counts.assign(grid.analytics.bolus.bins + 1, 0);
  glucagon_.counts.assign(grid.analytics.glucagon.bins + 1, 0);
}

void TrialAccumulator::add_patient(std::uint64_t patient_id, const PatientStats& stats) {
  if (stats.ticks() != grid_.horizon_ticks || stats.dt_s() != grid_.dt_s) {
    throw GridMismatchError("patient statistics do not cover the accumulator grid");
  }
  ++patients_;
  const auto total = grid_.horizon_ticks;
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    const auto ticks = stats.range_ticks()[r];
    range_ticks_[r] += ticks;
    const auto bin = static_cast<std::size_t>(std::min<std::int64_t>(ticks * kTirBins / total, kTirBins - 1));
    ++tir_count_[r][bin];
    tir_ticks_[r][bin] += ticks;
  }
  const auto below = stats.below_ticks();
  for (std::size_t j = 0; j < kThresholdCount; ++j) {
    below_sum_[j] += below[j];
    below_min_[j] = std::min(below_min_[j], below[j]);
    below_max_[j] = std::max(below_max_[j], below[j]);
  }
  mean_bg_sum_micro_ += to_micro(stats.mean_bg());
  min_bg_ = min_bg_ ? std::min(*min_bg_, stats.min_bg()) : stats.min_bg();
  max_bg_ = max_bg_ ? std::max(*max_bg_, stats.max_bg()) : stats.max_bg();

  const auto& g = stats.grid_bg();
  for (std::size_t i = 0; i < grid_sum_micro_.size() && i < g.size(); ++i) {
    grid_sum_micro_[i] += to_micro(g[i]);
    grid_min_[i] = std::min(grid_min_[i], g[i]);
    grid_max_[i] = std::max(grid_max_[i], g[i]);
  }

  const auto& cfg = grid_.analytics;
  if (cfg.dose_aggregation == DoseAggregation::patient_day) {
    for (const auto& d : stats.daily()) {
      add_dose(basal_, cfg.basal, d.basal_u);
      add_dose(bolus_, cfg.bolus, d.bolus_u);
      add_dose(glucagon_, cfg.glucagon, d.glucagon_ug);
    }
  } else {
    DailyDose sum;
    for (const auto& d : stats.daily()) {
      sum.basal_u += d.basal_u;
      sum.bolus_u += d.bolus_u;
      sum.glucagon_ug += d.glucagon_ug;
    }
    const double days = static_cast<double>(total * grid_.dt_s) / static_cast<double>(kSecondsPerDayInt);
    add_dose(basal_, cfg.basal, sum.basal_u / days);
    add_dose(bolus_, cfg.bolus, sum.bolus_u / days);
    add_dose(glucagon_, cfg.glucagon, sum.glucagon_ug / days);
  }
  safety_violations_ += stats.safety_violations();

  auto candidate = worst_case_of(patient_id, stats);
  if (!worst_ || worse_than(candidate, *worst_)) worst_ = std::move(candidate);
}

void TrialAccumulator::add_aborted(std::uint64_t patient_id) {
  aborted_.insert(std::upper_bound(aborted_.begin(), aborted_.end(), patient_id), patient_id);
}

void TrialAccumulator::merge(const TrialAccumulator& o) {
  if (!(grid_ == o.grid_)) throw GridMismatchError("cannot merge accumulators built on different grids");
  patients_ += o.patients_;
  std::vector<std::uint64_t> ids;
  ids.reserve(aborted_.size() + o.aborted_.size());
  std::merge(aborted_.begin(), aborted_.end(), o.aborted_.begin(), o.aborted_.end(), std::back_inserter(ids));
  aborted_ = std::move(ids);
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    range_ticks_[r] += o.range_ticks_[r];
    add_into(tir_count_[r], o.tir_count_[r]);
    add_into(tir_ticks_[r], o.tir_ticks_[r]);
  }
  add_into(below_sum_, o.below_sum_);
  for (std::size_t j = 0; j < below_min_.size(); ++j) {
    below_min_[j] = std::min(below_min_[j], o.below_min_[j]);
    below_max_[j] = std::max(below_max_[j], o.below_max_[j]);
  }
  mean_bg_sum_micro_ += o.mean_bg_sum_micro_;
  if (o.min_bg_) min_bg_ = min_bg_ ? std::min(*min_bg_, *o.min_bg_) : *o.min_bg_;
  if (o.max_bg_) max_bg_ = max_bg_ ? std::max(*max_bg_, *o.max_bg_) : *o.max_bg_;
  add_into(grid_sum_micro_, o.grid_sum_micro_);
  for (std::size_t i = 0; i < grid_min_.size(); ++i) {
    grid_min_[i] = std::min(grid_min_[i], o.grid_min_[i]);
    grid_max_[i] = std::max(grid_max_[i], o.grid_max_[i]);
  }
  merge_dose(basal_, o.basal_);
  merge_dose(bolus_, o.bolus_);
  merge_dose(glucagon_, o.glucagon_);
  safety_violations_ += o.safety_violations_;
  if (o.worst_ && (!worst_ || worse_than(*o.worst_, *worst_))) worst_ = o.worst_;
}

TrialAccumulator merge(TrialAccumulator a, const TrialAccumulator& b) {
  a.merge(b);
  return a;
}

// ---------------------------------------------------------------------------

double binned_quantile(const TrialAccumulator& acc, GlycemicRange range, double q) {
  require_patients(acc);
  const auto r = static_cast<std::size_t>(range);
  const auto n = static_cast<std::int64_t>(acc.patients());
  const double h = static_cast<double>(n - 1) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::int64_t>(std::floor(h));
  const double vlo = order_statistic(acc, r, lo);
  if (lo + 1 >= n) return vlo;
  const double vhi = order_statistic(acc, r, lo + 1);
  return vlo + (h - static_cast<double>(lo)) * (vhi - vlo);
}

TirReport tir_report(const TrialAccumulator& acc) {
  require_patients(acc);
  TirReport out;
  out.patients = acc.patients();
  const double denom = static_cast<double>(acc.patients()) * static_cast<double>(acc.grid_.horizon_ticks);
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    out.mean[r] = static_cast<double>(acc.range_ticks_[r]) / denom;
    const auto range = static_cast<GlycemicRange>(r);
    BoxStats& box = out.box[r];
    box.q1 = binned_quantile(acc, range, 0.25);
    box.median = binned_quantile(acc, range, 0.5);
    box.q3 = binned_quantile(acc, range, 0.75);
    const double iqr = box.q3 - box.q1;
    const double lo_fence = box.q1 - 1.5 * iqr;
    const double hi_fence = box.q3 + 1.5 * iqr;
    box.whisker_low = box.q1;
    box.whisker_high = box.q3;
    bool have_low = false;
    for (std::size_t b = 0; b < kTirBins; ++b) {
      if (acc.tir_count_[r][b] == 0) continue;
      const double v = tir_rep(acc, r, b);
      if (v < lo_fence || v > hi_fence) {
        box.outliers.emplace_back(v, acc.tir_count_[r][b]);
        continue;
      }
      if (!have_low) {
        box.whisker_low = std::min(v, box.q1);
        have_low = true;
      }
      box.whisker_high = std::max(v, box.q3);
    }
  }
  if (acc.worst_) {
    std::array<double, kRangeCount> w{};
    for (std::size_t r = 0; r < kRangeCount; ++r) {
      w[r] = static_cast<double>(acc.worst_->range_ticks[r]) / static_cast<double>(acc.grid_.horizon_ticks);
    }
    out.worst = w;
  }
  return out;
}

CdfReport bg_cdf_report(const TrialAccumulator& acc) {
  require_patients(acc);
  CdfReport out;
  const auto grid = threshold_grid();
  out.thresholds.assign(grid.begin(), grid.end());
  const double total = static_cast<double>(acc.grid_.horizon_ticks);
  const double n = static_cast<double>(acc.patients());
  for (std::size_t j = 0; j < kThresholdCount; ++j) {
    out.mean.push_back(static_cast<double>(acc.below_sum_[j]) / (n * total));
    out.min.push_back(static_cast<double>(acc.below_min_[j]) / total);
    out.max.push_back(static_cast<double>(acc.below_max_[j]) / total);
    if (acc.worst_) out.worst.push_back(static_cast<double>(acc.worst_->below_ticks[j]) / total);
  }
  return out;
}

DoseReport dose_report(const TrialAccumulator& acc) {
  require_patients(acc);
  const auto& cfg = acc.grid_.analytics;
  return {histogram_report(acc.basal_, cfg.basal), histogram_report(acc.bolus_, cfg.bolus),
          histogram_report(acc.glucagon_, cfg.glucagon)};
}

TimeSeriesReport time_series_report(const TrialAccumulator& acc) {
  require_patients(acc);
  TimeSeriesReport out;
  out.period_s = acc.grid_.analytics.time_grid_s;
  const double n = static_cast<double>(acc.patients());
  for (std::size_t i = 0; i < acc.grid_sum_micro_.size(); ++i) {
    out.mean.push_back(from_micro(acc.grid_sum_micro_[i]) / n);
    out.min.push_back(acc.grid_min_[i]);
    out.max.push_back(acc.grid_max_[i]);
  }
  return out;
}

double mean_bg(const TrialAccumulator& acc) {
  require_patients(acc);
  return from_micro(acc.mean_bg_sum_micro_) / static_cast<double>(acc.patients());
}

TrialReport make_report(const TrialMetadata& metadata, const TrialAccumulator& acc) {
  TrialReport r;
  r.metadata = metadata;
  r.accumulator = acc;
  r.tir = tir_report(acc);
  r.cdf = bg_cdf_report(acc);
  r.doses = dose_report(acc);
  r.time_series = time_series_report(acc);
  r.mean_bg = mean_bg(acc);
  return r;
}

ComparisonReport compare_trials(const TrialReport& a, const TrialReport& b) {
  if (!(a.accumulator.grid() == b.accumulator.grid())) {
    throw GridMismatchError("trials were summarized on different time or threshold grids");
  }
  ComparisonReport out;
  out.cdf_a = a.cdf;
  out.cdf_b = b.cdf;
  out.tir_a = a.tir;
  out.tir_b = b.tir;
  out.doses_a = a.doses;
  out.doses_b = b.doses;
  for (std::size_t r = 0; r < kRangeCount; ++r) out.deltas.mean_tir[r] = b.tir.mean[r] - a.tir.mean[r];
  out.deltas.mean_bg = b.mean_bg - a.mean_bg;
  out.deltas.mean_daily_basal_u = b.doses.basal.mean - a.doses.basal.mean;
  out.deltas.mean_daily_bolus_u = b.doses.bolus.mean - a.doses.bolus.mean;
  out.deltas.mean_daily_glucagon_ug = b.doses.glucagon.mean - a.doses.glucagon.mean;
  if (a.accumulator.worst_ && b.accumulator.worst_) {
    out.deltas.worst_min_bg = b.accumulator.worst_->min_bg - a.accumulator.worst_->min_bg;
  }
  return out;
}

}  // namespace vct
