#pragma once

// Hand-rolled random generators for property tests.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "vct/analytics.hpp"

namespace gen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  /// Glucose value; sometimes exactly on a range boundary or grid threshold.
  double bg() {
    static constexpr double kEdges[] = {3.0, 3.9, 10.0, 13.9, 0.5, 25.0, 4.5, 7.0};
    switch (integer(0, 9)) {
      case 0: return kEdges[integer(0, 7)];
      case 1: return static_cast<double>(integer(5, 250)) / 10.0;
      case 2: return uniform(1.0, 3.5);
      default: return uniform(0.8, 26.0);
    }
  }

  double dose(double scale) { return coin(0.3) ? 0.0 : uniform(0.0, scale); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

/// A random but small analytics grid so accumulators are cheap to build.
inline vct::GridSpec small_grid(Gen& g) {
  vct::GridSpec grid;
  grid.dt_s = 30 * g.integer(1, 4);
  grid.horizon_ticks = g.integer(4, 40) * (86400 / grid.dt_s) / 24;
  grid.analytics.time_grid_s = grid.dt_s * g.integer(1, 10);
  grid.analytics.basal = {0.5, 20};
  grid.analytics.bolus = {1.0, 20};
  grid.analytics.glucagon = {10.0, 20};
  if (g.coin(0.3)) grid.analytics.dose_aggregation = vct::DoseAggregation::patient_mean;
  return grid;
}

inline vct::PatientStats random_patient(Gen& g, const vct::GridSpec& grid) {
  vct::PatientStats stats(grid.dt_s, grid.analytics);
  double bg = g.bg();
  for (std::int64_t k = 0; k < grid.horizon_ticks; ++k) {
    // Random walk with occasional jumps so min/max and ranges vary.
    bg = g.coin(0.1) ? g.bg() : std::max(0.6, bg + g.uniform(-0.4, 0.4));
    stats.accumulate_sample(k * grid.dt_s, bg, g.dose(0.02), g.coin(0.05) ? g.uniform(0.0, 8.0) : 0.0,
                            g.coin(0.03) ? g.uniform(0.0, 100.0) : 0.0);
  }
  if (g.coin(0.1)) stats.add_safety_violations(g.integer(1, 3));
  return stats;
}

/// Accumulator over 0..max_patients random patients (ids drawn from a
/// shared pool so ties on the worst case are exercised) plus some aborts.
inline vct::TrialAccumulator random_accumulator(Gen& g, const vct::GridSpec& grid, int max_patients,
                                                const std::vector<vct::PatientStats>& pool) {
  vct::TrialAccumulator acc(grid);
  const auto n = g.integer(0, max_patients);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto id = static_cast<std::uint64_t>(g.integer(0, 1'000'000));
    if (!pool.empty() && g.coin(0.3)) {
      acc.add_patient(id, pool[static_cast<std::size_t>(g.integer(0, static_cast<std::int64_t>(pool.size()) - 1))]);
    } else {
      acc.add_patient(id, random_patient(g, grid));
    }
  }
  if (g.coin(0.2)) acc.add_aborted(static_cast<std::uint64_t>(g.integer(0, 1'000'000)));
  return acc;
}

}  // namespace gen
