#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "vct/analytics.hpp"
#include "vct/simulation.hpp"

namespace vct {

// Plot-ready CSV files. Numbers use the shortest round-trip form.

/// Writes cdf.csv, tir_bars.csv, tir_box.csv, doses.csv and time_series.csv into `dir`.
void write_report_exports(const TrialReport& report, const std::filesystem::path& dir);

/// Writes cdf_overlay.csv, tir_side_by_side.csv and doses_overlay.csv into `dir`.
void write_comparison_exports(const ComparisonReport& comparison, const std::filesystem::path& dir);

struct TraceWindow {
  double from_s = 0.0;
  std::optional<double> to_s;  // end of the trace when empty
};

/// Rows of `trace` with from_s <= t < to_s. Throws ConfigError when the
/// window is empty or reaches outside the trace.
Trace slice_trace(const Trace& trace, const TraceWindow& window);

/// Eight columns: t_s, bg, cgm, cho_g_per_min, hrr, basal_u_per_h, insulin_bolus_u, glucagon_bolus_ug.
std::string trace_csv(const Trace& trace);

std::string format_number(double v);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace vct
