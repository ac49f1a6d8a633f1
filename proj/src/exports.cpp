#include "vct/exports.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vct/errors.hpp"

namespace vct {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("short write to " + path.string());
}

namespace {

std::string range_name(std::size_t r) { return std::string(to_string(static_cast<GlycemicRange>(r))); }

std::string optional_number(const std::vector<double>& v, std::size_t i) { return i < v.size() ? format_number(v[i]) : ""; }

void histogram_rows(std::ostringstream& out, const char* dose, const std::string& trial, const HistogramReport& h) {
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const bool overflow = i + 1 == h.counts.size();
    out << dose << ',';
    if (!trial.empty()) out << trial << ',';
    out << format_number(h.bin_width * static_cast<double>(i)) << ','
        << (overflow ? std::string("inf") : format_number(h.bin_width * static_cast<double>(i + 1))) << ','
        << h.counts[i] << '\n';
  }
}

}  // namespace

void write_report_exports(const TrialReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream out;
    out << "threshold_mmol_l,mean,min,max,worst\n";
    const auto& c = report.cdf;
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
      out << format_number(c.thresholds[i]) << ',' << format_number(c.mean[i]) << ',' << format_number(c.min[i]) << ','
          << format_number(c.max[i]) << ',' << optional_number(c.worst, i) << '\n';
    }
    write_text_file(dir / "cdf.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "range,mean,worst\n";
    for (std::size_t r = 0; r < kRangeCount; ++r) {
      out << range_name(r) << ',' << format_number(report.tir.mean[r]) << ','
          << (report.tir.worst ? format_number((*report.tir.worst)[r]) : "") << '\n';
    }
    write_text_file(dir / "tir_bars.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "range,q1,median,q3,whisker_low,whisker_high,outliers\n";
    for (std::size_t r = 0; r < kRangeCount; ++r) {
      const auto& b = report.tir.box[r];
      out << range_name(r) << ',' << format_number(b.q1) << ',' << format_number(b.median) << ',' << format_number(b.q3)
          << ',' << format_number(b.whisker_low) << ',' << format_number(b.whisker_high) << ',';
      for (std::size_t i = 0; i < b.outliers.size(); ++i) {
        out << (i ? ";" : "") << format_number(b.outliers[i].first) << ':' << b.outliers[i].second;
      }
      out << '\n';
    }
    write_text_file(dir / "tir_box.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "dose,bin_lower,bin_upper,count\n";
    histogram_rows(out, "basal_u_per_day", "", report.doses.basal);
    histogram_rows(out, "bolus_u_per_day", "", report.doses.bolus);
    histogram_rows(out, "glucagon_ug_per_day", "", report.doses.glucagon);
    write_text_file(dir / "doses.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "t_s,mean,min,max\n";
    const auto& ts = report.time_series;
    for (std::size_t i = 0; i < ts.mean.size(); ++i) {
      out << static_cast<std::int64_t>(i) * ts.period_s << ',' << format_number(ts.mean[i]) << ','
          << format_number(ts.min[i]) << ',' << format_number(ts.max[i]) << '\n';
    }
    write_text_file(dir / "time_series.csv", out.str());
  }
}

void write_comparison_exports(const ComparisonReport& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream out;
    out << "threshold_mmol_l,mean_a,min_a,max_a,worst_a,mean_b,min_b,max_b,worst_b\n";
    for (std::size_t i = 0; i < c.cdf_a.thresholds.size(); ++i) {
      out << format_number(c.cdf_a.thresholds[i]) << ',' << format_number(c.cdf_a.mean[i]) << ','
          << format_number(c.cdf_a.min[i]) << ',' << format_number(c.cdf_a.max[i]) << ','
          << optional_number(c.cdf_a.worst, i) << ',' << format_number(c.cdf_b.mean[i]) << ','
          << format_number(c.cdf_b.min[i]) << ',' << format_number(c.cdf_b.max[i]) << ','
          << optional_number(c.cdf_b.worst, i) << '\n';
    }
    write_text_file(dir / "cdf_overlay.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "range,trial,mean,worst,q1,median,q3,whisker_low,whisker_high\n";
    for (std::size_t r = 0; r < kRangeCount; ++r) {
      for (const auto& [name, t] : {std::pair<const char*, const TirReport*>{"a", &c.tir_a}, {"b", &c.tir_b}}) {
        const auto& b = t->box[r];
        out << range_name(r) << ',' << name << ',' << format_number(t->mean[r]) << ','
            << (t->worst ? format_number((*t->worst)[r]) : "") << ',' << format_number(b.q1) << ','
            << format_number(b.median) << ',' << format_number(b.q3) << ',' << format_number(b.whisker_low) << ','
            << format_number(b.whisker_high) << '\n';
      }
    }
    write_text_file(dir / "tir_side_by_side.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "dose,trial,bin_lower,bin_upper,count\n";
    histogram_rows(out, "basal_u_per_day", "a", c.doses_a.basal);
    histogram_rows(out, "basal_u_per_day", "b", c.doses_b.basal);
    histogram_rows(out, "bolus_u_per_day", "a", c.doses_a.bolus);
    histogram_rows(out, "bolus_u_per_day", "b", c.doses_b.bolus);
    histogram_rows(out, "glucagon_ug_per_day", "a", c.doses_a.glucagon);
    histogram_rows(out, "glucagon_ug_per_day", "b", c.doses_b.glucagon);
    write_text_file(dir / "doses_overlay.csv", out.str());
  }
}

Trace slice_trace(const Trace& trace, const TraceWindow& window) {
  if (trace.rows() == 0) throw ConfigError("trace is empty");
  const double dt = trace.rows() > 1 ? trace.t_s[1] - trace.t_s[0] : 0.0;
  const double end = trace.t_s.back() + dt;
  const double to = window.to_s.value_or(end);
  if (!(window.from_s >= trace.t_s.front()) || !(to <= end) || !(to > window.from_s)) {
    throw ConfigError("trace window [" + format_number(window.from_s) + ", " + format_number(to) +
                      ") lies outside the trace [" + format_number(trace.t_s.front()) + ", " + format_number(end) + ")");
  }
  Trace out;
  out.state_dimension = trace.state_dimension;
  for (std::size_t i = 0; i < trace.rows(); ++i) {
    if (trace.t_s[i] < window.from_s || trace.t_s[i] >= to) continue;
    out.t_s.push_back(trace.t_s[i]);
    out.bg.push_back(trace.bg[i]);
    out.cgm.push_back(trace.cgm[i]);
    out.cho_g_per_min.push_back(trace.cho_g_per_min[i]);
    out.hrr.push_back(trace.hrr[i]);
    out.basal_u_per_h.push_back(trace.basal_u_per_h[i]);
    out.insulin_bolus_u.push_back(trace.insulin_bolus_u[i]);
    out.glucagon_bolus_ug.push_back(trace.glucagon_bolus_ug[i]);
    if (trace.state_dimension > 0 && !trace.states.empty()) {
      const auto* row = trace.states.data() + i * trace.state_dimension;
      out.states.insert(out.states.end(), row, row + trace.state_dimension);
    }
  }
  return out;
}

std::string trace_csv(const Trace& trace) {
  std::ostringstream out;
  out << "t_s,bg,cgm,cho_g_per_min,hrr,basal_u_per_h,insulin_bolus_u,glucagon_bolus_ug\n";
  for (std::size_t i = 0; i < trace.rows(); ++i) {
    out << format_number(trace.t_s[i]) << ',' << format_number(trace.bg[i]) << ',' << format_number(trace.cgm[i]) << ','
        << format_number(trace.cho_g_per_min[i]) << ',' << format_number(trace.hrr[i]) << ','
        << format_number(trace.basal_u_per_h[i]) << ',' << format_number(trace.insulin_bolus_u[i]) << ','
        << format_number(trace.glucagon_bolus_ug[i]) << '\n';
  }
  return out.str();
}

}  // namespace vct
