#include "vct/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace vct {

namespace {

std::string format_date(std::chrono::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

std::chrono::year_month_day parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (std::sscanf(text.c_str(), "%d-%u-%u", &y, &m, &d) != 3) throw ConfigError("malformed date '" + text + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ConfigError("invalid date '" + text + "'");
  return ymd;
}

// Non-finite doubles are written as strings, since JSON has no literal for them.
Json encode(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double decode(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("expected a number, got '" + s + "'");
}

Json encode_vector(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(encode(x));
  return a;
}

std::vector<double> decode_vector(const Json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(decode(x));
  return v;
}

template <class T>
void opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

// --- population --------------------------------------------------------------

void to_json(Json& j, const Patient& v) {
  j = Json{{"id", v.id},
           {"first_name", v.first_name},
           {"last_name", v.last_name},
           {"date_of_birth", format_date(v.date_of_birth)},
           {"place_of_birth", v.place_of_birth},
           {"sex", to_string(v.sex)},
           {"height_cm", v.height_cm},
           {"body_weight_kg", v.body_weight_kg},
           {"resting_heart_rate", v.resting_heart_rate}};
}

void from_json(const Json& j, Patient& v) {
  j.at("id").get_to(v.id);
  j.at("first_name").get_to(v.first_name);
  j.at("last_name").get_to(v.last_name);
  v.date_of_birth = parse_date(j.at("date_of_birth").get<std::string>());
  j.at("place_of_birth").get_to(v.place_of_birth);
  v.sex = parse_sex(j.at("sex").get<std::string>());
  j.at("height_cm").get_to(v.height_cm);
  j.at("body_weight_kg").get_to(v.body_weight_kg);
  j.at("resting_heart_rate").get_to(v.resting_heart_rate);
}

void to_json(Json& j, const ParameterSet& v) { j = Json{{"values", v.values}, {"basal_u_per_h", v.basal_u_per_h}}; }

void from_json(const Json& j, ParameterSet& v) {
  j.at("values").get_to(v.values);
  j.at("basal_u_per_h").get_to(v.basal_u_per_h);
}

void to_json(Json& j, const PopulationEntry& v) { j = Json{{"patient", v.patient}, {"params", v.params}}; }

void from_json(const Json& j, PopulationEntry& v) {
  j.at("patient").get_to(v.patient);
  j.at("params").get_to(v.params);
}

namespace {
Json normal_json(const NormalSpec& n) { return Json{{"mean", n.mean}, {"sd", n.sd}}; }
void normal_from(const Json& j, const char* key, NormalSpec& n) {
  if (!j.contains(key)) return;
  j.at(key).at("mean").get_to(n.mean);
  j.at(key).at("sd").get_to(n.sd);
}
}  // namespace

void to_json(Json& j, const DemographicsConfig& v) {
  j = Json{{"height_cm", normal_json(v.height_cm)},
           {"body_weight_kg", normal_json(v.body_weight_kg)},
           {"resting_heart_rate", normal_json(v.resting_heart_rate)},
           {"dob_min", format_date(v.dob_min)},
           {"dob_max", format_date(v.dob_max)},
           {"female_first_names", v.female_first_names},
           {"male_first_names", v.male_first_names},
           {"last_names", v.last_names},
           {"places", v.places}};
}

void from_json(const Json& j, DemographicsConfig& v) {
  normal_from(j, "height_cm", v.height_cm);
  normal_from(j, "body_weight_kg", v.body_weight_kg);
  normal_from(j, "resting_heart_rate", v.resting_heart_rate);
  if (j.contains("dob_min")) v.dob_min = parse_date(j.at("dob_min").get<std::string>());
  if (j.contains("dob_max")) v.dob_max = parse_date(j.at("dob_max").get<std::string>());
  opt(j, "female_first_names", v.female_first_names);
  opt(j, "male_first_names", v.male_first_names);
  opt(j, "last_names", v.last_names);
  opt(j, "places", v.places);
}

void to_json(Json& j, const ParameterDistribution& v) {
  j = Json{{"name", v.name}, {"kind", to_string(v.kind)}, {"mean", v.mean},
           {"sd", v.sd},     {"unit", v.unit},             {"source", v.source}};
}

void from_json(const Json& j, ParameterDistribution& v) {
  j.at("name").get_to(v.name);
  v.kind = parse_distribution_kind(j.at("kind").get<std::string>());
  j.at("mean").get_to(v.mean);
  v.sd = j.value("sd", 0.0);
  v.unit = j.value("unit", std::string{});
  v.source = j.value("source", std::string{});
}

void to_json(Json& j, const ParameterDistributionTable& v) {
  j = Json{{"model_id", v.model_id},
           {"target_bg", v.target_bg},
           {"min_basal_u_per_h", v.min_basal_u_per_h},
           {"parameters", v.parameters}};
}

void from_json(const Json& j, ParameterDistributionTable& v) {
  opt(j, "model_id", v.model_id);
  opt(j, "target_bg", v.target_bg);
  opt(j, "min_basal_u_per_h", v.min_basal_u_per_h);
  j.at("parameters").get_to(v.parameters);
}

// --- protocol ----------------------------------------------------------------

void to_json(Json& j, const Disturbance& v) {
  j = Json{{"kind", to_string(v.kind)},  {"start_s", v.start_s},     {"end_s", v.end_s},
           {"magnitude", v.magnitude}, {"announced", v.announced}, {"announced_magnitude", v.announced_magnitude}};
}

void from_json(const Json& j, Disturbance& v) {
  v.kind = parse_disturbance_kind(j.at("kind").get<std::string>());
  j.at("start_s").get_to(v.start_s);
  j.at("end_s").get_to(v.end_s);
  j.at("magnitude").get_to(v.magnitude);
  v.announced = j.value("announced", true);
  v.announced_magnitude = j.value("announced_magnitude", v.magnitude);
}

void to_json(Json& j, const Protocol& v) {
  j = Json{{"id", v.id}, {"horizon_s", v.horizon_s}, {"disturbances", v.disturbances}};
}

void from_json(const Json& j, Protocol& v) {
  j.at("id").get_to(v.id);
  j.at("horizon_s").get_to(v.horizon_s);
  j.at("disturbances").get_to(v.disturbances);
}

void to_json(Json& j, const DayEvent& v) {
  j = Json{{"clock_s", v.clock_s}, {"kind", to_string(v.kind)}, {"duration_s", v.duration_s}};
  if (v.kind == DisturbanceKind::meal) {
    j["meal"] = to_string(v.meal);
  } else {
    j["intensity"] = v.intensity;
  }
}

void from_json(const Json& j, DayEvent& v) {
  if (j.contains("clock")) {
    int hh = 0;
    int mm = 0;
    const auto text = j.at("clock").get<std::string>();
    if (std::sscanf(text.c_str(), "%d:%d", &hh, &mm) != 2) throw ConfigError("malformed clock time '" + text + "'");
    v.clock_s = hh * 3600.0 + mm * 60.0;
  } else {
    j.at("clock_s").get_to(v.clock_s);
  }
  v.kind = parse_disturbance_kind(j.at("kind").get<std::string>());
  if (j.contains("duration_min")) {
    v.duration_s = j.at("duration_min").get<double>() * 60.0;
  } else {
    v.duration_s = j.value("duration_s", 900.0);
  }
  if (v.kind == DisturbanceKind::meal) {
    v.meal = parse_meal_class(j.at("meal").get<std::string>());
  } else {
    j.at("intensity").get_to(v.intensity);
  }
}

void to_json(Json& j, const BasisDay& v) {
  j = Json{{"day_type", to_string(v.day_type)}, {"season_class", to_string(v.season_class)}, {"events", v.events}};
}

void from_json(const Json& j, BasisDay& v) {
  v.day_type = parse_day_type(j.at("day_type").get<std::string>());
  v.season_class = parse_season_class(j.at("season_class").get<std::string>());
  j.at("events").get_to(v.events);
}

void to_json(Json& j, const BasisWeek& v) {
  Json counts;
  for (std::size_t i = 0; i < kDayTypeCount; ++i) counts[std::string(to_string(static_cast<DayType>(i)))] = v.day_counts[i];
  j = Json{{"week_type", to_string(v.week_type)}, {"day_counts", counts}};
}

void from_json(const Json& j, BasisWeek& v) {
  v.week_type = parse_week_type(j.at("week_type").get<std::string>());
  v.day_counts = {};
  for (const auto& [key, value] : j.at("day_counts").items()) {
    v.day_counts[static_cast<std::size_t>(parse_day_type(key))] = value.get<int>();
  }
}

void to_json(Json& j, const Season& v) {
  Json counts;
  for (std::size_t i = 0; i < kWeekTypeCount; ++i) {
    counts[std::string(to_string(static_cast<WeekType>(i)))] = v.week_counts[i];
  }
  j = Json{{"name", to_string(v.name)}, {"season_class", to_string(v.season_class)}, {"week_counts", counts}};
}

void from_json(const Json& j, Season& v) {
  v.name = parse_season_name(j.at("name").get<std::string>());
  v.season_class = parse_season_class(j.at("season_class").get<std::string>());
  v.week_counts = {};
  for (const auto& [key, value] : j.at("week_counts").items()) {
    v.week_counts[static_cast<std::size_t>(parse_week_type(key))] = value.get<int>();
  }
}

void to_json(Json& j, const ProtocolLibrary& v) {
  j = Json{{"days", v.days}, {"weeks", v.weeks}, {"seasons", v.seasons}};
}

void from_json(const Json& j, ProtocolLibrary& v) {
  j.at("days").get_to(v.days);
  j.at("weeks").get_to(v.weeks);
  j.at("seasons").get_to(v.seasons);
}

void to_json(Json& j, const AnnouncementPolicy& v) {
  j = Json{{"fraction_unannounced", v.fraction_unannounced},
           {"fraction_misannounced", v.fraction_misannounced},
           {"misannouncement_min", v.misannouncement_min},
           {"misannouncement_max", v.misannouncement_max}};
}

void from_json(const Json& j, AnnouncementPolicy& v) {
  opt(j, "fraction_unannounced", v.fraction_unannounced);
  opt(j, "fraction_misannounced", v.fraction_misannounced);
  opt(j, "misannouncement_min", v.misannouncement_min);
  opt(j, "misannouncement_max", v.misannouncement_max);
}

// --- controller --------------------------------------------------------------

void to_json(Json& j, const ModeParameters& v) {
  j = Json{{"filter_coefficient", v.filter_coefficient},
           {"glucagon_threshold", v.glucagon_threshold},
           {"hysteresis", v.hysteresis},
           {"prediction_horizon_s", v.prediction_horizon_s},
           {"basal_gain", v.basal_gain},
           {"trend_gain", v.trend_gain},
           {"basal_max_factor", v.basal_max_factor},
           {"basal_factor", v.basal_factor},
           {"glucagon_microbolus_ug", v.glucagon_microbolus_ug},
           {"glucagon_lockout_s", v.glucagon_lockout_s}};
}

void from_json(const Json& j, ModeParameters& v) {
  opt(j, "filter_coefficient", v.filter_coefficient);
  opt(j, "glucagon_threshold", v.glucagon_threshold);
  opt(j, "hysteresis", v.hysteresis);
  opt(j, "prediction_horizon_s", v.prediction_horizon_s);
  opt(j, "basal_gain", v.basal_gain);
  opt(j, "trend_gain", v.trend_gain);
  opt(j, "basal_max_factor", v.basal_max_factor);
  opt(j, "basal_factor", v.basal_factor);
  opt(j, "glucagon_microbolus_ug", v.glucagon_microbolus_ug);
  opt(j, "glucagon_lockout_s", v.glucagon_lockout_s);
}

void to_json(Json& j, const DualHormoneParameters& v) {
  j = Json{{"setpoint", v.setpoint},
           {"basal_scale", v.basal_scale},
           {"normal", v.normal},
           {"exercise", v.exercise},
           {"basal_fraction_of_tdd", v.basal_fraction_of_tdd},
           {"tdd_per_kg", v.tdd_per_kg},
           {"icr_rule", v.icr_rule},
           {"correction_rule", v.correction_rule},
           {"superbolus_threshold", v.superbolus_threshold},
           {"superbolus_fraction", v.superbolus_fraction},
           {"suspension_s", v.suspension_s},
           {"icr_window_s", v.icr_window_s},
           {"icr_excursion_band", v.icr_excursion_band},
           {"icr_undershoot_bg", v.icr_undershoot_bg},
           {"icr_step", v.icr_step},
           {"icr_min", v.icr_min},
           {"icr_max", v.icr_max},
           {"exercise_bolus_ug", v.exercise_bolus_ug},
           {"exercise_bolus_threshold", v.exercise_bolus_threshold},
           {"max_basal_u_per_h", v.max_basal_u_per_h},
           {"max_bolus_u", v.max_bolus_u},
           {"max_glucagon_ug", v.max_glucagon_ug}};
}

void from_json(const Json& j, DualHormoneParameters& v) {
  opt(j, "setpoint", v.setpoint);
  opt(j, "basal_scale", v.basal_scale);
  opt(j, "normal", v.normal);
  opt(j, "exercise", v.exercise);
  opt(j, "basal_fraction_of_tdd", v.basal_fraction_of_tdd);
  opt(j, "tdd_per_kg", v.tdd_per_kg);
  opt(j, "icr_rule", v.icr_rule);
  opt(j, "correction_rule", v.correction_rule);
  opt(j, "superbolus_threshold", v.superbolus_threshold);
  opt(j, "superbolus_fraction", v.superbolus_fraction);
  opt(j, "suspension_s", v.suspension_s);
  opt(j, "icr_window_s", v.icr_window_s);
  opt(j, "icr_excursion_band", v.icr_excursion_band);
  opt(j, "icr_undershoot_bg", v.icr_undershoot_bg);
  opt(j, "icr_step", v.icr_step);
  opt(j, "icr_min", v.icr_min);
  opt(j, "icr_max", v.icr_max);
  opt(j, "exercise_bolus_ug", v.exercise_bolus_ug);
  opt(j, "exercise_bolus_threshold", v.exercise_bolus_threshold);
  opt(j, "max_basal_u_per_h", v.max_basal_u_per_h);
  opt(j, "max_bolus_u", v.max_bolus_u);
  opt(j, "max_glucagon_ug", v.max_glucagon_ug);
}

// --- analytics ---------------------------------------------------------------

void to_json(Json& j, const HistogramSpec& v) { j = Json{{"bin_width", v.bin_width}, {"bins", v.bins}}; }

void from_json(const Json& j, HistogramSpec& v) {
  j.at("bin_width").get_to(v.bin_width);
  j.at("bins").get_to(v.bins);
}

void to_json(Json& j, const AnalyticsConfig& v) {
  j = Json{{"basal", v.basal},
           {"bolus", v.bolus},
           {"glucagon", v.glucagon},
           {"dose_aggregation", v.dose_aggregation == DoseAggregation::patient_day ? "patient_day" : "patient_mean"},
           {"time_grid_s", v.time_grid_s}};
}

void from_json(const Json& j, AnalyticsConfig& v) {
  opt(j, "basal", v.basal);
  opt(j, "bolus", v.bolus);
  opt(j, "glucagon", v.glucagon);
  if (j.contains("dose_aggregation")) {
    const auto s = j.at("dose_aggregation").get<std::string>();
    if (s == "patient_day") {
      v.dose_aggregation = DoseAggregation::patient_day;
    } else if (s == "patient_mean") {
      v.dose_aggregation = DoseAggregation::patient_mean;
    } else {
      throw ConfigError("unknown dose aggregation '" + s + "'");
    }
  }
  opt(j, "time_grid_s", v.time_grid_s);
}

void to_json(Json& j, const GridSpec& v) {
  j = Json{{"dt_s", v.dt_s}, {"horizon_ticks", v.horizon_ticks}, {"analytics", v.analytics}};
}

void from_json(const Json& j, GridSpec& v) {
  j.at("dt_s").get_to(v.dt_s);
  j.at("horizon_ticks").get_to(v.horizon_ticks);
  j.at("analytics").get_to(v.analytics);
}

namespace {

Json dose_json(const DoseHistogram& h) {
  return Json{{"counts", h.counts}, {"sum_micro", h.sum_micro}, {"samples", h.samples}};
}

void dose_from(const Json& j, DoseHistogram& h) {
  j.at("counts").get_to(h.counts);
  j.at("sum_micro").get_to(h.sum_micro);
  j.at("samples").get_to(h.samples);
}

Json worst_json(const WorstCase& w) {
  return Json{{"patient_id", w.patient_id},   {"min_bg", w.min_bg},           {"range_ticks", w.range_ticks},
              {"below_ticks", w.below_ticks}, {"mean_bg_micro", w.mean_bg_micro}};
}

WorstCase worst_from(const Json& j) {
  WorstCase w;
  j.at("patient_id").get_to(w.patient_id);
  j.at("min_bg").get_to(w.min_bg);
  j.at("range_ticks").get_to(w.range_ticks);
  j.at("below_ticks").get_to(w.below_ticks);
  j.at("mean_bg_micro").get_to(w.mean_bg_micro);
  return w;
}

}  // namespace

void to_json(Json& j, const TrialAccumulator& v) {
  j = Json{{"grid", v.grid_},
           {"patients", v.patients_},
           {"aborted", v.aborted_},
           {"range_ticks", v.range_ticks_},
           {"tir_count", v.tir_count_},
           {"tir_ticks", v.tir_ticks_},
           {"below_sum", v.below_sum_},
           {"below_min", v.below_min_},
           {"below_max", v.below_max_},
           {"mean_bg_sum_micro", v.mean_bg_sum_micro_},
           {"min_bg", v.min_bg_ ? Json(*v.min_bg_) : Json(nullptr)},
           {"max_bg", v.max_bg_ ? Json(*v.max_bg_) : Json(nullptr)},
           {"grid_sum_micro", v.grid_sum_micro_},
           {"grid_min", encode_vector(v.grid_min_)},
           {"grid_max", encode_vector(v.grid_max_)},
           {"basal", dose_json(v.basal_)},
           {"bolus", dose_json(v.bolus_)},
           {"glucagon", dose_json(v.glucagon_)},
           {"safety_violations", v.safety_violations_},
           {"worst", v.worst_ ? worst_json(*v.worst_) : Json(nullptr)}};
}

void from_json(const Json& j, TrialAccumulator& v) {
  v = TrialAccumulator{};
  j.at("grid").get_to(v.grid_);
  j.at("patients").get_to(v.patients_);
  j.at("aborted").get_to(v.aborted_);
  j.at("range_ticks").get_to(v.range_ticks_);
  j.at("tir_count").get_to(v.tir_count_);
  j.at("tir_ticks").get_to(v.tir_ticks_);
  j.at("below_sum").get_to(v.below_sum_);
  j.at("below_min").get_to(v.below_min_);
  j.at("below_max").get_to(v.below_max_);
  j.at("mean_bg_sum_micro").get_to(v.mean_bg_sum_micro_);
  if (!j.at("min_bg").is_null()) v.min_bg_ = j.at("min_bg").get<double>();
  if (!j.at("max_bg").is_null()) v.max_bg_ = j.at("max_bg").get<double>();
  j.at("grid_sum_micro").get_to(v.grid_sum_micro_);
  v.grid_min_ = decode_vector(j.at("grid_min"));
  v.grid_max_ = decode_vector(j.at("grid_max"));
  dose_from(j.at("basal"), v.basal_);
  dose_from(j.at("bolus"), v.bolus_);
  dose_from(j.at("glucagon"), v.glucagon_);
  j.at("safety_violations").get_to(v.safety_violations_);
  if (!j.at("worst").is_null()) v.worst_ = worst_from(j.at("worst"));
}

void to_json(Json& j, const TrialMetadata& v) {
  j = Json{{"trial_id", v.trial_id},
           {"seed", v.seed},
           {"model_id", v.model_id},
           {"controller_id", v.controller_id},
           {"profile_hash", v.profile_hash},
           {"controller_period_s", v.controller_period_s}};
}

void from_json(const Json& j, TrialMetadata& v) {
  j.at("trial_id").get_to(v.trial_id);
  j.at("seed").get_to(v.seed);
  j.at("model_id").get_to(v.model_id);
  j.at("controller_id").get_to(v.controller_id);
  j.at("profile_hash").get_to(v.profile_hash);
  j.at("controller_period_s").get_to(v.controller_period_s);
}

namespace {

Json box_json(const BoxStats& b) {
  Json outliers = Json::array();
  for (const auto& [value, count] : b.outliers) outliers.push_back(Json{{"fraction", value}, {"patients", count}});
  return Json{{"q1", b.q1},
              {"median", b.median},
              {"q3", b.q3},
              {"whisker_low", b.whisker_low},
              {"whisker_high", b.whisker_high},
              {"outliers", outliers}};
}

Json tir_json(const TirReport& t) {
  Json ranges = Json::object();
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    Json entry = box_json(t.box[r]);
    entry["mean"] = t.mean[r];
    if (t.worst) entry["worst_case"] = (*t.worst)[r];
    ranges[std::string(to_string(static_cast<GlycemicRange>(r)))] = entry;
  }
  return Json{{"patients", t.patients}, {"ranges", ranges}};
}

Json cdf_json(const CdfReport& c) {
  return Json{{"thresholds", c.thresholds}, {"mean", c.mean}, {"min", c.min}, {"max", c.max}, {"worst_case", c.worst}};
}

Json histogram_json(const HistogramReport& h) {
  return Json{{"bin_width", h.bin_width}, {"counts", h.counts}, {"samples", h.samples}, {"mean", h.mean}};
}

Json doses_json(const DoseReport& d) {
  return Json{{"basal_u_per_day", histogram_json(d.basal)},
              {"bolus_u_per_day", histogram_json(d.bolus)},
              {"glucagon_ug_per_day", histogram_json(d.glucagon)}};
}

}  // namespace

void to_json(Json& j, const TrialReport& v) {
  const auto& ts = v.time_series;
  j = Json{{"metadata", v.metadata},
           {"accumulator", v.accumulator},
           {"summary",
            {{"patients", v.accumulator.patients()},
             {"aborted", v.accumulator.aborted().size()},
             {"mean_bg", v.mean_bg},
             {"worst_case_patient", v.accumulator.worst_ ? Json(v.accumulator.worst_->patient_id) : Json(nullptr)},
             {"worst_case_min_bg", v.accumulator.worst_ ? Json(v.accumulator.worst_->min_bg) : Json(nullptr)},
             {"safety_violations", v.accumulator.safety_violations_}}},
           {"tir", tir_json(v.tir)},
           {"cdf", cdf_json(v.cdf)},
           {"doses", doses_json(v.doses)},
           {"time_series",
            {{"period_s", ts.period_s}, {"mean", ts.mean}, {"min", encode_vector(ts.min)}, {"max", encode_vector(ts.max)}}}};
}

void from_json(const Json& j, TrialReport& v) {
  TrialMetadata meta;
  TrialAccumulator acc;
  j.at("metadata").get_to(meta);
  j.at("accumulator").get_to(acc);
  v = make_report(meta, acc);
}

void to_json(Json& j, const ComparisonReport& v) {
  Json deltas = Json::object();
  for (std::size_t r = 0; r < kRangeCount; ++r) {
    deltas["mean_tir"][std::string(to_string(static_cast<GlycemicRange>(r)))] = v.deltas.mean_tir[r];
  }
  deltas["mean_bg"] = v.deltas.mean_bg;
  deltas["mean_daily_basal_u"] = v.deltas.mean_daily_basal_u;
  deltas["mean_daily_bolus_u"] = v.deltas.mean_daily_bolus_u;
  deltas["mean_daily_glucagon_ug"] = v.deltas.mean_daily_glucagon_ug;
  deltas["worst_case_min_bg"] = v.deltas.worst_min_bg;
  j = Json{{"cdf", {{"a", cdf_json(v.cdf_a)}, {"b", cdf_json(v.cdf_b)}}},
           {"tir", {{"a", tir_json(v.tir_a)}, {"b", tir_json(v.tir_b)}}},
           {"doses", {{"a", doses_json(v.doses_a)}, {"b", doses_json(v.doses_b)}}},
           {"deltas", deltas}};
}

// --- simulation --------------------------------------------------------------

void to_json(Json& j, const SimulationConfig& v) {
  j = Json{{"dt_s", v.dt_s},
           {"controller_period_s", v.controller_period_s},
           {"horizon_s", v.horizon_s},
           {"seed", v.seed},
           {"store_trace", to_string(v.store_trace)},
           {"trace_states", v.trace_states},
           {"kernel", simd::to_string(v.kernel)},
           {"analytics", v.analytics}};
}

void from_json(const Json& j, SimulationConfig& v) {
  opt(j, "dt_s", v.dt_s);
  opt(j, "controller_period_s", v.controller_period_s);
  if (j.contains("horizon_days")) v.horizon_s = j.at("horizon_days").get<std::int64_t>() * 86400;
  if (j.contains("horizon_weeks")) v.horizon_s = j.at("horizon_weeks").get<std::int64_t>() * 7 * 86400;
  opt(j, "horizon_s", v.horizon_s);
  opt(j, "seed", v.seed);
  if (j.contains("store_trace")) v.store_trace = parse_trace_policy(j.at("store_trace").get<std::string>());
  opt(j, "trace_states", v.trace_states);
  if (j.contains("kernel")) v.kernel = simd::parse_kernel_choice(j.at("kernel").get<std::string>());
  opt(j, "analytics", v.analytics);
}

void to_json(Json& j, const Trace& v) {
  j = Json{{"t_s", encode_vector(v.t_s)},
           {"bg", encode_vector(v.bg)},
           {"cgm", encode_vector(v.cgm)},
           {"cho_g_per_min", encode_vector(v.cho_g_per_min)},
           {"hrr", encode_vector(v.hrr)},
           {"basal_u_per_h", encode_vector(v.basal_u_per_h)},
           {"insulin_bolus_u", encode_vector(v.insulin_bolus_u)},
           {"glucagon_bolus_ug", encode_vector(v.glucagon_bolus_ug)},
           {"state_dimension", v.state_dimension},
           {"states", encode_vector(v.states)}};
}

void from_json(const Json& j, Trace& v) {
  v.t_s = decode_vector(j.at("t_s"));
  v.bg = decode_vector(j.at("bg"));
  v.cgm = decode_vector(j.at("cgm"));
  v.cho_g_per_min = decode_vector(j.at("cho_g_per_min"));
  v.hrr = decode_vector(j.at("hrr"));
  v.basal_u_per_h = decode_vector(j.at("basal_u_per_h"));
  v.insulin_bolus_u = decode_vector(j.at("insulin_bolus_u"));
  v.glucagon_bolus_ug = decode_vector(j.at("glucagon_bolus_ug"));
  j.at("state_dimension").get_to(v.state_dimension);
  v.states = decode_vector(j.at("states"));
}

// --- text helpers ------------------------------------------------------------

std::string canonical_dump(const Json& j) { return j.dump(2) + "\n"; }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

std::string population_to_jsonl(const Population& population) {
  std::string out = Json{{"format", "vct-population"},
                         {"schema_version", kPopulationSchemaVersion},
                         {"patients", population.entries.size()},
                         {"parameter_attempts", population.parameter_attempts}}
                        .dump();
  out += '\n';
  for (const auto& e : population.entries) {
    out += Json(e).dump();
    out += '\n';
  }
  return out;
}

Population population_from_jsonl(const std::string& text) {
  Population pop;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  std::uint64_t expected = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      if (number == 1) {
        if (j.value("format", std::string()) != "vct-population") throw DataError("population: missing header line");
        if (j.at("schema_version").get<int>() != kPopulationSchemaVersion) {
          throw DataError("population: unsupported schema version " + j.at("schema_version").dump());
        }
        expected = j.at("patients").get<std::uint64_t>();
        pop.parameter_attempts = j.at("parameter_attempts").get<std::uint64_t>();
        continue;
      }
      pop.entries.push_back(j.get<PopulationEntry>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("population line " + std::to_string(number) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw DataError("population line " + std::to_string(number) + ": " + e.what());
    }
  }
  if (number == 0) throw DataError("population: empty input");
  if (pop.entries.size() != expected) {
    throw DataError("population: header announces " + std::to_string(expected) + " patients, found " +
                    std::to_string(pop.entries.size()));
  }
  return pop;
}

std::string content_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string profile_hash(const DualHormoneParameters& params) { return content_hash(Json(params)); }

}  // namespace vct
