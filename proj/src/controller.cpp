#include "vct/controller.hpp"

#include <algorithm>
#include <cmath>

#include "vct/errors.hpp"

namespace vct {

namespace {

void validate_mode(const ModeParameters& m, double setpoint, const char* which) {
  const std::string prefix = std::string("controller profile (") + which + "): ";
  if (!(m.filter_coefficient > 0.0 && m.filter_coefficient <= 1.0)) {
    throw ConfigError(prefix + "filter coefficient must lie in (0, 1]");
  }
  if (!(m.glucagon_threshold < setpoint)) throw ConfigError(prefix + "glucagon threshold must be below the setpoint");
  if (!(m.hysteresis >= 0.0) || !(m.prediction_horizon_s >= 0.0) || !(m.basal_gain >= 0.0) ||
      !(m.trend_gain >= 0.0) || !(m.basal_max_factor >= 1.0) || !(m.basal_factor >= 0.0) ||
      !(m.glucagon_microbolus_ug >= 0.0) || !(m.glucagon_lockout_s >= 0.0)) {
    throw ConfigError(prefix + "gains, horizons and doses must be nonnegative and the max factor at least 1");
  }
}

}  // namespace

void DualHormoneParameters::validate() const {
  if (!(setpoint > 0.0)) throw ConfigError("controller profile: setpoint must be positive");
  if (!(basal_scale >= 0.0)) throw ConfigError("controller profile: basal scale must be nonnegative");
  validate_mode(normal, setpoint, "normal");
  validate_mode(exercise, setpoint, "exercise");
  if (!(basal_fraction_of_tdd > 0.0 && basal_fraction_of_tdd <= 1.0) || !(icr_rule > 0.0) || !(correction_rule > 0.0) ||
      !(tdd_per_kg >= 0.0)) {
    throw ConfigError("controller profile: dose rules must be positive");
  }
  if (!(icr_min > 0.0) || !(icr_max >= icr_min) || !(icr_step >= 0.0 && icr_step < 1.0)) {
    throw ConfigError("controller profile: ICR range must be positive and ordered, step in [0, 1)");
  }
  if (!(suspension_s >= 0.0) || !(icr_window_s > 0.0) || !(superbolus_fraction >= 0.0) ||
      !(exercise_bolus_ug >= 0.0) || !(max_basal_u_per_h >= 0.0) || !(max_bolus_u >= 0.0) ||
      !(max_glucagon_ug >= 0.0)) {
    throw ConfigError("controller profile: durations, fractions and hard limits must be nonnegative");
  }
}

ControllerState initial_controller_state(const DualHormoneParameters& hyper, double patient_basal_u_per_h,
                                         double body_weight_kg) {
  ControllerState s;
  const double estimate = hyper.tdd_per_kg > 0.0 ? hyper.tdd_per_kg * body_weight_kg
                                                 : patient_basal_u_per_h * 24.0 / hyper.basal_fraction_of_tdd;
  const double tdd = std::max(estimate, 1e-3);
  s.icr = std::clamp(hyper.icr_rule / tdd, hyper.icr_min, hyper.icr_max);
  s.correction_factor = hyper.correction_rule / tdd;
  return s;
}

double low_pass_filter(double previous_estimate, double y, double coefficient) {
  return (1.0 - coefficient) * previous_estimate + coefficient * y;
}

MealBolus meal_bolus(double announced_cho_g, double icr, double correction_factor, double filtered_bg,
                     double patient_basal_u_per_h, const DualHormoneParameters& hyper) {
  MealBolus out;
  if (!(announced_cho_g > 0.0)) return out;
  const double base = announced_cho_g / icr + (filtered_bg - hyper.setpoint) / correction_factor;
  out.units = std::max(base, 0.0);
  if (filtered_bg > hyper.superbolus_threshold) {
    out.units += hyper.superbolus_fraction * patient_basal_u_per_h * hyper.suspension_s / 3600.0;
    out.superbolus = true;
  }
  return out;
}

double basal_microadjust(double filtered_bg, double trend, double patient_basal_u_per_h,
                         double suspension_remaining_s, const ModeParameters& mode, const DualHormoneParameters& hyper) {
  if (suspension_remaining_s > 0.0) return 0.0;
  const double factor = std::clamp(1.0 + mode.basal_gain * (filtered_bg - hyper.setpoint) + mode.trend_gain * trend,
                                   0.0, mode.basal_max_factor);
  return factor * mode.basal_factor * patient_basal_u_per_h;
}

double glucagon_microbolus(double filtered_bg, double trend, const ModeParameters& mode, double since_last_s) {
  if (filtered_bg < mode.glucagon_threshold && trend < 0.0 && since_last_s >= mode.glucagon_lockout_s) {
    return mode.glucagon_microbolus_ug;
  }
  return 0.0;
}

double icr_update(double icr, const PostprandialObservation& obs, const DualHormoneParameters& hyper) {
  double next = icr;
  if (obs.nadir < hyper.icr_undershoot_bg) {
    next = icr * (1.0 + hyper.icr_step);
  } else if (obs.excursion > hyper.icr_excursion_band) {
    next = icr * (1.0 - hyper.icr_step);
  }
  return std::clamp(next, hyper.icr_min, hyper.icr_max);
}

namespace {

// Pending announcements older than this are dropped.
constexpr double kPendingMealLifetime = 1800.0;

void close_meal_window(ControllerState& s, const DualHormoneParameters& hyper) {
  if (!s.meal_window.active) return;
  s.icr = icr_update(s.icr, {s.meal_window.peak_bg - hyper.setpoint, s.meal_window.nadir_bg}, hyper);
  s.meal_window = MealWindow{};
}

}  // namespace

ControllerStepResult controller_step(const ControllerState& state, const ControllerInputs& in,
                                     const DualHormoneParameters& hyper, double sample_period_s) {
  ControllerState s = state;
  ControlDecision d;
  const ModeParameters& mode = hyper.mode_parameters(in.exercising);
  const double y = std::isfinite(in.cgm) ? in.cgm : s.filtered_bg;

  // Filter.
  if (!s.initialized) {
    s.filtered_bg = y;
    s.previous_filtered_bg = y;
    s.initialized = true;
  } else {
    s.previous_filtered_bg = s.filtered_bg;
    s.filtered_bg = low_pass_filter(s.filtered_bg, y, mode.filter_coefficient);
  }
  const double bg = s.filtered_bg;
  const double trend = s.filtered_bg - s.previous_filtered_bg;

  s.since_last_glucagon_s += sample_period_s;
  s.since_last_bolus_s += sample_period_s;
  s.suspension_remaining_s = std::max(0.0, s.suspension_remaining_s - sample_period_s);

  if (s.meal_window.active) {
    s.meal_window.peak_bg = std::max(s.meal_window.peak_bg, bg);
    s.meal_window.nadir_bg = std::min(s.meal_window.nadir_bg, bg);
    s.meal_window.remaining_s -= sample_period_s;
    if (s.meal_window.remaining_s <= 0.0) close_meal_window(s, hyper);
  }

  // Exercise-start glucagon bolus, at most once per session.
  const bool session_start = in.exercising && !s.was_exercising;
  if (!in.exercising) s.exercise_bolus_given = false;
  bool exercise_bolus = false;
  if (session_start && !s.exercise_bolus_given && bg < hyper.exercise_bolus_threshold) {
    d.glucagon_bolus_ug = hyper.exercise_bolus_ug;
    s.exercise_bolus_given = true;
    s.since_last_glucagon_s = 0.0;
    exercise_bolus = true;
  }
  s.was_exercising = in.exercising;

  // Mode selection with hysteresis on the filtered estimate and a linear-trend prediction.
  const double predicted = bg + trend * (mode.prediction_horizon_s / sample_period_s);
  if (s.mode == ControllerMode::insulin) {
    if (bg < mode.glucagon_threshold || predicted < mode.glucagon_threshold) s.mode = ControllerMode::glucagon;
  } else if (bg >= mode.glucagon_threshold + mode.hysteresis && predicted >= mode.glucagon_threshold) {
    s.mode = ControllerMode::insulin;
  }

  if (in.announced_cho_g > 0.0) {
    if (s.pending_cho_g <= 0.0) s.pending_age_s = 0.0;
    s.pending_cho_g += in.announced_cho_g;
  } else if (s.pending_cho_g > 0.0) {
    s.pending_age_s += sample_period_s;
    if (s.pending_age_s > kPendingMealLifetime) s.pending_cho_g = 0.0;
  }

  if (exercise_bolus) return {s, d};  // no insulin alongside the exercise bolus; meals stay pending

  if (s.mode == ControllerMode::glucagon) {
    const double micro = glucagon_microbolus(bg, trend, mode, s.since_last_glucagon_s);
    if (micro > 0.0) {
      d.glucagon_bolus_ug = std::min(micro, hyper.max_glucagon_ug);
      s.since_last_glucagon_s = 0.0;
    }
    return {s, d};
  }

  const double basal = in.patient_basal_u_per_h;
  if (s.pending_cho_g > 0.0) {
    const auto bolus = meal_bolus(s.pending_cho_g, s.icr, s.correction_factor, bg, basal, hyper);
    d.insulin_bolus_u = std::min(bolus.units, hyper.max_bolus_u);
    s.pending_cho_g = 0.0;
    s.suspension_remaining_s = hyper.suspension_s;
    s.since_last_bolus_s = 0.0;
    close_meal_window(s, hyper);
    s.meal_window = MealWindow{true, hyper.icr_window_s, bg, bg, bg};
  }
  d.basal_u_per_h = std::min(basal_microadjust(bg, trend, basal, s.suspension_remaining_s, mode, hyper),
                             hyper.max_basal_u_per_h);
  return {s, d};
}

DualHormoneController::DualHormoneController(const DualHormoneParameters& hyper, double patient_basal_u_per_h,
                                             double body_weight_kg, double sample_period_s)
    : hyper_(hyper),
      sample_period_s_(sample_period_s),
      state_(initial_controller_state(hyper, patient_basal_u_per_h, body_weight_kg)) {}

ControlDecision DualHormoneController::step(const ControllerInputs& inputs) {
  auto result = controller_step(state_, inputs, hyper_, sample_period_s_);
  state_ = result.state;
  return result.decision;
}

std::optional<double> DualHormoneController::glucose_estimate() const {
  if (!state_.initialized) return std::nullopt;
  return state_.filtered_bg;
}

DualHormoneFactory::DualHormoneFactory(DualHormoneParameters hyper) : hyper_(std::move(hyper)) { hyper_.validate(); }

std::unique_ptr<FeedbackController> DualHormoneFactory::create(const PatientControlContext& context) const {
  return std::make_unique<DualHormoneController>(hyper_, context.basal_u_per_h, context.body_weight_kg,
                                                 context.sample_period_s);
}

std::string_view to_string(ControllerMode mode) noexcept { return mode == ControllerMode::insulin ? "insulin" : "glucagon"; }

}  // namespace vct
