#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace vct {

/// Manipulated inputs chosen at one sampling instant, held until the next.
struct ControlDecision {
  double basal_u_per_h = 0.0;
  double insulin_bolus_u = 0.0;
  double glucagon_bolus_ug = 0.0;

  bool operator==(const ControlDecision&) const = default;
};

/// What the controller sees at sampling time t_k: the CGM measurement y_k,
/// the setpoints (patient basal, glucose target) and disturbance estimates
/// (announced carbohydrate, exercise state).
struct ControllerInputs {
  double t_s = 0.0;
  double cgm = 0.0;
  double announced_cho_g = 0.0;
  bool exercising = false;
  double patient_basal_u_per_h = 0.0;
};

/// Stable extension point for feedback controllers of the form
///   x^c_{k+1} = kappa(x^c_k, y_k, u_bar, y_bar, d_hat, p_kappa)
///   u_k       = lambda(x^c_k, y_k, u_bar, y_bar, d_hat, p_mu).
/// One instance per simulated patient; implementations own their state and
/// must be deterministic. Third-party controllers (PID, MPC) implement this
/// interface and a ControllerFactory.
class FeedbackController {
 public:
  virtual ~FeedbackController() = default;
  virtual ControlDecision step(const ControllerInputs& inputs) = 0;
  /// Current internal glucose estimate (mmol/L), when the controller keeps one.
  virtual std::optional<double> glucose_estimate() const { return std::nullopt; }
};

struct PatientControlContext {
  double body_weight_kg = 0.0;
  double basal_u_per_h = 0.0;
  double sample_period_s = 300.0;
};

class ControllerFactory {
 public:
  virtual ~ControllerFactory() = default;
  virtual std::string_view id() const = 0;
  /// Glucose target used for the initial steady state.
  virtual double setpoint() const = 0;
  /// Multiplier applied to the model's true basal rate before handing it to the controller.
  virtual double basal_scale() const { return 1.0; }
  virtual std::unique_ptr<FeedbackController> create(const PatientControlContext& context) const = 0;
};

// ----------------------------------------------------------------------------
// Dual-hormone controller: insulin mode (basal microadjustments, meal bolus
// calculator, superboli, insulin-to-carb ratio estimation) and glucagon mode
// (microboli only), plus a glucagon bolus at the start of exercise.

enum class ControllerMode { insulin, glucagon };

/// Hyperparameters that take different values while the patient exercises.
struct ModeParameters {
  double filter_coefficient = 0.5;
  double glucagon_threshold = 4.5;    // mmol/L
  double hysteresis = 0.5;            // mmol/L above threshold to leave glucagon mode
  double prediction_horizon_s = 1800;
  double basal_gain = 0.1;            // per mmol/L above setpoint
  double trend_gain = 0.5;            // per mmol/L per sample
  double basal_max_factor = 2.0;
  double basal_factor = 1.0;          // scaling of the neutral basal rate
  double glucagon_microbolus_ug = 20.0;
  double glucagon_lockout_s = 1200;

  bool operator==(const ModeParameters&) const = default;
};

struct DualHormoneParameters {
  double setpoint = 6.0;              // mmol/L
  double basal_scale = 1.0;           // assumed / true patient basal
  ModeParameters normal;
  ModeParameters exercise{0.5, 5.5, 0.5, 1800, 0.05, 0.25, 1.0, 0.5, 20.0, 1200};

  double basal_fraction_of_tdd = 0.5;     // assumed basal share of the total daily dose
  double tdd_per_kg = 0.25;               // when positive, the total daily dose is seeded from body weight
  double icr_rule = 500.0;                // g CHO per U of total daily dose
  double correction_rule = 100.0;         // mmol/L per U of total daily dose
  double superbolus_threshold = 8.0;      // mmol/L
  double superbolus_fraction = 1.0;       // of the basal withheld during suspension
  double suspension_s = 3600.0;

  double icr_window_s = 10800.0;
  double icr_excursion_band = 4.0;        // mmol/L of post-meal peak above the setpoint
  double icr_undershoot_bg = 4.5;         // mmol/L post-meal nadir
  double icr_step = 0.05;                 // relative change per update
  double icr_min = 3.0;
  double icr_max = 50.0;

  double exercise_bolus_ug = 100.0;
  double exercise_bolus_threshold = 7.0;  // mmol/L

  double max_basal_u_per_h = 10.0;
  double max_bolus_u = 25.0;
  double max_glucagon_ug = 150.0;

  const ModeParameters& mode_parameters(bool exercising) const { return exercising ? exercise : normal; }
  /// Throws ConfigError if a hyperparameter is out of its admissible range.
  void validate() const;
  bool operator==(const DualHormoneParameters&) const = default;
};

struct MealWindow {
  bool active = false;
  double remaining_s = 0.0;
  double pre_bg = 0.0;
  double peak_bg = 0.0;
  double nadir_bg = 0.0;

  bool operator==(const MealWindow&) const = default;
};

struct ControllerState {
  bool initialized = false;
  double filtered_bg = 0.0;
  double previous_filtered_bg = 0.0;
  ControllerMode mode = ControllerMode::insulin;
  double icr = 10.0;                 // g CHO per U
  double correction_factor = 2.5;    // mmol/L per U
  double suspension_remaining_s = 0.0;
  bool was_exercising = false;
  bool exercise_bolus_given = false;
  double since_last_glucagon_s = 1e12;
  double since_last_bolus_s = 1e12;
  double pending_cho_g = 0.0;
  double pending_age_s = 0.0;
  MealWindow meal_window;

  bool operator==(const ControllerState&) const = default;
};

/// ICR and correction factor are seeded from an estimated total daily dose:
/// tdd_per_kg * body weight when tdd_per_kg > 0, else the dose implied by the assumed basal rate.
ControllerState initial_controller_state(const DualHormoneParameters& hyper, double patient_basal_u_per_h,
                                         double body_weight_kg = 0.0);

/// Exponential smoothing: (1 - c) * previous + c * y.
double low_pass_filter(double previous_estimate, double y, double coefficient);

struct MealBolus {
  double units = 0.0;
  bool superbolus = false;
};

/// Carbohydrate bolus plus correction, floored at zero. Above the superbolus
/// threshold the basal withheld during the post-meal suspension is added.
MealBolus meal_bolus(double announced_cho_g, double icr, double correction_factor, double filtered_bg,
                     double patient_basal_u_per_h, const DualHormoneParameters& hyper);

/// Patient basal scaled by a bounded factor increasing in glucose deviation and trend.
double basal_microadjust(double filtered_bg, double trend, double patient_basal_u_per_h,
                         double suspension_remaining_s, const ModeParameters& mode, const DualHormoneParameters& hyper);

/// Fixed microbolus when glucose is below the threshold, falling and the lockout has expired.
double glucagon_microbolus(double filtered_bg, double trend, const ModeParameters& mode, double since_last_s);

struct PostprandialObservation {
  double excursion = 0.0;  // peak estimate minus setpoint
  double nadir = 0.0;      // lowest estimate in the window
};

/// Multiplicative update: overshoot strengthens dosing (lower ICR), undershoot weakens it.
double icr_update(double icr, const PostprandialObservation& obs, const DualHormoneParameters& hyper);

struct ControllerStepResult {
  ControllerState state;
  ControlDecision decision;
};

/// Filter update, exercise glucagon rule, mode selection and mode-specific dosing, in that order.
ControllerStepResult controller_step(const ControllerState& state, const ControllerInputs& inputs,
                                     const DualHormoneParameters& hyper, double sample_period_s);

class DualHormoneController final : public FeedbackController {
 public:
  DualHormoneController(const DualHormoneParameters& hyper, double patient_basal_u_per_h, double body_weight_kg,
                        double sample_period_s);
  ControlDecision step(const ControllerInputs& inputs) override;
  std::optional<double> glucose_estimate() const override;
  const ControllerState& state() const noexcept { return state_; }

 private:
  const DualHormoneParameters& hyper_;
  double sample_period_s_;
  ControllerState state_;
};

class DualHormoneFactory final : public ControllerFactory {
 public:
  static constexpr std::string_view kId = "dual_hormone";
  explicit DualHormoneFactory(DualHormoneParameters hyper);
  std::string_view id() const override { return kId; }
  double setpoint() const override { return hyper_.setpoint; }
  double basal_scale() const override { return hyper_.basal_scale; }
  std::unique_ptr<FeedbackController> create(const PatientControlContext& context) const override;
  const DualHormoneParameters& parameters() const noexcept { return hyper_; }

 private:
  DualHormoneParameters hyper_;
};

std::string_view to_string(ControllerMode mode) noexcept;

}  // namespace vct
