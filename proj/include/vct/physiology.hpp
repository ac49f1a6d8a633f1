#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vct/rng.hpp"
#include "vct/simd/isa.hpp"

namespace vct {

/// Named physiological parameters of one patient plus the steady-state basal
/// rate implied by them.
struct ParameterSet {
  std::map<std::string, double> values;
  double basal_u_per_h = 0.0;

  double at(const std::string& name) const;
  bool operator==(const ParameterSet&) const = default;
};

/// Piecewise-constant model inputs: manipulated (u) and disturbances (d).
struct ModelInputs {
  double basal_mu_per_min = 0.0;
  double bolus_mu_per_min = 0.0;
  double glucagon_ug_per_min = 0.0;
  double cho_g_per_min = 0.0;
  double hrr = 0.0;
};

struct SteadyState {
  std::vector<double> x;
  double basal_u_per_h = 0.0;
};

/// Advances simd::kLanes patients of one model by one Euler-Maruyama step.
/// Lanes not loaded (or disabled) carry a harmless dummy patient.
class BatchStepper {
 public:
  virtual ~BatchStepper() = default;

  virtual void load(std::size_t lane, std::span<const double> params, std::span<const double> x0) = 0;
  virtual void disable(std::size_t lane) = 0;
  virtual void set_inputs(std::size_t lane, const ModelInputs& inputs) = 0;
  virtual void set_noise(std::size_t lane, std::span<const double> xi) = 0;
  /// h in minutes.
  virtual void step(double h) = 0;

  virtual double output(std::size_t lane) const = 0;
  virtual double measurement(std::size_t lane) const = 0;
  virtual bool finite(std::size_t lane) const = 0;
  virtual void state(std::size_t lane, std::span<double> out) const = 0;
};

struct ParameterInfo {
  std::string name;
  std::string unit;
  std::string description;
};

/// Stochastic patient model
///   dx = f(t,x,u,d,p) dt + sigma(t,x,u,d,p) dw,   z = h(t,x,p),   y_k = g(t_k,x,p) + v_k,  v_k ~ N(0, R).
/// Model time is in minutes. Implementations are immutable and shareable across threads.
class PatientModel {
 public:
  virtual ~PatientModel() = default;

  virtual std::string_view id() const = 0;
  virtual std::size_t state_dimension() const = 0;
  virtual std::size_t wiener_dimension() const = 0;
  virtual const std::vector<ParameterInfo>& parameters() const = 0;
  virtual const std::vector<std::string>& state_names() const = 0;

  /// Resolves a named parameter set into the dense vector used by the numeric routines.
  virtual std::vector<double> bind(const ParameterSet& params) const = 0;

  virtual void drift(double t, std::span<const double> x, const ModelInputs& in, std::span<const double> p,
                     std::span<double> dx) const = 0;
  /// Row-major state_dimension x wiener_dimension matrix.
  virtual void diffusion(double t, std::span<const double> x, const ModelInputs& in, std::span<const double> p,
                         std::span<double> sigma) const = 0;
  /// Plasma glucose, mmol/L.
  virtual double output(double t, std::span<const double> x, std::span<const double> p) const = 0;
  /// Noise-free CGM reading, mmol/L.
  virtual double measurement(double t, std::span<const double> x, std::span<const double> p) const = 0;
  virtual double noise_variance(double t, std::span<const double> p) const = 0;

  /// Solves drift(x, u_basal, d = 0) = 0 with output(x) = target_bg. Throws SimulationError if no solution.
  virtual SteadyState steady_state(std::span<const double> p, double target_bg) const = 0;

  /// Default implementation steps each lane through the generic drift/diffusion interface.
  virtual std::unique_ptr<BatchStepper> make_batch_stepper(simd::Isa isa) const;
};

/// x' = x + f dt + sigma dw with dw ~ N(0, I dt), then projection onto x >= 0.
/// `xi` holds wiener_dimension standard normal draws. dt in minutes.
void euler_maruyama_step(const PatientModel& model, std::span<double> x, const ModelInputs& in,
                         std::span<const double> p, double t, double dt, std::span<const double> xi);

/// Same step drawing the Wiener increment from `rng`.
void euler_maruyama_step(const PatientModel& model, std::span<double> x, const ModelInputs& in,
                         std::span<const double> p, double t, double dt, RngStream& rng);

/// y = g(t,x,p) + v with v ~ N(0, R(t)).
double measure(const PatientModel& model, double t, std::span<const double> x, std::span<const double> p,
               RngStream& rng);

/// Models are registered under string ids; "hovorka_ext" is always present.
const PatientModel& find_model(std::string_view id);
void register_model(std::shared_ptr<const PatientModel> model);
std::vector<std::string> registered_models();

}  // namespace vct
