#include "vct/hovorka.hpp"

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>

#include "vct/errors.hpp"
#include "vct/simd/hovorka_batch.hpp"

namespace vct {

using namespace hovorka;

namespace {

// Raw (table) parameter names in binding order. Per-kg entries are scaled by BW.
struct RawParam {
  const char* name;
  const char* unit;
  const char* description;
};

constexpr RawParam kRawParams[] = {
    {"EGP0", "mmol/kg/min", "endogenous glucose production extrapolated to zero insulin"},
    {"F01", "mmol/kg/min", "non-insulin-dependent glucose flux"},
    {"k12", "1/min", "transfer rate from non-accessible to accessible glucose compartment"},
    {"ka1", "1/min", "deactivation rate, insulin action on transport"},
    {"ka2", "1/min", "deactivation rate, insulin action on disposal"},
    {"ka3", "1/min", "deactivation rate, insulin action on EGP"},
    {"SIT", "1/min per mU/L", "insulin sensitivity of glucose transport"},
    {"SID", "1/min per mU/L", "insulin sensitivity of glucose disposal"},
    {"SIE", "L/mU", "insulin sensitivity of endogenous glucose production"},
    {"ke", "1/min", "plasma insulin elimination rate"},
    {"VI", "L/kg", "insulin distribution volume"},
    {"VG", "L/kg", "glucose distribution volume"},
    {"AG", "-", "carbohydrate bioavailability"},
    {"tmaxG", "min", "time-to-maximum of carbohydrate absorption"},
    {"tmaxI", "min", "time-to-maximum of subcutaneous insulin absorption"},
    {"BW", "kg", "body weight"},
    {"tau_cgm", "min", "time constant of the CGM compartment"},
    {"tmax_gln", "min", "time-to-maximum of subcutaneous glucagon absorption"},
    {"ke_gln", "1/min", "plasma glucagon elimination rate"},
    {"S_gln", "mmol/min per ug", "glucagon effect on endogenous glucose production"},
    {"tau_hrr", "min", "time constant of the heart-rate-reserve filter"},
    {"tau_uptake", "min", "time constant of exercise-induced uptake activation"},
    {"alpha_sens", "1/min", "build-up rate of exercise insulin-sensitivity carry-over"},
    {"tau_sens", "min", "decay time of exercise insulin-sensitivity carry-over"},
    {"beta_uptake", "1/min", "exercise-induced insulin-independent glucose uptake per unit activation"},
    {"gamma_sens", "-", "relative insulin-sensitivity gain per unit carry-over"},
    {"sigma_gut", "1/sqrt(min)", "multiplicative diffusion intensity on the gut compartments"},
    {"sigma_q1", "mmol/sqrt(min)", "additive diffusion intensity on accessible glucose mass"},
    {"cgm_noise_variance", "(mmol/L)^2", "CGM measurement noise variance R"},
};

constexpr const char* kStateNames[] = {"Q1", "Q2", "S1", "S2", "I",   "x1",  "x2",  "x3",
                                       "D1", "D2", "Gsc", "Z1", "Z2", "E1", "E2", "E3"};

void load_inputs(const ModelInputs& in, double* out) {
  out[kInsulin] = in.basal_mu_per_min + in.bolus_mu_per_min;
  out[kGlucagon] = in.glucagon_ug_per_min;
  out[kCho] = in.cho_g_per_min;
  out[kHrr] = in.hrr;
}

class HovorkaBatchStepper final : public BatchStepper {
 public:
  explicit HovorkaBatchStepper(simd::Isa isa) : step_(step_function(isa)) {
    for (std::size_t lane = 0; lane < simd::kLanes; ++lane) disable(lane);
  }

  void load(std::size_t lane, std::span<const double> params, std::span<const double> x0) override {
    for (std::size_t i = 0; i < kParamCount; ++i) batch_.p[i].v[lane] = params[i];
    for (std::size_t i = 0; i < kStateCount; ++i) batch_.x[i].v[lane] = x0[i];
    set_inputs(lane, ModelInputs{});
  }

  void disable(std::size_t lane) override {
    // Unit parameters and a zero state keep the idle lane finite.
    for (auto& p : batch_.p) p.v[lane] = 1.0;
    for (auto& x : batch_.x) x.v[lane] = 0.0;
    for (auto& in : batch_.in) in.v[lane] = 0.0;
    for (auto& xi : batch_.xi) xi.v[lane] = 0.0;
  }

  void set_inputs(std::size_t lane, const ModelInputs& inputs) override {
    double in[kInputCount];
    load_inputs(inputs, in);
    for (std::size_t i = 0; i < kInputCount; ++i) batch_.in[i].v[lane] = in[i];
  }

  void set_noise(std::size_t lane, std::span<const double> xi) override {
    for (std::size_t i = 0; i < kWienerCount; ++i) batch_.xi[i].v[lane] = xi[i];
  }

  void step(double h) override {
    if (h != h_) {
      h_ = h;
      sqrt_h_ = std::sqrt(h);
    }
    step_(batch_, h_, sqrt_h_);
  }

  double output(std::size_t lane) const override { return batch_.x[kQ1].v[lane] / batch_.p[kVg].v[lane]; }
  double measurement(std::size_t lane) const override { return batch_.x[kGsc].v[lane]; }

  bool finite(std::size_t lane) const override {
    double sum = 0.0;
    for (const auto& x : batch_.x) sum += x.v[lane];
    return std::isfinite(sum);
  }

  void state(std::size_t lane, std::span<double> out) const override {
    for (std::size_t i = 0; i < kStateCount; ++i) out[i] = batch_.x[i].v[lane];
  }

 private:
  Batch batch_;
  StepFn step_;
  double h_ = -1.0;
  double sqrt_h_ = 0.0;
};

}  // namespace

ExtendedHovorka::ExtendedHovorka() {
  for (const auto& raw : kRawParams) parameters_.push_back({raw.name, raw.unit, raw.description});
  for (const char* name : kStateNames) state_names_.emplace_back(name);
}

std::vector<double> ExtendedHovorka::bind(const ParameterSet& params) const {
  const double bw = params.at("BW");
  std::vector<double> p(kBoundSize, 0.0);
  p[kEgp0] = params.at("EGP0") * bw;
  p[kF01] = params.at("F01") * bw;
  p[kK12] = params.at("k12");
  p[kKa1] = params.at("ka1");
  p[kKa2] = params.at("ka2");
  p[kKa3] = params.at("ka3");
  p[kKb1] = params.at("SIT") * p[kKa1];
  p[kKb2] = params.at("SID") * p[kKa2];
  p[kKb3] = params.at("SIE") * p[kKa3];
  p[kKe] = params.at("ke");
  p[kVi] = params.at("VI") * bw;
  p[kVg] = params.at("VG") * bw;
  p[kAg] = params.at("AG");
  p[kTmaxG] = params.at("tmaxG");
  p[kTmaxI] = params.at("tmaxI");
  p[kTauCgm] = params.at("tau_cgm");
  p[kTmaxGln] = params.at("tmax_gln");
  p[kKeGln] = params.at("ke_gln");
  p[kSGln] = params.at("S_gln");
  p[kTauHrr] = params.at("tau_hrr");
  p[kTauUptake] = params.at("tau_uptake");
  p[kAlphaSens] = params.at("alpha_sens");
  p[kTauSens] = params.at("tau_sens");
  p[kBetaUptake] = params.at("beta_uptake");
  p[kGammaSens] = params.at("gamma_sens");
  p[kSigmaGut] = params.at("sigma_gut");
  p[kSigmaQ1] = params.at("sigma_q1");
  p[kNoiseVarianceIndex] = params.at("cgm_noise_variance");
  for (std::size_t i : {kVg, kVi, kTmaxG, kTmaxI, kTauCgm, kTmaxGln, kTauHrr, kTauUptake, kTauSens}) {
    if (!(p[i] > 0.0)) throw ConfigError("model parameter at index " + std::to_string(i) + " must be positive");
  }
  return p;
}

void ExtendedHovorka::drift(double /*t*/, std::span<const double> x, const ModelInputs& in,
                            std::span<const double> p, std::span<double> dx) const {
  double u[kInputCount];
  load_inputs(in, u);
  hovorka::drift<double>(x.data(), p.data(), u, dx.data());
}

void ExtendedHovorka::diffusion(double /*t*/, std::span<const double> x, const ModelInputs& /*in*/,
                                std::span<const double> p, std::span<double> sigma) const {
  std::fill(sigma.begin(), sigma.end(), 0.0);
  sigma[kD1 * kWienerCount + 0] = p[kSigmaGut] * x[kD1];
  sigma[kD2 * kWienerCount + 1] = p[kSigmaGut] * x[kD2];
  sigma[kQ1 * kWienerCount + 2] = p[kSigmaQ1];
}

double ExtendedHovorka::output(double /*t*/, std::span<const double> x, std::span<const double> p) const {
  return x[kQ1] / p[kVg];
}

double ExtendedHovorka::measurement(double /*t*/, std::span<const double> x, std::span<const double> /*p*/) const {
  return x[kGsc];
}

double ExtendedHovorka::noise_variance(double /*t*/, std::span<const double> p) const {
  return p[kNoiseVarianceIndex];
}

SteadyState ExtendedHovorka::steady_state(std::span<const double> p, double target_bg) const {
  if (!(target_bg > 0.0)) throw SimulationError("steady state requires a positive target glucose");
  for (std::size_t i : {kKa1, kKa2, kKa3, kKe}) {
    if (!(p[i] > 0.0)) throw SimulationError("steady state undefined for a zero rate constant");
  }
  const double q1 = target_bg * p[kVg];
  const double g = q1 / p[kVg];
  const double f01c = g >= 4.5 ? p[kF01] : p[kF01] * g / 4.5;
  const double fr = g >= 9.0 ? 0.003 * (g - 9.0) * p[kVg] : 0.0;
  const double sit = p[kKb1] / p[kKa1];
  const double sid = p[kKb2] / p[kKa2];
  const double sie = p[kKb3] / p[kKa3];

  // Net accessible-glucose flux as a function of plasma insulin; strictly
  // decreasing, so its root gives the unique basal insulin level.
  const auto net_flux = [&](double insulin) {
    const double x1 = sit * insulin;
    const double x2 = sid * insulin;
    const double q2 = x1 * q1 / (p[kK12] + x2);
    const double egp = std::max(p[kEgp0] * (1.0 - sie * insulin), 0.0);
    return -f01c - x1 * q1 + p[kK12] * q2 - fr + egp;
  };

  if (!(net_flux(0.0) > 0.0)) {
    throw SimulationError("no steady state: glucose uptake exceeds production at zero insulin");
  }
  double hi = 1.0;
  while (net_flux(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e9) throw SimulationError("no steady state: insulin level unbounded");
  }
  std::uintmax_t iterations = 200;
  const auto bracket = boost::math::tools::toms748_solve(net_flux, 0.0, hi, boost::math::tools::eps_tolerance<double>(53),
                                                         iterations);
  double insulin = 0.5 * (bracket.first + bracket.second);
  if (std::abs(net_flux(bracket.first)) < std::abs(net_flux(insulin))) insulin = bracket.first;
  if (std::abs(net_flux(bracket.second)) < std::abs(net_flux(insulin))) insulin = bracket.second;

  const double u = insulin * p[kKe] * p[kVi];  // mU/min
  std::vector<double> x(kStateCount, 0.0);
  x[kS1] = u * p[kTmaxI];
  x[kS2] = x[kS1];
  x[kI] = insulin;
  x[kX1] = p[kKb1] * insulin / p[kKa1];
  x[kX2] = p[kKb2] * insulin / p[kKa2];
  x[kX3] = p[kKb3] * insulin / p[kKa3];
  x[kQ1] = q1;
  x[kQ2] = x[kX1] * q1 / (p[kK12] + x[kX2]);
  x[kGsc] = q1 / p[kVg];

  return SteadyState{std::move(x), u * 60.0 / 1000.0};
}

std::unique_ptr<BatchStepper> ExtendedHovorka::make_batch_stepper(simd::Isa isa) const {
  return std::make_unique<HovorkaBatchStepper>(isa);
}

}  // namespace vct
