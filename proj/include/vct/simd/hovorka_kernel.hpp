#pragma once

// Right-hand side of the extended Hovorka model, written once over a generic
// lane type V. Instantiated with V = double for the scalar reference kernel
// and with a 4-wide vector type for the AVX2 kernel. Both instantiations
// perform the same IEEE operations in the same order, so their results are
// bit-identical (the build disables FMA contraction).
//
// V must provide +, -, *, / and a broadcast constructor from double, and the
// free functions select_ge, select_lt and max_of declared for it.
//
// Units: time in minutes, glucose masses in mmol, insulin in mU, glucagon in ug.
//
// Sources:
//   glucose-insulin core, gut absorption: Hovorka et al., Physiol. Meas. 25 (2004) 905-920
//   parameter priors:                      Hovorka et al., Am J Physiol Endocrinol Metab 282 (2002)
//   subcutaneous glucagon (two states):    after Wendt et al., Diabetes Technol. Ther. (2016)
//   exercise effect (three states):        after Rashid et al., Ind. Eng. Chem. Res. (2019)
// The glucagon and exercise blocks keep the cited compartment structure with
// gains documented in data/model_manifest.json.

#include <cstddef>

#include "vct/simd/scalar_ops.hpp"

namespace vct::hovorka {

enum State : std::size_t {
  kQ1,   // glucose mass, accessible compartment (mmol)
  kQ2,   // glucose mass, non-accessible compartment (mmol)
  kS1,   // subcutaneous insulin, compartment 1 (mU)
  kS2,   // subcutaneous insulin, compartment 2 (mU)
  kI,    // plasma insulin concentration (mU/L)
  kX1,   // insulin action on glucose transport (1/min)
  kX2,   // insulin action on glucose disposal (1/min)
  kX3,   // insulin action on endogenous production (-)
  kD1,   // gut glucose, compartment 1 (mmol)
  kD2,   // gut glucose, compartment 2 (mmol)
  kGsc,  // CGM-measured glucose (mmol/L)
  kZ1,   // subcutaneous glucagon depot (ug)
  kZ2,   // plasma glucagon amount (ug)
  kE1,   // filtered heart-rate reserve (-)
  kE2,   // exercise glucose-uptake activation (-)
  kE3,   // exercise insulin-sensitivity carry-over (-)
  kStateCount
};

// Dense, body-weight-resolved parameter vector consumed by the kernel.
enum Param : std::size_t {
  kEgp0,        // mmol/min
  kF01,         // mmol/min
  kK12,         // 1/min
  kKa1,         // 1/min
  kKa2,         // 1/min
  kKa3,         // 1/min
  kKb1,         // SIT * ka1
  kKb2,         // SID * ka2
  kKb3,         // SIE * ka3
  kKe,          // 1/min
  kVi,          // L
  kVg,          // L
  kAg,          // -
  kTmaxG,       // min
  kTmaxI,       // min
  kTauCgm,      // min
  kTmaxGln,     // min
  kKeGln,       // 1/min
  kSGln,        // mmol/min per ug
  kTauHrr,      // min
  kTauUptake,   // min
  kAlphaSens,   // 1/min
  kTauSens,     // min
  kBetaUptake,  // 1/min
  kGammaSens,   // -
  kSigmaGut,    // 1/sqrt(min), multiplicative on D1 and D2
  kSigmaQ1,     // mmol/sqrt(min), additive on Q1
  kParamCount
};

enum Input : std::size_t {
  kInsulin,   // mU/min (basal + bolus)
  kGlucagon,  // ug/min
  kCho,       // g/min
  kHrr,       // heart-rate reserve fraction
  kInputCount
};

inline constexpr std::size_t kWienerCount = 3;
inline constexpr double kGlucoseMmolPerGram = 1000.0 / 180.156;

template <class V>
inline void drift(const V* x, const V* p, const V* in, V* dx) {
  const V zero(0.0);
  const V one(1.0);

  const V q1 = x[kQ1];
  const V q2 = x[kQ2];
  const V g = q1 / p[kVg];

  // Non-insulin-dependent flux is saturated above 4.5 mmol/L; renal clearance above 9 mmol/L.
  const V f01c = select_ge(g, V(4.5), p[kF01], p[kF01] * g / V(4.5));
  const V fr = select_ge(g, V(9.0), V(0.003) * (g - V(9.0)) * p[kVg], zero);
  const V ug = x[kD2] / p[kTmaxG];
  const V egp = max_of(p[kEgp0] * (one - x[kX3]) + p[kSGln] * x[kZ2], zero);

  const V x1_eff = x[kX1] * (one + p[kGammaSens] * x[kE3]);
  const V uptake = p[kBetaUptake] * x[kE2] * q1;

  dx[kQ1] = zero - f01c - x1_eff * q1 + p[kK12] * q2 - fr + egp + ug - uptake;
  dx[kQ2] = x1_eff * q1 - (p[kK12] + x[kX2]) * q2;

  dx[kS1] = in[kInsulin] - x[kS1] / p[kTmaxI];
  dx[kS2] = (x[kS1] - x[kS2]) / p[kTmaxI];
  dx[kI] = x[kS2] / (p[kTmaxI] * p[kVi]) - p[kKe] * x[kI];

  dx[kX1] = p[kKb1] * x[kI] - p[kKa1] * x[kX1];
  dx[kX2] = p[kKb2] * x[kI] - p[kKa2] * x[kX2];
  dx[kX3] = p[kKb3] * x[kI] - p[kKa3] * x[kX3];

  dx[kD1] = p[kAg] * in[kCho] * V(kGlucoseMmolPerGram) - x[kD1] / p[kTmaxG];
  dx[kD2] = (x[kD1] - x[kD2]) / p[kTmaxG];

  dx[kGsc] = (g - x[kGsc]) / p[kTauCgm];

  dx[kZ1] = in[kGlucagon] - x[kZ1] / p[kTmaxGln];
  dx[kZ2] = x[kZ1] / p[kTmaxGln] - p[kKeGln] * x[kZ2];

  dx[kE1] = (in[kHrr] - x[kE1]) / p[kTauHrr];
  dx[kE2] = (x[kE1] - x[kE2]) / p[kTauUptake];
  dx[kE3] = p[kAlphaSens] * x[kE1] - x[kE3] / p[kTauSens];
}

/// One Euler-Maruyama step of length h (minutes) followed by projection onto
/// the nonnegative orthant. `xi` holds kWienerCount standard normal draws.
template <class V>
inline void euler_maruyama(const V* x, const V* p, const V* in, const V* xi, V h, V sqrt_h, V* out) {
  V dx[kStateCount];
  drift(x, p, in, dx);
  for (std::size_t i = 0; i < kStateCount; ++i) out[i] = x[i] + dx[i] * h;

  out[kD1] = out[kD1] + p[kSigmaGut] * x[kD1] * (sqrt_h * xi[0]);
  out[kD2] = out[kD2] + p[kSigmaGut] * x[kD2] * (sqrt_h * xi[1]);
  out[kQ1] = out[kQ1] + p[kSigmaQ1] * (sqrt_h * xi[2]);

  // NaN survives the projection so the caller can detect a blown-up lane.
  const V zero(0.0);
  for (std::size_t i = 0; i < kStateCount; ++i) out[i] = select_lt(out[i], zero, zero, out[i]);
}

}  // namespace vct::hovorka
