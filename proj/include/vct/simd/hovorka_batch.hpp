#pragma once

#include <array>

#include "vct/simd/hovorka_kernel.hpp"
#include "vct/simd/isa.hpp"

namespace vct::hovorka {

struct alignas(32) Lanes {
  double v[simd::kLanes];
};

/// Structure-of-arrays block holding kLanes patients.
struct Batch {
  std::array<Lanes, kStateCount> x{};
  std::array<Lanes, kParamCount> p{};
  std::array<Lanes, kInputCount> in{};
  std::array<Lanes, kWienerCount> xi{};
};

using StepFn = void (*)(Batch&, double h, double sqrt_h);

/// Reference kernel: one lane at a time through the double instantiation.
void step_scalar(Batch& batch, double h, double sqrt_h);

/// All lanes at once with 256-bit vectors. Only call when the CPU supports AVX2.
void step_avx2(Batch& batch, double h, double sqrt_h);

StepFn step_function(simd::Isa isa) noexcept;

}  // namespace vct::hovorka
