#include "vct/simd/hovorka_batch.hpp"

namespace vct::hovorka {

void step_scalar(Batch& batch, double h, double sqrt_h) {
  for (std::size_t lane = 0; lane < simd::kLanes; ++lane) {
    double x[kStateCount];
    double p[kParamCount];
    double in[kInputCount];
    double xi[kWienerCount];
    double out[kStateCount];
    for (std::size_t i = 0; i < kStateCount; ++i) x[i] = batch.x[i].v[lane];
    for (std::size_t i = 0; i < kParamCount; ++i) p[i] = batch.p[i].v[lane];
    for (std::size_t i = 0; i < kInputCount; ++i) in[i] = batch.in[i].v[lane];
    for (std::size_t i = 0; i < kWienerCount; ++i) xi[i] = batch.xi[i].v[lane];
    euler_maruyama<double>(x, p, in, xi, h, sqrt_h, out);
    for (std::size_t i = 0; i < kStateCount; ++i) batch.x[i].v[lane] = out[i];
  }
}

StepFn step_function(simd::Isa isa) noexcept {
#if defined(VCT_HAVE_AVX2_KERNEL)
  if (isa == simd::Isa::avx2) return &step_avx2;
#else
  (void)isa;
#endif
  return &step_scalar;
}

}  // namespace vct::hovorka
