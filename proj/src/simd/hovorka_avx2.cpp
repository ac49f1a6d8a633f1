// Compiled with -mavx2. Everything vector-typed stays in this translation
// unit with internal linkage so no AVX2-encoded inline function can leak
// into callers running on older CPUs.

#include <immintrin.h>

#include "vct/simd/hovorka_batch.hpp"

namespace vct::hovorka {
namespace {

struct Vec4d {
  __m256d r;

  Vec4d() = default;
  explicit Vec4d(__m256d v) : r(v) {}
  Vec4d(double s) : r(_mm256_set1_pd(s)) {}  // NOLINT: broadcast is implicit like the scalar type

  friend Vec4d operator+(Vec4d a, Vec4d b) { return Vec4d(_mm256_add_pd(a.r, b.r)); }
  friend Vec4d operator-(Vec4d a, Vec4d b) { return Vec4d(_mm256_sub_pd(a.r, b.r)); }
  friend Vec4d operator*(Vec4d a, Vec4d b) { return Vec4d(_mm256_mul_pd(a.r, b.r)); }
  friend Vec4d operator/(Vec4d a, Vec4d b) { return Vec4d(_mm256_div_pd(a.r, b.r)); }

  friend Vec4d select_ge(Vec4d a, Vec4d b, Vec4d t, Vec4d f) {
    return Vec4d(_mm256_blendv_pd(f.r, t.r, _mm256_cmp_pd(a.r, b.r, _CMP_GE_OQ)));
  }
  friend Vec4d select_lt(Vec4d a, Vec4d b, Vec4d t, Vec4d f) {
    return Vec4d(_mm256_blendv_pd(f.r, t.r, _mm256_cmp_pd(a.r, b.r, _CMP_LT_OQ)));
  }
  friend Vec4d max_of(Vec4d a, Vec4d b) { return Vec4d(_mm256_max_pd(a.r, b.r)); }
};

static_assert(simd::kLanes == 4, "AVX2 kernel packs four doubles per register");

}  // namespace

void step_avx2(Batch& batch, double h, double sqrt_h) {
  Vec4d x[kStateCount];
  Vec4d p[kParamCount];
  Vec4d in[kInputCount];
  Vec4d xi[kWienerCount];
  Vec4d out[kStateCount];
  for (std::size_t i = 0; i < kStateCount; ++i) x[i] = Vec4d(_mm256_load_pd(batch.x[i].v));
  for (std::size_t i = 0; i < kParamCount; ++i) p[i] = Vec4d(_mm256_load_pd(batch.p[i].v));
  for (std::size_t i = 0; i < kInputCount; ++i) in[i] = Vec4d(_mm256_load_pd(batch.in[i].v));
  for (std::size_t i = 0; i < kWienerCount; ++i) xi[i] = Vec4d(_mm256_load_pd(batch.xi[i].v));
  euler_maruyama<Vec4d>(x, p, in, xi, Vec4d(h), Vec4d(sqrt_h), out);
  for (std::size_t i = 0; i < kStateCount; ++i) _mm256_store_pd(batch.x[i].v, out[i].r);
}

}  // namespace vct::hovorka
