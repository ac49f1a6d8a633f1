#include "vct/simd/isa.hpp"

#include <cstdlib>
#include <string>

#include "vct/errors.hpp"

namespace vct::simd {

bool cpu_has_avx2() noexcept {
#if defined(VCT_HAVE_AVX2_KERNEL) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa resolve(KernelChoice choice) noexcept {
  switch (choice) {
    case KernelChoice::scalar:
      return Isa::scalar;
    case KernelChoice::avx2:
      return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
    case KernelChoice::automatic:
      break;
  }
  if (const char* force = std::getenv("VCT_FORCE_SCALAR"); force != nullptr && std::string(force) == "1") {
    return Isa::scalar;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

std::string_view to_string(Isa isa) noexcept { return isa == Isa::avx2 ? "avx2" : "scalar"; }

std::string_view to_string(KernelChoice choice) noexcept {
  switch (choice) {
    case KernelChoice::scalar:
      return "scalar";
    case KernelChoice::avx2:
      return "avx2";
    case KernelChoice::automatic:
      break;
  }
  return "auto";
}

KernelChoice parse_kernel_choice(std::string_view text) {
  if (text == "auto") return KernelChoice::automatic;
  if (text == "scalar") return KernelChoice::scalar;
  if (text == "avx2") return KernelChoice::avx2;
  throw ConfigError("unknown kernel '" + std::string(text) + "' (expected auto, scalar or avx2)");
}

}  // namespace vct::simd
