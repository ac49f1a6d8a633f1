#pragma once

#include <cstddef>
#include <string_view>

namespace vct::simd {

/// Patients advanced together by one batch kernel call.
inline constexpr std::size_t kLanes = 4;

enum class Isa { scalar, avx2 };

/// Requested kernel flavour; `automatic` resolves to the best ISA the CPU supports.
enum class KernelChoice { automatic, scalar, avx2 };

bool cpu_has_avx2() noexcept;

/// Resolves a choice against the running CPU. Requesting avx2 on a CPU
/// without it falls back to scalar. VCT_FORCE_SCALAR=1 in the environment
/// forces scalar for `automatic`.
Isa resolve(KernelChoice choice) noexcept;

std::string_view to_string(Isa isa) noexcept;
std::string_view to_string(KernelChoice choice) noexcept;
KernelChoice parse_kernel_choice(std::string_view text);

}  // namespace vct::simd
