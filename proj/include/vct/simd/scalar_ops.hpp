#pragma once

// Lane operations for V = double. Semantics mirror the AVX2 instructions used
// by the vector kernel (vcmppd with ordered predicates, vmaxpd), including
// the NaN cases.

namespace vct::hovorka {

inline double select_ge(double a, double b, double if_true, double if_false) { return a >= b ? if_true : if_false; }
inline double select_lt(double a, double b, double if_true, double if_false) { return a < b ? if_true : if_false; }
inline double max_of(double a, double b) { return a > b ? a : b; }

}  // namespace vct::hovorka
