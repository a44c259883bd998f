#include <cstdlib>
#include <string_view>

#include "radwatch/kernels.hpp"

namespace radwatch::simd {

#if defined(RADWATCH_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif

const KernelTable* avx2_kernels() {
#if defined(RADWATCH_HAVE_AVX2)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    if (const char* env = std::getenv("RADWATCH_ISA");
        env != nullptr && std::string_view(env) == "scalar")
      return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace radwatch::simd
