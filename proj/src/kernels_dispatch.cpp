#include "mlvamp/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace mlvamp::kernels {

#if defined(MLVAMP_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(MLVAMP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (supported) return &avx2_table_impl();
#endif
  return nullptr;
}

const KernelTable& active() {
  static const KernelTable& chosen = [&]() -> const KernelTable& {
    const char* env = std::getenv("MLVAMP_KERNELS");
    if (env && std::string_view(env) == "scalar") return scalar_table();
    if (const KernelTable* t = avx2_table()) return *t;
    return scalar_table();
  }();
  return chosen;
}

}  // namespace mlvamp::kernels
