#include "gmclab/simd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gmclab::simd {

namespace {
const Kernels& select() {
  const char* force = std::getenv("GMCLAB_SIMD");
  if (force && std::strcmp(force, "scalar") == 0) return scalar_kernels();
  const Kernels* v = avx2_kernels();
  if (force && std::strcmp(force, "avx2") == 0 && v) return *v;
  if (force && std::strcmp(force, "scalar") != 0 && !v) return scalar_kernels();
  return v ? *v : scalar_kernels();
}
}  // namespace

const Kernels& active() {
  static const Kernels& k = select();
  return k;
}

}  // namespace gmclab::simd
