#include <cstdlib>
#include <cstring>
#include <unistd.h>

#include "hsgt/common.hpp"

extern "C" char* openblas_get_corename();

namespace hsgt {

void pin_blas_coretype(char** argv) {
  if (std::getenv("OPENBLAS_CORETYPE") != nullptr) return;
  if (std::strcmp(openblas_get_corename(), "Prescott") != 0)
    return;  // detection worked; leave the library's choice alone
  const char* core = nullptr;
  if (__builtin_cpu_supports("avx512f"))
    core = "SKYLAKEX";
  else if (__builtin_cpu_supports("avx2"))
    core = "HASWELL";
  if (core == nullptr) return;  // Prescott is the honest choice
  setenv("OPENBLAS_CORETYPE", core, 1);
  execv("/proc/self/exe", argv);
  // exec failed: keep running on the slow kernels
}

}  // namespace hsgt
