#include "hiersign/kernels.hpp"

#include <cstdlib>
#include <string>

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#endif

namespace hiersign::kernels {

#if defined(HIERSIGN_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  unsigned int eax, ebx, ecx, edx;
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
  const bool avx2 = (ebx & (1u << 5)) != 0;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
  const bool fma = (ecx & (1u << 12)) != 0;
  return avx2 && fma;
#else
  return false;
#endif
}

namespace {

const KernelTable* resolve() {
  std::string mode = "auto";
  if (const char* env = std::getenv("HIERSIGN_KERNELS")) mode = env;
  if (mode == "scalar") return &scalar();
#if defined(HIERSIGN_HAVE_AVX2_TU)
  if (mode == "avx2") return &avx2_table();  // caller asked; trust the CPU
  if (cpu_has_avx2()) return &avx2_table();
#endif
  return &scalar();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable* table = resolve();
  return *table;
}

const KernelTable* by_name(std::string_view name) {
  if (name == "scalar") return &scalar();
#if defined(HIERSIGN_HAVE_AVX2_TU)
  if (name == "avx2") return &avx2_table();
#endif
  return nullptr;
}

}  // namespace hiersign::kernels
