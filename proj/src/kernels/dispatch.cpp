#include "vrf/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace vrf::kernels {

#if !defined(VRF_HAVE_AVX2)
const KernelTable* avx2_table() { return nullptr; }
#endif
#if !defined(VRF_HAVE_NEON)
const KernelTable* neon_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(VRF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &scalar_table();
    case Isa::kAvx2:
      return cpu_has_avx2() ? avx2_table() : nullptr;
    case Isa::kNeon:
      return neon_table();
  }
  return nullptr;
}

Isa initial_isa() {
  if (const char* env = std::getenv("VRF_ISA"); env != nullptr && std::string(env) == "scalar")
    return Isa::kScalar;
  return detected_isa();
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

Isa detected_isa() {
  if (table_for(Isa::kAvx2) != nullptr) return Isa::kAvx2;
  if (table_for(Isa::kNeon) != nullptr) return Isa::kNeon;
  return Isa::kScalar;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) {
  if (table_for(isa) == nullptr) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

const KernelTable& table() { return *table_for(active_isa()); }

}  // namespace vrf::kernels
