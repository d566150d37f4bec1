#include <atomic>
#include <cstdlib>
#include <string>

#include "eleatt/error.hpp"
#include "eleatt/kernels.hpp"

namespace eleatt::kernels {

#if defined(ELEATT_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(ELEATT_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) {
  if (isa == Isa::avx2) {
    if (const KernelTable* t = avx2_table()) return *t;
    throw ConfigError("AVX2 kernels are not available on this build/CPU");
  }
  return scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table_for(detect_isa())};
  return slot;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(ELEATT_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

bool isa_available(Isa isa) { return isa == Isa::scalar || avx2_table() != nullptr; }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw ConfigError("unknown ISA '" + std::string(name) + "' (expected scalar or avx2)");
}

Isa detect_isa() {
  if (const char* env = std::getenv("ELEATT_ISA"); env != nullptr && *env != '\0') {
    const Isa wanted = parse_isa(env);
    if (isa_available(wanted)) return wanted;
  }
  return isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

void select(Isa isa) { active_slot().store(&table_for(isa), std::memory_order_relaxed); }

ScopedIsa::ScopedIsa(Isa isa) : previous_(active().isa) { select(isa); }
ScopedIsa::~ScopedIsa() { select(previous_); }

}  // namespace eleatt::kernels
